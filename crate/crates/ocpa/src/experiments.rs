//! Experiment implementations. Each returns an [`Outcome`]; nothing here
//! touches the file system.

use std::f64::consts::PI;
use std::time::Instant;

use ocpa_core::analysis::charfn::charfn_decay_probe;
use ocpa_core::analysis::density::{increment_density_kde, symmetric_lattice, symmetry_defect};
use ocpa_core::analysis::ehm::ehm_identity_check;
use ocpa_core::analysis::holder::{holder_exponent_local_time, holder_exponent_path};
use ocpa_core::analysis::smallball::small_ball_criterion;
use ocpa_core::coeffs::{CoefficientSet, MAX_DIM};
use ocpa_core::ensemble::solver_ensemble;
use ocpa_core::exec::Executor;
use ocpa_core::kernel::{
    linear_increment_variance, scan_kernel_identities, GaussianComparator, KernelConfig,
};
use ocpa_core::occupation::{
    histogram_fourier_agreement, local_time_fourier_inversion_many, occupation_formula_residual,
    occupation_histogram, sobolev_ensemble_profile, MAX_LOCAL_TIME_DIM,
};
use ocpa_core::oracle::{simulate_linear_path, SpectralConfig};
use ocpa_core::solver::{
    fit_moment_rows, increment_moments, scheme_probe_variance, validate_coefficients,
};
use ocpa_core::stats::{mean, variance, ExponentFit, MonteCarloEstimate};
use ocpa_core::{PathSample, SeedSpec, SpaceTimeGrid};
use serde_json::{json, Map, Value};

use crate::config::{
    ConfigError, DumpFormat, ExperimentConfig, ExperimentKind, LoadedConfig, PathSource,
};
use crate::io::{IoError, Table};

/// Plain decimal for moderate magnitudes, scientific notation otherwise.
pub fn fmt_num(v: f64) -> String {
    if v != 0.0 && v.is_finite() && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// One pass/fail criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub band: String,
    pub pass: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            band: format!("< {}", fmt_num(limit)),
            pass: value < limit,
        }
    }

    pub fn above(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            band: format!("> {}", fmt_num(limit)),
            pass: value > limit,
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_owned(),
            value,
            band: format!("[{}, {}]", fmt_num(lo), fmt_num(hi)),
            pass: value >= lo && value <= hi,
        }
    }

    pub fn flag(name: &str, ok: bool, band: &str) -> Self {
        Self {
            name: name.to_owned(),
            value: if ok { 1.0 } else { 0.0 },
            band: band.to_owned(),
            pass: ok,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "value": self.value, "band": self.band, "pass": self.pass })
    }
}

/// A trajectory scheduled for writing.
pub struct Dump {
    pub file: String,
    pub path: PathSample,
    pub format: DumpFormat,
}

#[derive(Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Extra JSON files, written verbatim.
    pub sidecars: Vec<(String, Value)>,
    pub dumps: Vec<Dump>,
    /// Wall time spent generating paths.
    pub path_seconds: f64,
}

impl Outcome {
    fn put(&mut self, key: &str, value: Value) {
        self.results.insert(key.to_owned(), value);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] ocpa_core::Error),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl RunError {
    /// 2: invalid configuration or violated precondition; 3: numerical
    /// blow-up; 4: file system; 1: a fit that could not be formed.
    pub fn exit_code(&self) -> i32 {
        use ocpa_core::Error as E;
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) => 4,
            RunError::Core(E::BlowUp { .. }) => 3,
            RunError::Core(E::DegenerateFit { .. }) => 1,
            RunError::Core(_) => 2,
        }
    }
}

/// A validated configuration, ready to run.
#[derive(Clone, Debug)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub grid: Option<SpaceTimeGrid>,
    pub coeffs: CoefficientSet,
}

const SPOT_CHECKS: usize = 1000;

fn span_ok(value: f64, horizon: f64) -> bool {
    value > 0.0 && value <= horizon * (1.0 + 1e-12)
}

/// Checks every physical parameter before any compute.
pub fn validate(loaded: &LoadedConfig) -> Result<Plan, ConfigError> {
    let c = loaded.config.resolved();
    let top = |key: &str, msg: String| loaded.error_at(None, key, msg);
    if c.dimension == 0 || c.dimension > MAX_DIM {
        return Err(top(
            "dimension",
            format!("dimension {} outside 1..={MAX_DIM}", c.dimension),
        ));
    }
    let coeffs = CoefficientSet::by_tag(&c.coefficients, c.dimension)
        .map_err(|e| top("coefficients", e.to_string()))?;
    let kind = c.experiment;
    let section = Some(kind.name());
    let at = |key: &str, msg: String| loaded.error_at(section, key, msg);

    let grid = match (&c.grid, kind.needs_paths()) {
        (Some(g), true) => {
            let gl = |key: &str, msg: String| loaded.error_at(Some("grid"), key, msg);
            let grid = match (g.n_time, g.courant) {
                (Some(n), None) => SpaceTimeGrid::new(g.n_space, n, g.horizon, g.probe_x),
                (None, Some(cr)) => {
                    SpaceTimeGrid::with_courant(g.n_space, cr, g.horizon, g.probe_x)
                }
                _ => {
                    return Err(gl(
                        "n-space",
                        "[grid] needs exactly one of `n-time` and `courant`".into(),
                    ))
                }
            }
            .map_err(|e| gl("n-space", e.to_string()))?;
            if c.source == PathSource::Solver {
                if let Err(e) = grid.check_explicit_stability() {
                    let key = if g.n_time.is_some() {
                        "n-time"
                    } else {
                        "courant"
                    };
                    return Err(gl(
                        key,
                        format!("{e}; the explicit scheme requires dt <= dx^2/2"),
                    ));
                }
            }
            Some(grid)
        }
        (None, true) => {
            return Err(ConfigError::new(format!(
                "experiment `{}` needs a [grid] section",
                kind.name()
            )))
        }
        (_, false) => None,
    };

    if kind.needs_paths() {
        if c.replications < 2 {
            return Err(top("replications", "need at least 2 replications".into()));
        }
        match c.source {
            PathSource::Oracle => {
                if c.coefficients != "linear" {
                    return Err(top(
                        "source",
                        format!(
                            "the oracle simulates only the linear set, not `{}`",
                            c.coefficients
                        ),
                    ));
                }
                let grid = grid.expect("grid present");
                let seed = SeedSpec::new(c.seed, 0);
                let res = match c.oracle_modes {
                    Some(m) => SpectralConfig::with_modes(grid, c.dimension, m, seed),
                    None => SpectralConfig::new(grid, c.dimension, seed),
                };
                res.map_err(|e| top("oracle-modes", e.to_string()))?;
            }
            PathSource::Solver => {
                validate_coefficients(&coeffs, SPOT_CHECKS, SeedSpec::new(c.seed, 0))
                    .map_err(|e| top("coefficients", e.to_string()))?;
            }
        }
    }

    let local_time = matches!(
        kind,
        ExperimentKind::Occupation | ExperimentKind::HolderLt | ExperimentKind::Density
    );
    if local_time && c.dimension > MAX_LOCAL_TIME_DIM {
        return Err(top(
            "dimension",
            format!(
                "`{}` requires dimension <= {MAX_LOCAL_TIME_DIM}",
                kind.name()
            ),
        ));
    }

    let horizon = grid.map_or(0.0, |g| g.horizon());
    match kind {
        ExperimentKind::KernelCheck => {
            let p = c.kernel_check.as_ref().unwrap();
            KernelConfig::new(p.truncation, p.min_t)
                .map_err(|e| at("truncation", e.to_string()))?;
        }
        ExperimentKind::EhmCheck => {
            let p = c.ehm_check.as_ref().unwrap();
            for case in &p.cases {
                if case.b.is_empty() || case.b.iter().any(|b| !(*b < 1.0)) || !(case.h > 0.0) {
                    return Err(at(
                        "cases",
                        format!(
                            "case b = {:?}, h = {}: need nonempty b with b_j < 1 and h > 0",
                            case.b, case.h
                        ),
                    ));
                }
            }
        }
        ExperimentKind::Simulate => {
            let p = c.simulate.as_ref().unwrap();
            if p.probe_times.iter().any(|&t| !span_ok(t, horizon)) {
                return Err(at(
                    "probe-times",
                    format!("probe times must lie in (0, {horizon}]"),
                ));
            }
            let g = grid.expect("grid present");
            if let Some(t) = p.probe_times.iter().find(|&&t| g.steps_for(t).is_err()) {
                return Err(at(
                    "probe-times",
                    format!("probe time {t} is not a multiple of dt = {}", g.dt()),
                ));
            }
        }
        ExperimentKind::OracleCompare => {
            let p = c.oracle_compare.as_ref().unwrap();
            if c.coefficients != "linear" || c.dimension != 1 || c.source != PathSource::Solver {
                return Err(top(
                    "coefficients",
                    "oracle-compare runs the solver on the linear set in dimension 1".into(),
                ));
            }
            if p.probe_times.is_empty() || p.probe_times.iter().any(|&t| !span_ok(t, horizon)) {
                return Err(at(
                    "probe-times",
                    format!("probe times must lie in (0, {horizon}]"),
                ));
            }
            if p.refinement.len() < 2 || p.refinement.windows(2).any(|w| w[1] <= w[0]) {
                return Err(at(
                    "refinement",
                    "need at least two increasing resolutions".into(),
                ));
            }
        }
        ExperimentKind::Moments => {
            let p = c.moments.as_ref().unwrap();
            let anchor = p.anchor.unwrap_or(0.5 * horizon);
            let max_gap = p.gaps.iter().copied().fold(0.0, f64::max);
            if p.gaps.iter().any(|g| !(*g > 0.0)) || anchor + max_gap > horizon * (1.0 + 1e-12) {
                return Err(at(
                    "gaps",
                    format!("gaps must be positive with anchor + gap <= {horizon}"),
                ));
            }
            if p.p == 0 || p.p % 2 != 0 {
                return Err(at(
                    "p",
                    format!("moment order {} must be even and positive", p.p),
                ));
            }
        }
        ExperimentKind::Occupation => {
            let p = c.occupation.as_ref().unwrap();
            if !(p.lo < p.hi) || p.bins == 0 || p.residual_bins.is_empty() {
                return Err(at(
                    "bins",
                    "need lo < hi, bins > 0 and at least one residual bin count".into(),
                ));
            }
            if !(p.far_point.abs() < PI / p.freq_step) {
                return Err(at(
                    "far-point",
                    format!(
                        "far point must lie below half the inversion period, {}",
                        PI / p.freq_step
                    ),
                ));
            }
            if let Some(points) = &p.points {
                if points.iter().any(|x| x.len() != c.dimension) {
                    return Err(at(
                        "points",
                        format!("points must have {} coordinates", c.dimension),
                    ));
                }
            }
        }
        ExperimentKind::Sobolev => {
            let p = c.sobolev.as_ref().unwrap();
            if !p.alphas.contains(&p.stable_alpha) || !p.alphas.contains(&p.divergent_alpha) {
                return Err(at(
                    "alphas",
                    "alphas must include stable-alpha and divergent-alpha".into(),
                ));
            }
            if p.stable_radii.iter().any(|r| !p.radii.contains(r)) {
                return Err(at("radii", "radii must include both stable-radii".into()));
            }
            if p.radii.windows(2).any(|w| w[1] <= w[0]) {
                return Err(at("radii", "radii must be increasing".into()));
            }
        }
        ExperimentKind::HolderPath => {
            let p = c.holder_path.as_ref().unwrap();
            if p.gaps.iter().any(|&g| !span_ok(g, horizon)) {
                return Err(at("gaps", format!("gaps must lie in (0, {horizon}]")));
            }
        }
        ExperimentKind::HolderLt => {
            let p = c.holder_lt.as_ref().unwrap();
            let max_gap = p.gaps.iter().copied().fold(0.0, f64::max);
            if p.gaps.iter().any(|g| !(*g > 0.0)) || p.anchor + max_gap > horizon * (1.0 + 1e-12) {
                return Err(at(
                    "gaps",
                    format!("gaps must be positive with anchor + gap <= {horizon}"),
                ));
            }
        }
        ExperimentKind::Smallball => {
            let p = c.smallball.as_ref().unwrap();
            if p.epsilons.windows(2).any(|w| w[1] >= w[0]) || p.epsilons.iter().any(|e| !(*e > 0.0))
            {
                return Err(at(
                    "epsilons",
                    "epsilons must be positive and strictly decreasing".into(),
                ));
            }
            if !span_ok(p.t.unwrap_or(horizon), horizon) {
                return Err(at("t", format!("t must lie in (0, {horizon}]")));
            }
        }
        ExperimentKind::Charfn => {
            let p = c.charfn.as_ref().unwrap();
            let tp = &p.time_points;
            if tp.len() < 2
                || tp.windows(2).any(|w| w[1] <= w[0])
                || tp[0] < 0.0
                || tp[tp.len() - 1] > horizon * (1.0 + 1e-12)
            {
                return Err(at(
                    "time-points",
                    format!("need at least two increasing time points in [0, {horizon}]"),
                ));
            }
        }
        ExperimentKind::Density => {
            let p = c.density.as_ref().unwrap();
            if p.pairs.is_empty()
                || p.pairs
                    .iter()
                    .any(|[s, t]| !(*s >= 0.0 && s < t && span_ok(*t, horizon)))
            {
                return Err(at("pairs", format!("pairs need 0 <= s < t <= {horizon}")));
            }
            if p.points_per_axis < 2 || !(p.extent > 0.0) {
                return Err(at(
                    "points-per-axis",
                    "need extent > 0 and at least 2 points per axis".into(),
                ));
            }
        }
    }

    Ok(Plan {
        config: c,
        grid,
        coeffs,
    })
}

/// Runs a validated plan on `exec`.
pub fn run_plan<E: Executor>(plan: &Plan, exec: &E) -> Result<Outcome, RunError> {
    let c = &plan.config;
    let mut out = Outcome::default();
    match c.experiment {
        ExperimentKind::KernelCheck => kernel_check(c, &mut out)?,
        ExperimentKind::EhmCheck => ehm_check(c, &mut out)?,
        kind => {
            let grid = plan.grid.expect("validated");
            let start = Instant::now();
            let paths = ensemble(plan, &grid, exec)?;
            out.path_seconds = start.elapsed().as_secs_f64();
            out.put("paths", paths_summary(&paths));
            match kind {
                ExperimentKind::Simulate => simulate(c, &grid, paths, &mut out),
                ExperimentKind::OracleCompare => oracle_compare(c, &grid, &paths, &mut out)?,
                ExperimentKind::Moments => moments(c, &grid, &paths, &mut out)?,
                ExperimentKind::Occupation => occupation(c, &paths, exec, &mut out)?,
                ExperimentKind::Sobolev => sobolev(c, &paths, exec, &mut out)?,
                ExperimentKind::HolderPath => holder_path(c, &paths, exec, &mut out)?,
                ExperimentKind::HolderLt => holder_lt(c, &paths, exec, &mut out)?,
                ExperimentKind::Smallball => smallball(c, &grid, &paths, exec, &mut out)?,
                ExperimentKind::Charfn => charfn(c, &grid, &paths, exec, &mut out)?,
                ExperimentKind::Density => density(c, &grid, &paths, exec, &mut out)?,
                ExperimentKind::KernelCheck | ExperimentKind::EhmCheck => unreachable!(),
            }
        }
    }
    Ok(out)
}

fn ensemble<E: Executor>(
    plan: &Plan,
    grid: &SpaceTimeGrid,
    exec: &E,
) -> ocpa_core::Result<Vec<PathSample>> {
    let c = &plan.config;
    match c.source {
        PathSource::Solver => solver_ensemble(&plan.coeffs, grid, c.seed, c.replications, exec),
        PathSource::Oracle => {
            let seed = SeedSpec::new(c.seed, 0);
            let cfg = match c.oracle_modes {
                Some(m) => SpectralConfig::with_modes(*grid, c.dimension, m, seed)?,
                None => SpectralConfig::new(*grid, c.dimension, seed)?,
            };
            Ok(exec.map(c.replications, |r| {
                simulate_linear_path(&cfg.with_replication(r as u64))
            }))
        }
    }
}

fn paths_summary(paths: &[PathSample]) -> Value {
    let max_abs = paths
        .iter()
        .flat_map(|p| p.states().iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    json!({
        "replications": paths.len(),
        "source": paths.first().map(|p| p.tag().to_owned()),
        "max_abs_value": max_abs,
    })
}

fn fit_json(fit: &ExponentFit) -> Value {
    json!({
        "slope": fit.slope,
        "slope_stderr": fit.slope_stderr,
        "intercept": fit.intercept,
        "scales": fit.scales,
        "levels": fit.levels,
    })
}

fn fit_table(name: &str, scale: &str, fit: &ExponentFit) -> Table {
    let mut t = Table::new(name, &[scale, "level", "fitted"])
        .meta(format!("slope = {}", fit.slope))
        .meta(format!("slope_stderr = {}", fit.slope_stderr))
        .meta(format!("intercept = {}", fit.intercept));
    for (s, l) in fit.scales.iter().zip(&fit.levels) {
        t.push(vec![
            json!(s),
            json!(l),
            json!((fit.intercept + fit.slope * s.ln()).exp()),
        ]);
    }
    t
}

fn kernel_check(c: &ExperimentConfig, out: &mut Outcome) -> Result<(), RunError> {
    let p = c.kernel_check.as_ref().unwrap();
    let cfg = KernelConfig::new(p.truncation, p.min_t)?;
    let r = scan_kernel_identities(&cfg)?;
    let checks = [
        Check::below("symmetry", r.max_symmetry_defect, 1e-14),
        Check::below("mass", r.max_mass_defect, 1e-10),
        Check::below("semigroup", r.max_semigroup_residual, 1e-8),
        Check::below("series_agreement", r.max_series_disagreement, 1e-10),
        Check::above("bound_ratio_positive", r.min_bound_ratio, 0.0),
    ];
    let mut table = Table::new("kernel", &["identity", "max_residual", "band", "pass"])
        .meta(format!("truncation = {}", p.truncation))
        .meta(format!("min_t = {}", p.min_t));
    for ch in &checks {
        table.push(vec![
            json!(ch.name),
            json!(ch.value),
            json!(ch.band),
            json!(ch.pass),
        ]);
    }
    out.put(
        "kernel",
        json!({
            "max_symmetry_defect": r.max_symmetry_defect,
            "max_mass_defect": r.max_mass_defect,
            "max_semigroup_residual": r.max_semigroup_residual,
            "max_series_disagreement": r.max_series_disagreement,
            "min_bound_ratio": r.min_bound_ratio,
            "max_bound_ratio": r.max_bound_ratio,
        }),
    );
    out.checks.extend(checks);
    out.tables.push(table);
    Ok(())
}

fn ehm_check(c: &ExperimentConfig, out: &mut Outcome) -> Result<(), RunError> {
    let p = c.ehm_check.as_ref().unwrap();
    let mut table = Table::new(
        "ehm",
        &["m", "b", "h", "quadrature", "closed_form", "residual"],
    )
    .meta(format!("tolerance = {}", p.tolerance));
    let mut rows = Vec::new();
    for (i, case) in p.cases.iter().enumerate() {
        let r = ehm_identity_check(&case.b, case.h)?;
        let b = case
            .b
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        table.push(vec![
            json!(case.b.len()),
            json!(b),
            json!(case.h),
            json!(r.lhs),
            json!(r.rhs),
            json!(r.residual),
        ]);
        rows.push(
            json!({ "b": case.b, "h": case.h, "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual }),
        );
        out.checks.push(Check::below(
            &format!("case_{}_m{}", i + 1, case.b.len()),
            r.residual,
            p.tolerance,
        ));
    }
    out.put("cases", Value::Array(rows));
    out.tables.push(table);
    Ok(())
}

fn simulate(c: &ExperimentConfig, grid: &SpaceTimeGrid, paths: Vec<PathSample>, out: &mut Outcome) {
    let p = c.simulate.as_ref().unwrap();
    let d = c.dimension;
    let steps: Vec<usize> = if p.probe_times.is_empty() {
        (1..=8).map(|k| k * grid.n_time() / 8).collect()
    } else {
        p.probe_times
            .iter()
            .map(|&t| grid.steps_for(t).expect("validated"))
            .collect()
    };
    let mut columns = vec!["time".to_owned()];
    for k in 1..=d {
        columns.push(format!("mean_{k}"));
        columns.push(format!("var_{k}"));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("simulate", &cols)
        .meta(format!("coefficients = {}", c.coefficients))
        .meta(format!("probe_x = {}", grid.probe_x()))
        .meta(format!("replications = {}", paths.len()));
    for &step in &steps {
        let mut row = vec![json!(grid.time(step))];
        for k in 0..d {
            let v: Vec<f64> = paths.iter().map(|p| p.state(step)[k]).collect();
            row.push(json!(mean(&v)));
            row.push(json!(variance(&v)));
        }
        table.push(row);
    }
    out.tables.push(table);
    if p.dump != DumpFormat::None {
        let ext = if p.dump == DumpFormat::Binary {
            "bin"
        } else {
            "csv"
        };
        for (r, path) in paths.into_iter().take(p.dump_count).enumerate() {
            out.dumps.push(Dump {
                file: format!("trajectory_{r:04}.{ext}"),
                path,
                format: p.dump,
            });
        }
    }
}

fn oracle_compare(
    c: &ExperimentConfig,
    grid: &SpaceTimeGrid,
    paths: &[PathSample],
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.oracle_compare.as_ref().unwrap();
    let kcfg = KernelConfig::default();
    let x = grid.probe_x();
    let mut table = Table::new(
        "oracle_compare",
        &[
            "requested_time",
            "time",
            "mean",
            "mean_stderr",
            "variance",
            "variance_stderr",
            "exact_variance",
            "scheme_variance",
            "relative_error",
        ],
    )
    .meta(format!("n_space = {}", grid.n_space()))
    .meta(format!("dt = {}", grid.dt()))
    .meta(format!("replications = {}", paths.len()));
    let mut worst: f64 = 0.0;
    let mut mean_ok = true;
    for &requested in &p.probe_times {
        // Nearest grid time; the exact value is taken at that time.
        let step = (requested / grid.dt()).round() as usize;
        let t = grid.time(step);
        let v: Vec<f64> = paths.iter().map(|p| p.state(step)[0]).collect();
        let m = MonteCarloEstimate::from_samples(&v);
        let var = variance(&v);
        // Standard error of the sample variance from the fourth central moment.
        let m4 = v.iter().map(|y| (y - m.mean).powi(4)).sum::<f64>() / v.len() as f64;
        let var_se = ((m4 - var * var) / v.len() as f64).max(0.0).sqrt();
        let exact = linear_increment_variance(0.0, t, x, &kcfg)?;
        let scheme = scheme_probe_variance(grid, step);
        let rel = (var - exact).abs() / exact;
        worst = worst.max(rel);
        mean_ok &= m.within(0.0, p.k_sigma);
        table.push(vec![
            json!(requested),
            json!(t),
            json!(m.mean),
            json!(m.stderr),
            json!(var),
            json!(var_se),
            json!(exact),
            json!(scheme),
            json!(rel),
        ]);
        out.checks.push(Check::below(
            &format!("variance_t{requested}"),
            rel,
            p.rel_tol,
        ));
    }
    out.checks.push(Check::flag(
        "mean_zero",
        mean_ok,
        &format!("|mean| <= {} stderr", p.k_sigma),
    ));

    // Discretization bias of the scheme itself, exact in distribution.
    let courant = grid.dt() / (grid.dx() * grid.dx());
    let t_end = grid.horizon();
    let exact_end = linear_increment_variance(0.0, t_end, x, &kcfg)?;
    let mut bias_table = Table::new(
        "refinement",
        &[
            "n_space",
            "dx",
            "scheme_variance",
            "exact_variance",
            "relative_bias",
        ],
    )
    .meta(format!("courant = {courant}"))
    .meta(format!("time = {t_end}"));
    let mut biases = Vec::new();
    for &n in &p.refinement {
        let g = SpaceTimeGrid::with_courant(n, courant, t_end, x)?;
        let s = scheme_probe_variance(&g, g.n_time());
        let b = (s - exact_end).abs() / exact_end;
        biases.push(b);
        bias_table.push(vec![
            json!(n),
            json!(g.dx()),
            json!(s),
            json!(exact_end),
            json!(b),
        ]);
    }
    let decreasing = biases.windows(2).all(|w| w[1] < w[0]);
    out.checks.push(Check::flag(
        "bias_decreases_under_refinement",
        decreasing,
        "strictly decreasing",
    ));
    out.put(
        "oracle_compare",
        json!({ "max_relative_error": worst, "refinement_bias": biases, "courant": courant }),
    );
    out.tables.push(table);
    out.tables.push(bias_table);
    Ok(())
}

fn moments(
    c: &ExperimentConfig,
    grid: &SpaceTimeGrid,
    paths: &[PathSample],
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.moments.as_ref().unwrap();
    let anchor = p.anchor.unwrap_or(0.5 * grid.horizon());
    let rows = increment_moments(paths, anchor, &p.gaps, p.p)?;
    let fit = fit_moment_rows(&rows)?;
    let mut table = Table::new("moments", &["gap", "moment", "stderr", "fitted"])
        .meta(format!("p = {}", p.p))
        .meta(format!("anchor = {anchor}"))
        .meta(format!("slope = {}", fit.slope))
        .meta(format!("slope_stderr = {}", fit.slope_stderr));
    for r in &rows {
        let fitted = (fit.intercept + fit.slope * r.gap.ln()).exp();
        table.push(vec![
            json!(r.gap),
            json!(r.moment.mean),
            json!(r.moment.stderr),
            json!(fitted),
        ]);
    }
    out.checks.push(Check::within(
        "slope",
        fit.slope,
        p.slope_target - p.slope_tol,
        p.slope_target + p.slope_tol,
    ));
    out.put("fit", fit_json(&fit));
    out.put("anchor", json!(anchor));
    out.tables.push(table);
    Ok(())
}

fn gaussian_test(x: &[f64]) -> f64 {
    (-x.iter().map(|v| v * v).sum::<f64>()).exp()
}

fn occupation<E: Executor>(
    c: &ExperimentConfig,
    paths: &[PathSample],
    exec: &E,
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.occupation.as_ref().unwrap();
    let d = c.dimension;
    let lo = vec![p.lo; d];
    let hi = vec![p.hi; d];
    let n = paths.len() as f64;

    // Occupation formula under bin refinement.
    let mut res_table = Table::new(
        "occupation_residual",
        &["bins", "mean_residual", "max_residual"],
    )
    .meta("test_fn = exp(-|x|^2)")
    .meta(format!("box = [{}, {}]^{d}", p.lo, p.hi));
    let mut residuals = Vec::new();
    for &bins in &p.residual_bins {
        let per: Vec<f64> = exec
            .map(paths.len(), |i| {
                occupation_histogram(&paths[i], &lo, &hi, bins)
                    .map(|h| occupation_formula_residual(&paths[i], &h, gaussian_test))
            })
            .into_iter()
            .collect::<ocpa_core::Result<_>>()?;
        let m = mean(&per);
        residuals.push(m);
        res_table.push(vec![
            json!(bins),
            json!(m),
            json!(per.iter().copied().fold(0.0, f64::max)),
        ]);
    }
    let finest = *residuals.last().unwrap();
    out.checks
        .push(Check::below("residual_finest", finest, p.residual_tol));
    out.checks.push(Check::flag(
        "residual_decreases",
        residuals.windows(2).all(|w| w[1] < w[0]),
        "strictly decreasing under refinement",
    ));

    // Ensemble-mean occupation density.
    let hists: Vec<_> = exec
        .map(paths.len(), |i| {
            occupation_histogram(&paths[i], &lo, &hi, p.bins)
        })
        .into_iter()
        .collect::<ocpa_core::Result<_>>()?;
    let mut iter = hists.into_iter();
    let mut mean_hist = iter.next().expect("nonempty").scaled(1.0 / n);
    for h in iter {
        mean_hist.accumulate(&h, 1.0 / n);
    }

    // Histogram against Fourier inversion.
    let points: Vec<Vec<f64>> = p.points.clone().unwrap_or_else(|| {
        (0..9)
            .map(|k| {
                let mut x = vec![0.0; d];
                x[0] = -0.8 + 0.2 * k as f64;
                x
            })
            .collect()
    });
    let agree = histogram_fourier_agreement(
        paths,
        &lo,
        &hi,
        p.bins,
        &points,
        p.cutoff,
        p.freq_step,
        exec,
    )?;
    let mut columns: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
    columns.extend(["histogram", "inversion", "inversion_im"].map(String::from));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut lt_table = Table::new("local_time", &cols)
        .meta(format!("bins = {}", p.bins))
        .meta(format!("cutoff = {}", p.cutoff))
        .meta(format!("freq_step = {}", p.freq_step))
        .meta(format!("relative_gap = {}", agree.relative_gap));
    let mut imag_ok = true;
    for (j, x) in points.iter().enumerate() {
        let mut row: Vec<Value> = x.iter().map(|v| json!(v)).collect();
        row.extend([
            json!(agree.histogram[j]),
            json!(agree.inversion[j]),
            json!(agree.inversion_im[j]),
        ]);
        lt_table.push(row);
        imag_ok &= agree.inversion_im[j].abs() <= p.imag_tol * agree.inversion[j].abs() + 1e-6;
    }
    out.checks.push(Check::below(
        "histogram_inversion_gap",
        agree.relative_gap,
        p.agreement_tol,
    ));
    out.checks.push(Check::flag(
        "imaginary_residue",
        imag_ok,
        &format!("|Im| <= {} |Re| + 1e-6", p.imag_tol),
    ));

    let mut far = vec![0.0; d];
    far[0] = p.far_point;
    let far_values: Vec<f64> = exec
        .map(paths.len(), |i| {
            local_time_fourier_inversion_many(
                &paths[i],
                std::slice::from_ref(&far),
                p.cutoff,
                p.freq_step,
            )
            .map(|v| v[0].re)
        })
        .into_iter()
        .collect::<ocpa_core::Result<_>>()?;
    let far_mean = mean(&far_values);
    let horizon = paths[0].horizon();
    out.checks.push(Check::below(
        "far_point",
        far_mean.abs() / horizon,
        p.far_tol,
    ));

    out.put(
        "occupation",
        json!({
            "residuals": residuals,
            "residual_bins": p.residual_bins,
            "points": points,
            "histogram": agree.histogram,
            "inversion": agree.inversion,
            "inversion_im": agree.inversion_im,
            "relative_gap": agree.relative_gap,
            "far_point": far,
            "far_estimate": far_mean,
            "mean_out_of_box": mean_hist.out_of_box(),
        }),
    );
    out.sidecars.push((
        "occupation.json".into(),
        crate::io::occupation_sidecar(&mean_hist),
    ));
    out.tables.push(res_table);
    out.tables.push(lt_table);
    out.tables.push(occupation_table(&mean_hist));
    Ok(())
}

fn occupation_table(h: &ocpa_core::occupation::OccupationDensity) -> Table {
    let d = h.dim();
    let mut columns: Vec<String> = (1..=d).map(|k| format!("bin_center_{k}")).collect();
    columns.push("density".into());
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut t = Table::new("occupation", &cols)
        .meta(format!("horizon = {}", h.horizon()))
        .meta(format!("out_of_box_mass = {}", h.out_of_box()));
    let mut centre = vec![0.0; d];
    for (i, v) in h.values().iter().enumerate() {
        h.bin_center(i, &mut centre);
        let mut row: Vec<Value> = centre.iter().map(|c| json!(c)).collect();
        row.push(json!(v));
        t.push(row);
    }
    t
}

fn sobolev<E: Executor>(
    c: &ExperimentConfig,
    paths: &[PathSample],
    exec: &E,
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.sobolev.as_ref().unwrap();
    let profile = sobolev_ensemble_profile(paths, &p.alphas, &p.radii, p.freq_step, exec)?;
    let mut table = Table::new("sobolev", &["alpha", "radius", "energy", "stderr"])
        .meta(format!("freq_step = {}", p.freq_step))
        .meta(format!("replications = {}", paths.len()));
    let mut energies = Vec::new();
    for (a, alpha) in p.alphas.iter().enumerate() {
        let row: Vec<f64> = profile[a].iter().map(|e| e.mean).collect();
        for (r, radius) in p.radii.iter().enumerate() {
            table.push(vec![
                json!(alpha),
                json!(radius),
                json!(profile[a][r].mean),
                json!(profile[a][r].stderr),
            ]);
        }
        energies.push(json!({ "alpha": alpha, "energy": row, "stderr": profile[a].iter().map(|e| e.stderr).collect::<Vec<_>>() }));
    }
    let idx = |alpha: f64| {
        p.alphas
            .iter()
            .position(|&a| a == alpha)
            .expect("validated")
    };
    let ridx = |r: f64| p.radii.iter().position(|&x| x == r).expect("validated");
    let stable = &profile[idx(p.stable_alpha)];
    let (e0, e1) = (
        stable[ridx(p.stable_radii[0])].mean,
        stable[ridx(p.stable_radii[1])].mean,
    );
    let change = (e1 - e0).abs() / e0.abs();
    out.checks.push(Check::below(
        &format!("alpha{}_stabilizes", p.stable_alpha),
        change,
        p.stable_tol,
    ));
    let div = &profile[idx(p.divergent_alpha)];
    let growth: Vec<f64> = div
        .windows(2)
        .map(|w| w[1].mean / w[0].mean - 1.0)
        .collect();
    let min_growth = growth.iter().copied().fold(f64::INFINITY, f64::min);
    out.checks.push(Check::above(
        &format!("alpha{}_diverges", p.divergent_alpha),
        min_growth,
        p.divergent_min_growth,
    ));
    out.put(
        "sobolev",
        json!({
            "radii": p.radii,
            "energies": energies,
            "stable_change": change,
            "divergent_growth": growth,
        }),
    );
    out.tables.push(table);
    Ok(())
}

fn holder_path<E: Executor>(
    c: &ExperimentConfig,
    paths: &[PathSample],
    exec: &E,
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.holder_path.as_ref().unwrap();
    let fit = holder_exponent_path(paths, &p.gaps, exec)?;
    out.checks
        .push(Check::within("slope", fit.slope, p.band[0], p.band[1]));
    out.put("fit", fit_json(&fit));
    out.put("reference_slope", json!(0.25));
    out.tables
        .push(fit_table("holder_path", "gap", &fit).meta("reference_slope = 0.25"));
    Ok(())
}

fn holder_lt<E: Executor>(
    c: &ExperimentConfig,
    paths: &[PathSample],
    exec: &E,
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.holder_lt.as_ref().unwrap();
    let d = c.dimension;
    let fit = holder_exponent_local_time(
        paths,
        &vec![p.lo; d],
        &vec![p.hi; d],
        p.bins,
        p.anchor,
        &p.gaps,
        exec,
    )?;
    let reference = 1.0 - d as f64 / 4.0;
    out.checks
        .push(Check::within("slope", fit.slope, p.band[0], p.band[1]));
    out.put("fit", fit_json(&fit));
    out.put("reference_slope", json!(reference));
    out.tables.push(
        fit_table("holder_lt", "gap", &fit)
            .meta(format!("reference_slope = {reference}"))
            .meta(format!("anchor = {}", p.anchor)),
    );
    Ok(())
}

fn smallball<E: Executor>(
    c: &ExperimentConfig,
    grid: &SpaceTimeGrid,
    paths: &[PathSample],
    exec: &E,
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.smallball.as_ref().unwrap();
    let t = p.t.unwrap_or(grid.horizon());
    let table = small_ball_criterion(paths, &p.epsilons, t, exec)?;
    let mut csv = Table::new(
        "smallball",
        &["epsilon", "criterion", "stderr", "probability"],
    )
    .meta(format!("t = {t}"))
    .meta(format!("dimension = {}", c.dimension))
    .meta(format!("excluded_measure = {}", table.excluded_measure));
    for i in 0..table.epsilons.len() {
        csv.push(vec![
            json!(table.epsilons[i]),
            json!(table.criterion_values[i]),
            json!(table.stderrs[i]),
            json!(table.probabilities[i]),
        ]);
    }
    let vals = &table.criterion_values;
    let ratios: Vec<f64> = vals.windows(2).map(|w| w[1] / w[0]).collect();
    if c.dimension <= MAX_LOCAL_TIME_DIM {
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        out.checks
            .push(Check::below("criterion_ratio", max / min, p.max_ratio));
    } else {
        let least = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        out.checks
            .push(Check::above("criterion_growth", least, p.min_growth));
    }
    out.put(
        "smallball",
        json!({
            "epsilons": table.epsilons,
            "criterion": table.criterion_values,
            "stderr": table.stderrs,
            "probabilities": table.probabilities,
            "successive_ratios": ratios,
            "excluded_measure": table.excluded_measure,
        }),
    );
    out.tables.push(csv);
    Ok(())
}

fn charfn<E: Executor>(
    c: &ExperimentConfig,
    grid: &SpaceTimeGrid,
    paths: &[PathSample],
    exec: &E,
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.charfn.as_ref().unwrap();
    let d = c.dimension;
    let tp = &p.time_points;
    let m = tp.len() - 1;
    let v_grid: Vec<Vec<Vec<f64>>> = p
        .scales
        .iter()
        .map(|&s| {
            (0..m)
                .map(|j| {
                    let mut v = vec![0.0; d];
                    v[0] = s / (tp[j + 1] - tp[j]).powf(0.25);
                    v
                })
                .collect()
        })
        .collect();
    let rows = charfn_decay_probe(paths, tp, &v_grid, exec)?;
    // Exact Gaussian modulus for a single increment of the linear system.
    let exact_var = if c.coefficients == "linear" && m == 1 {
        Some(linear_increment_variance(
            tp[0],
            tp[1],
            grid.probe_x(),
            &KernelConfig::default(),
        )?)
    } else {
        None
    };
    let mut table = Table::new("charfn", &["scale", "v", "modulus", "stderr", "exact"])
        .meta(format!("time_points = {tp:?}"))
        .meta(format!("coefficients = {}", c.coefficients));
    let mut worst_z: f64 = 0.0;
    let mut decay_ok = true;
    let mut decay_worst: f64 = 0.0;
    let mut exact_all = Vec::new();
    for (row, &s) in rows.iter().zip(&p.scales) {
        let v = row.v[0][0];
        let exact = exact_var.map(|var| (-0.5 * v * v * var).exp());
        if let Some(e) = exact {
            let z = (row.modulus - e).abs() / row.stderr.max(f64::MIN_POSITIVE);
            // At v = 0 both sides are exactly 1 with zero spread.
            let z = if row.modulus == e { 0.0 } else { z };
            worst_z = worst_z.max(z);
            exact_all.push(e);
        }
        if row
            .scales
            .iter()
            .all(|&sc| sc >= p.decay_scale * (1.0 - 1e-12))
        {
            decay_worst = decay_worst.max(row.modulus);
            decay_ok &= row.modulus < p.decay_bound;
        }
        table.push(vec![
            json!(s),
            json!(v),
            json!(row.modulus),
            json!(row.stderr),
            json!(exact),
        ]);
    }
    if exact_var.is_some() {
        out.checks
            .push(Check::below("exact_modulus_z", worst_z, p.k_sigma));
    }
    if p.scales.iter().any(|&s| s >= p.decay_scale) {
        out.checks.push(Check {
            name: format!("modulus_at_scale_{}", p.decay_scale),
            value: decay_worst,
            band: format!("< {}", p.decay_bound),
            pass: decay_ok,
        });
    }
    out.put(
        "charfn",
        json!({
            "scales": p.scales,
            "modulus": rows.iter().map(|r| r.modulus).collect::<Vec<_>>(),
            "stderr": rows.iter().map(|r| r.stderr).collect::<Vec<_>>(),
            "exact": exact_all,
            "exact_variance": exact_var,
            "max_z": exact_var.map(|_| worst_z),
        }),
    );
    out.tables.push(table);
    Ok(())
}

fn density<E: Executor>(
    c: &ExperimentConfig,
    grid: &SpaceTimeGrid,
    paths: &[PathSample],
    exec: &E,
    out: &mut Outcome,
) -> Result<(), RunError> {
    let p = c.density.as_ref().unwrap();
    let d = c.dimension;
    let pairs: Vec<(f64, f64)> = p.pairs.iter().map(|[s, t]| (*s, *t)).collect();
    let points = symmetric_lattice(d, p.extent, p.points_per_axis);
    let est = increment_density_kde(paths, &pairs, p.bandwidth, &points, exec)?;

    let mut columns: Vec<String> = (1..=d).map(|k| format!("z_{k}")).collect();
    columns.extend(["pooled", "pooled_stderr"].map(String::from));
    for k in 0..pairs.len() {
        columns.push(format!("density_{k}"));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("density", &cols)
        .meta(format!("pairs = {:?}", p.pairs))
        .meta(format!(
            "bandwidths = {:?}",
            est.tables.iter().map(|t| t.bandwidth).collect::<Vec<_>>()
        ))
        .meta(format!("lower_bound = {}", est.lower_bound));
    for i in 0..points.len() / d {
        let mut row: Vec<Value> = est.point(i).iter().map(|v| json!(v)).collect();
        row.push(json!(est.pooled[i]));
        row.push(json!(est.pooled_stderr[i]));
        for t in &est.tables {
            row.push(json!(t.density[i]));
        }
        table.push(row);
    }

    let mut results = json!({
        "pairs": p.pairs,
        "bandwidths": est.tables.iter().map(|t| t.bandwidth).collect::<Vec<_>>(),
        "collapse": est.collapse,
        "lower_bound": est.lower_bound,
    });
    if c.coefficients == "linear" {
        let kcfg = KernelConfig::default();
        let vars: Vec<f64> = pairs
            .iter()
            .map(|&(s, t)| {
                linear_increment_variance(s, t, grid.probe_x(), &kcfg).map(|v| v / (t - s).sqrt())
            })
            .collect::<ocpa_core::Result<_>>()?;
        let dist = est.oracle_distance(2.0, |k, z| {
            let g = GaussianComparator::new(vars[k]);
            z.iter().map(|&zi| g.density(zi)).product()
        });
        out.checks
            .push(Check::below("oracle_distance", dist, p.collapse_tol));
        results["oracle_distance"] = json!(dist);
        results["rescaled_variances"] = json!(vars);
    }
    out.checks.push(Check::above(
        "lower_bound",
        est.lower_bound,
        p.lower_bound_min,
    ));
    if c.coefficients == "even-cos" {
        let defect = symmetry_defect(&est.pooled, &est.pooled_stderr);
        out.checks
            .push(Check::below("symmetry_defect", defect, p.symmetry_k));
        results["symmetry_defect"] = json!(defect);
    }
    out.put("density", results);
    out.tables.push(table);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ocpa_core::exec::Sequential;

    fn plan(text: &str) -> Result<Plan, ConfigError> {
        validate(&LoadedConfig::parse(text)?)
    }

    #[test]
    fn unstable_grid_is_rejected_with_line() {
        let text = "experiment = \"simulate\"\n[grid]\nn-space = 32\nn-time = 100\nhorizon = 1.0\n";
        let err = plan(text).unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.message.contains("dx^2/2"), "{err}");
    }

    #[test]
    fn oracle_requires_linear() {
        let text = "experiment = \"simulate\"\ncoefficients = \"trig\"\nsource = \"oracle\"\n[grid]\nn-space = 32\ncourant = 0.25\nhorizon = 0.1\n";
        assert_eq!(plan(text).unwrap_err().line, Some(3));
    }

    #[test]
    fn local_time_dimension_limit() {
        let text = "experiment = \"holder-lt\"\ndimension = 4\n[grid]\nn-space = 16\ncourant = 0.25\nhorizon = 1.0\n";
        assert_eq!(plan(text).unwrap_err().line, Some(2));
    }

    #[test]
    fn ehm_defaults_pass() {
        let p = plan("experiment = \"ehm-check\"\n").unwrap();
        let out = run_plan(&p, &Sequential).unwrap();
        assert_eq!(out.checks.len(), 3);
        assert!(out.all_pass());
    }

    #[test]
    fn small_simulation_runs() {
        let text = "experiment = \"simulate\"\nreplications = 4\ncoefficients = \"trig\"\ndimension = 2\n\
                    [grid]\nn-space = 16\ncourant = 0.25\nhorizon = 0.05\n[simulate]\ndump = \"csv\"\ndump-count = 2\n";
        let p = plan(text).unwrap();
        let out = run_plan(&p, &Sequential).unwrap();
        assert_eq!(out.dumps.len(), 2);
        assert_eq!(out.tables[0].rows.len(), 8);
        assert_eq!(out.tables[0].columns.len(), 5);
    }
}
