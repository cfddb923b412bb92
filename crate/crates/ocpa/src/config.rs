//! Declarative experiment configuration (TOML).
//!
//! Unknown keys are rejected everywhere. Each experiment reads its own
//! section, named after the experiment; sections for other experiments are
//! an error. Missing keys take the defaults below.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    KernelCheck,
    EhmCheck,
    Simulate,
    OracleCompare,
    Moments,
    Occupation,
    Sobolev,
    HolderPath,
    HolderLt,
    Smallball,
    Charfn,
    Density,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        Self::KernelCheck,
        Self::EhmCheck,
        Self::Simulate,
        Self::OracleCompare,
        Self::Moments,
        Self::Occupation,
        Self::Sobolev,
        Self::HolderPath,
        Self::HolderLt,
        Self::Smallball,
        Self::Charfn,
        Self::Density,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::KernelCheck => "kernel-check",
            Self::EhmCheck => "ehm-check",
            Self::Simulate => "simulate",
            Self::OracleCompare => "oracle-compare",
            Self::Moments => "moments",
            Self::Occupation => "occupation",
            Self::Sobolev => "sobolev",
            Self::HolderPath => "holder-path",
            Self::HolderLt => "holder-lt",
            Self::Smallball => "smallball",
            Self::Charfn => "charfn",
            Self::Density => "density",
        }
    }

    pub fn needs_paths(self) -> bool {
        !matches!(self, Self::KernelCheck | Self::EhmCheck)
    }
}

/// Where probe paths come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathSource {
    /// Finite-difference solver for the configured coefficient set.
    #[default]
    Solver,
    /// Exact spectral simulation (additive linear system only).
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridConfig {
    pub n_space: usize,
    /// Exactly one of `n-time` and `courant` (= dt / dx^2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_time: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub courant: Option<f64>,
    pub horizon: f64,
    #[serde(default = "half")]
    pub probe_x: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default = "linear")]
    pub coefficients: String,
    #[serde(default)]
    pub source: PathSource,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Oracle mode count; defaults to the smallest adequate power of two >= 256.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_check: Option<KernelCheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ehm_check: Option<EhmCheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_compare: Option<OracleCompareParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<OccupationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev: Option<SobolevParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_path: Option<HolderPathParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_lt: Option<HolderLtParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smallball: Option<SmallballParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charfn: Option<CharfnParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityParams>,
}

fn one() -> usize {
    1
}
fn linear() -> String {
    "linear".to_owned()
}
fn default_replications() -> usize {
    100
}

fn dyadic(k0: i32, k1: i32) -> Vec<f64> {
    (k0..=k1).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct KernelCheckParams {
    pub truncation: usize,
    pub min_t: f64,
}

impl Default for KernelCheckParams {
    fn default() -> Self {
        Self {
            truncation: 600,
            min_t: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EhmCase {
    pub b: Vec<f64>,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct EhmCheckParams {
    pub cases: Vec<EhmCase>,
    pub tolerance: f64,
}

impl Default for EhmCheckParams {
    fn default() -> Self {
        Self {
            cases: ocpa_core::analysis::ehm::shipped_cases()
                .into_iter()
                .map(|(b, h)| EhmCase { b, h })
                .collect(),
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DumpFormat {
    #[default]
    None,
    Binary,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct SimulateParams {
    pub dump: DumpFormat,
    /// Number of replications written when dumping.
    pub dump_count: usize,
    /// Times at which ensemble statistics are tabulated (default: horizon).
    pub probe_times: Vec<f64>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            dump: DumpFormat::None,
            dump_count: 1,
            probe_times: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct OracleCompareParams {
    pub probe_times: Vec<f64>,
    pub rel_tol: f64,
    pub k_sigma: f64,
    /// Spatial resolutions for the exact discretization-bias table.
    pub refinement: Vec<usize>,
}

impl Default for OracleCompareParams {
    fn default() -> Self {
        Self {
            probe_times: vec![0.05, 0.1, 0.15, 0.2, 0.25],
            rel_tol: 0.05,
            k_sigma: 4.0,
            refinement: vec![32, 64, 128],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct MomentsParams {
    pub gaps: Vec<f64>,
    pub p: u32,
    /// Defaults to half the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<f64>,
    pub slope_target: f64,
    pub slope_tol: f64,
}

impl Default for MomentsParams {
    fn default() -> Self {
        Self {
            gaps: dyadic(3, 7),
            p: 2,
            anchor: None,
            slope_target: 0.5,
            slope_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct OccupationParams {
    /// Bin counts for the occupation-formula refinement study.
    pub residual_bins: Vec<usize>,
    pub residual_tol: f64,
    /// Histogram box `[lo, hi]^d` and bins for local-time comparisons.
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    /// Comparison points; default: nine points on the first axis, -0.8..0.8.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    pub cutoff: f64,
    pub freq_step: f64,
    pub agreement_tol: f64,
    /// Distance of a point far outside the range of every path, along the
    /// first axis; must lie below half the inversion period `pi / freq_step`.
    pub far_point: f64,
    /// Far-point estimate must be below this fraction of the horizon.
    pub far_tol: f64,
    /// Imaginary residue bound `imag_tol * |Re| + 1e-6`.
    pub imag_tol: f64,
}

impl Default for OccupationParams {
    fn default() -> Self {
        Self {
            residual_bins: vec![64, 128, 256],
            residual_tol: 0.02,
            lo: -4.0,
            hi: 4.0,
            bins: 160,
            points: None,
            cutoff: 40.0,
            freq_step: 0.25,
            agreement_tol: 0.07,
            far_point: 8.0,
            far_tol: 0.05,
            imag_tol: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct SobolevParams {
    pub alphas: Vec<f64>,
    pub radii: Vec<f64>,
    pub freq_step: f64,
    /// `alpha` expected to stabilize between `stable_radii`.
    pub stable_alpha: f64,
    pub stable_radii: [f64; 2],
    pub stable_tol: f64,
    /// `alpha` expected to grow by more than `divergent_min_growth` at
    /// every consecutive radius.
    pub divergent_alpha: f64,
    pub divergent_min_growth: f64,
}

impl Default for SobolevParams {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 0.5, 1.0, 1.6],
            radii: vec![20.0, 40.0, 80.0, 160.0],
            freq_step: 0.25,
            stable_alpha: 1.0,
            stable_radii: [40.0, 80.0],
            stable_tol: 0.05,
            divergent_alpha: 1.6,
            divergent_min_growth: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct HolderPathParams {
    pub gaps: Vec<f64>,
    pub band: [f64; 2],
}

impl Default for HolderPathParams {
    fn default() -> Self {
        Self {
            gaps: dyadic(4, 10),
            band: [0.18, 0.30],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct HolderLtParams {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub anchor: f64,
    pub gaps: Vec<f64>,
    pub band: [f64; 2],
}

impl Default for HolderLtParams {
    fn default() -> Self {
        Self {
            lo: -4.0,
            hi: 4.0,
            bins: 160,
            anchor: 0.25,
            gaps: dyadic(2, 7),
            band: [0.60, 0.85],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct SmallballParams {
    pub epsilons: Vec<f64>,
    /// Defaults to the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Band for `d <= 3`: max/min criterion ratio.
    pub max_ratio: f64,
    /// Band for `d >= 4`: minimum growth per halving of epsilon.
    pub min_growth: f64,
}

impl Default for SmallballParams {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            t: None,
            max_ratio: 3.0,
            min_growth: 1.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct CharfnParams {
    /// `m + 1` increasing times defining `m` increments.
    pub time_points: Vec<f64>,
    /// Dimensionless scales `|v| h^{1/4}`, applied along the first axis of
    /// every increment.
    pub scales: Vec<f64>,
    /// Band against the exact Gaussian modulus (linear, d = 1, m = 1).
    pub k_sigma: f64,
    pub decay_scale: f64,
    pub decay_bound: f64,
}

impl Default for CharfnParams {
    fn default() -> Self {
        Self {
            time_points: vec![0.125, 0.140625],
            scales: vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0],
            k_sigma: 3.0,
            decay_scale: 8.0,
            decay_bound: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct DensityParams {
    pub pairs: Vec<[f64; 2]>,
    pub extent: f64,
    pub points_per_axis: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Band for the linear case against the exact Gaussian densities on |z| <= 2.
    pub collapse_tol: f64,
    pub lower_bound_min: f64,
    /// Symmetry band (in standard errors) for the `even-cos` set.
    pub symmetry_k: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            pairs: vec![[0.2, 0.21], [0.2, 0.24], [0.2, 0.36]],
            extent: 3.0,
            points_per_axis: 61,
            bandwidth: None,
            collapse_tol: 0.1,
            lower_bound_min: 0.05,
            symmetry_k: 4.0,
        }
    }
}

/// Configuration error with an optional 1-based line number.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

/// Parsed configuration plus the source text, for locating keys.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    source: String,
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            ConfigError {
                line,
                message: e.message().trim().to_owned(),
            }
        })?;
        let loaded = Self {
            config,
            source: text.to_owned(),
        };
        loaded.check_sections()?;
        Ok(loaded)
    }

    pub fn from_config(config: ExperimentConfig) -> Self {
        let source = toml::to_string(&config).unwrap_or_default();
        Self { config, source }
    }

    /// Line of `key` inside `[section]` (or at top level for `None`).
    pub fn line_of(&self, section: Option<&str>, key: &str) -> Option<usize> {
        let mut current: Option<String> = None;
        for (i, raw) in self.source.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.trim().to_owned());
                continue;
            }
            if current.as_deref() == section {
                if let Some((k, _)) = line.split_once('=') {
                    if k.trim() == key {
                        return Some(i + 1);
                    }
                }
            }
        }
        section.and_then(|s| {
            self.source
                .lines()
                .position(|l| l.trim() == format!("[{s}]"))
                .map(|i| i + 1)
        })
    }

    pub fn error_at(
        &self,
        section: Option<&str>,
        key: &str,
        message: impl Into<String>,
    ) -> ConfigError {
        ConfigError {
            line: self.line_of(section, key),
            message: message.into(),
        }
    }

    fn check_sections(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        let present = [
            (ExperimentKind::KernelCheck, c.kernel_check.is_some()),
            (ExperimentKind::EhmCheck, c.ehm_check.is_some()),
            (ExperimentKind::Simulate, c.simulate.is_some()),
            (ExperimentKind::OracleCompare, c.oracle_compare.is_some()),
            (ExperimentKind::Moments, c.moments.is_some()),
            (ExperimentKind::Occupation, c.occupation.is_some()),
            (ExperimentKind::Sobolev, c.sobolev.is_some()),
            (ExperimentKind::HolderPath, c.holder_path.is_some()),
            (ExperimentKind::HolderLt, c.holder_lt.is_some()),
            (ExperimentKind::Smallball, c.smallball.is_some()),
            (ExperimentKind::Charfn, c.charfn.is_some()),
            (ExperimentKind::Density, c.density.is_some()),
        ];
        for (kind, is_present) in present {
            if is_present && kind != c.experiment {
                return Err(ConfigError {
                    line: self.line_of(Some(kind.name()), ""),
                    message: format!(
                        "section [{}] does not apply to experiment `{}`",
                        kind.name(),
                        c.experiment.name()
                    ),
                });
            }
        }
        if c.experiment.needs_paths() && c.grid.is_none() {
            return Err(ConfigError::new(format!(
                "experiment `{}` needs a [grid] section",
                c.experiment.name()
            )));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Copy with the experiment's own section filled in with defaults, as
    /// recorded in `summary.json`.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        match c.experiment {
            ExperimentKind::KernelCheck => {
                c.kernel_check.get_or_insert_with(Default::default);
            }
            ExperimentKind::EhmCheck => {
                c.ehm_check.get_or_insert_with(Default::default);
            }
            ExperimentKind::Simulate => {
                c.simulate.get_or_insert_with(Default::default);
            }
            ExperimentKind::OracleCompare => {
                c.oracle_compare.get_or_insert_with(Default::default);
            }
            ExperimentKind::Moments => {
                c.moments.get_or_insert_with(Default::default);
            }
            ExperimentKind::Occupation => {
                c.occupation.get_or_insert_with(Default::default);
            }
            ExperimentKind::Sobolev => {
                c.sobolev.get_or_insert_with(Default::default);
            }
            ExperimentKind::HolderPath => {
                c.holder_path.get_or_insert_with(Default::default);
            }
            ExperimentKind::HolderLt => {
                c.holder_lt.get_or_insert_with(Default::default);
            }
            ExperimentKind::Smallball => {
                c.smallball.get_or_insert_with(Default::default);
            }
            ExperimentKind::Charfn => {
                c.charfn.get_or_insert_with(Default::default);
            }
            ExperimentKind::Density => {
                c.density.get_or_insert_with(Default::default);
            }
        }
        c
    }
}
