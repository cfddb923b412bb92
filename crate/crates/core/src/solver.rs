//! Explicit finite-difference solver for
//! `du_k = (u_k'' + b_k(u)) dt + sum_l sigma_kl(u) dW_l` on `[0, 1]`
//! with zero-flux boundaries and zero initial data.
//!
//! Cells are centred at `(j + 1/2) dx`; the Neumann condition is imposed by
//! mirrored ghost cells `u_{-1} = u_0`, `u_n = u_{n-1}`, which makes the
//! discrete mass `sum_j u_j dx` exactly conserved by the diffusion step.
//! A cell receives `sigma(u_j) xi_j / dx`, where `xi_j ~ N(0, dt dx)` is the
//! white-noise mass of the cell over the step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::coeffs::{Coefficients, MAX_DIM};
use crate::exec::Executor;
use crate::noise::{NoiseSlice, NoiseStream, SeedSpec, SpaceTimeGrid};
use crate::path::PathSample;
use crate::rng::{GaussianStream, Namespace};
use crate::stats::{fit_power_law, ExponentFit, MonteCarloEstimate};
use crate::{Error, Result};

/// Full spatial state of the scheme, node-major (`values[j * d + k]`).
#[derive(Clone, Debug)]
pub struct FieldState {
    n_space: usize,
    dim: usize,
    dx: f64,
    dt: f64,
    values: Vec<f64>,
    scratch: Vec<f64>,
}

impl FieldState {
    pub fn zeros(grid: &SpaceTimeGrid, dim: usize) -> Self {
        let len = grid.n_space() * dim;
        Self {
            n_space: grid.n_space(),
            dim,
            dx: grid.dx(),
            dt: grid.dt(),
            values: vec![0.0; len],
            scratch: vec![0.0; len],
        }
    }

    /// State initialised from `f(x, out)` at the cell centres.
    pub fn from_fn<F: FnMut(f64, &mut [f64])>(grid: &SpaceTimeGrid, dim: usize, mut f: F) -> Self {
        let mut s = Self::zeros(grid, dim);
        for (j, node) in s.values.chunks_exact_mut(dim).enumerate() {
            f(grid.node_x(j), node);
        }
        s
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn node(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// `sum_j u_j dx` for each component.
    pub fn mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for node in self.values.chunks_exact(self.dim) {
            for (acc, v) in m.iter_mut().zip(node) {
                *acc += v * self.dx;
            }
        }
        m
    }

    /// One explicit Euler step driven by `noise`. Returns `false` if any
    /// new value is non-finite.
    pub fn step<C: Coefficients + ?Sized>(&mut self, coeffs: &C, noise: &NoiseSlice) -> bool {
        let (n, d) = (self.n_space, self.dim);
        let c = self.dt / (self.dx * self.dx);
        let inv_dx = 1.0 / self.dx;
        let drift = !coeffs.driftless();
        let xi = noise.values();
        let mut b = [0.0; MAX_DIM];
        let mut kick = [0.0; MAX_DIM];
        let mut finite = true;
        for j in 0..n {
            let left = if j == 0 { 0 } else { j - 1 };
            let right = if j + 1 == n { n - 1 } else { j + 1 };
            let u = &self.values[j * d..(j + 1) * d];
            coeffs.apply_dispersion(u, &xi[j * d..(j + 1) * d], &mut kick[..d]);
            if drift {
                coeffs.drift(u, &mut b[..d]);
            }
            for k in 0..d {
                let lap = self.values[left * d + k] - 2.0 * u[k] + self.values[right * d + k];
                let v = u[k] + c * lap + self.dt * b[k] + kick[k] * inv_dx;
                finite &= v.is_finite();
                self.scratch[j * d + k] = v;
            }
        }
        core::mem::swap(&mut self.values, &mut self.scratch);
        finite
    }
}

/// Probe trajectory of the nonlinear system for one replication.
pub fn simulate_path<C: Coefficients + ?Sized>(
    coeffs: &C,
    grid: &SpaceTimeGrid,
    seed: SeedSpec,
) -> Result<PathSample> {
    grid.check_explicit_stability()?;
    let d = coeffs.dim();
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dimension {d} outside 1..={MAX_DIM}"
        )));
    }
    let mut field = FieldState::zeros(grid, d);
    let mut noise = NoiseSlice::zeros(grid.n_space(), d);
    let mut stream = NoiseStream::new(grid, seed);
    let probe = grid.probe_index();
    let mut states = vec![0.0; (grid.n_time() + 1) * d];
    for i in 1..=grid.n_time() {
        stream.next_into(&mut noise);
        if !field.step(coeffs, &noise) {
            return Err(Error::BlowUp {
                step: i,
                replication: seed.replication,
            });
        }
        states[i * d..(i + 1) * d].copy_from_slice(field.node(probe));
    }
    PathSample::new(d, grid.dt(), states, Some(seed), coeffs.tag())
}

/// Minimum of `|sigma(x) z| / |z|` over `n_samples` random pairs, with
/// `x` uniform in `[-4 pi, 4 pi]^d` and `z` an isotropic Gaussian direction.
/// Fails if the minimum falls below the declared constant (less `1e-12`).
pub fn check_ellipticity<C: Coefficients + ?Sized>(
    coeffs: &C,
    n_samples: usize,
    seed: SeedSpec,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    let d = coeffs.dim();
    let rho = coeffs.ellipticity();
    let mut stream = GaussianStream::new(seed, Namespace::CoefficientCheck);
    let mut min = f64::INFINITY;
    let (mut x, mut z, mut sz) = ([0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM]);
    for _ in 0..n_samples {
        for v in x[..d].iter_mut() {
            *v = 4.0 * PI * (2.0 * stream.uniform() - 1.0);
        }
        stream.fill(&mut z[..d]);
        coeffs.apply_dispersion(&x[..d], &z[..d], &mut sz[..d]);
        let ratio = norm(&sz[..d]) / norm(&z[..d]);
        if ratio < rho - 1e-12 {
            let zn = norm(&z[..d]);
            return Err(Error::NotElliptic {
                tag: coeffs.tag().into(),
                x: x[..d].to_vec(),
                z: z[..d].iter().map(|v| v / zn).collect(),
                value: ratio,
                rho,
            });
        }
        min = min.min(ratio);
    }
    Ok(min)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Spot-checks the declared bound and ellipticity constant.
pub fn validate_coefficients<C: Coefficients + ?Sized>(
    coeffs: &C,
    n_samples: usize,
    seed: SeedSpec,
) -> Result<()> {
    check_ellipticity(coeffs, n_samples, seed)?;
    let d = coeffs.dim();
    let bound = coeffs.bound();
    let mut stream = GaussianStream::new(
        SeedSpec::new(seed.base_seed, seed.replication.wrapping_add(1)),
        Namespace::CoefficientCheck,
    );
    let mut x = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    let mut m = [0.0; MAX_DIM * MAX_DIM];
    for _ in 0..n_samples {
        for v in x[..d].iter_mut() {
            *v = 4.0 * PI * (2.0 * stream.uniform() - 1.0);
        }
        coeffs.drift(&x[..d], &mut b[..d]);
        coeffs.dispersion(&x[..d], &mut m[..d * d]);
        let worst = norm(&b[..d]).max(m[..d * d].iter().fold(0.0, |a: f64, v| a.max(v.abs())));
        if worst > bound * (1.0 + 1e-12) {
            return Err(Error::BoundExceeded {
                tag: coeffs.tag().into(),
                x: x[..d].to_vec(),
                value: worst,
                bound,
            });
        }
    }
    Ok(())
}

/// One row of an increment-moment scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentRow {
    pub gap: f64,
    pub moment: MonteCarloEstimate,
}

/// `E |u(anchor + gap) - u(anchor)|^p` for each gap, estimated over the
/// ensemble. A zero gap yields an exact zero; gaps must otherwise be whole
/// multiples of `dt` and stay within the horizon.
pub fn increment_moments(
    paths: &[PathSample],
    anchor: f64,
    gaps: &[f64],
    p: u32,
) -> Result<Vec<MomentRow>> {
    let first = paths
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    if p == 0 || p % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "moment order {p} must be even and positive"
        )));
    }
    let start = if anchor == 0.0 {
        0
    } else {
        first.steps_for(anchor)?
    };
    let mut rows = Vec::with_capacity(gaps.len());
    for &gap in gaps {
        if gap == 0.0 {
            rows.push(MomentRow {
                gap,
                moment: MonteCarloEstimate {
                    mean: 0.0,
                    stderr: 0.0,
                    replications: paths.len(),
                },
            });
            continue;
        }
        if !(gap >= first.dt() * (1.0 - 1e-9)) {
            return Err(Error::Domain(format!(
                "gap {gap:e} is below the time step {:e}",
                first.dt()
            )));
        }
        let lag = first.steps_for(gap)?;
        if start + lag > first.n_time() {
            return Err(Error::OutOfRange {
                what: "time step",
                index: start + lag,
                limit: first.n_time(),
            });
        }
        let values: Vec<f64> = paths
            .iter()
            .map(|path| {
                let (a, b) = (path.state(start), path.state(start + lag));
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
                sq.powi(p as i32 / 2)
            })
            .collect();
        rows.push(MomentRow {
            gap,
            moment: MonteCarloEstimate::from_samples(&values),
        });
    }
    Ok(rows)
}

/// Increment-moment scan over a fresh solver ensemble anchored at `T / 2`,
/// with a power-law fit over the nonzero gaps (slope estimates `p / 4`).
pub fn moment_increment_scan<C, E>(
    coeffs: &C,
    grid: &SpaceTimeGrid,
    gaps: &[f64],
    p: u32,
    n_reps: usize,
    base_seed: u64,
    exec: &E,
) -> Result<(Vec<MomentRow>, ExponentFit)>
where
    C: Coefficients + ?Sized,
    E: Executor,
{
    let paths = crate::ensemble::solver_ensemble(coeffs, grid, base_seed, n_reps, exec)?;
    let rows = increment_moments(&paths, 0.5 * grid.horizon(), gaps, p)?;
    let fit = fit_moment_rows(&rows)?;
    Ok((rows, fit))
}

pub fn fit_moment_rows(rows: &[MomentRow]) -> Result<ExponentFit> {
    let (scales, levels): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.gap > 0.0)
        .map(|r| (r.gap, r.moment.mean))
        .unzip();
    fit_power_law(&scales, &levels)
}

/// Exact probe variance of the scheme itself for the additive linear
/// system after `step` steps, from the cosine eigenbasis of the discrete
/// Neumann Laplacian. Comparing it with the continuum value isolates the
/// discretization bias from Monte Carlo noise.
pub fn scheme_probe_variance(grid: &SpaceTimeGrid, step: usize) -> f64 {
    let n = grid.n_space();
    let c = grid.dt() / (grid.dx() * grid.dx());
    let p = grid.probe_index() as f64 + 0.5;
    let nf = n as f64;
    let noise = grid.dt() / grid.dx();
    let mut var = noise * step as f64 / nf;
    for k in 1..n {
        let theta = k as f64 * PI / nf;
        let mu = 1.0 - 4.0 * c * (0.5 * theta).sin().powi(2);
        let w = 2.0 / nf * (theta * p).cos().powi(2);
        let mu2 = mu * mu;
        let geometric = if mu2 == 1.0 {
            step as f64
        } else {
            (1.0 - mu2.powi(step as i32)) / (1.0 - mu2)
        };
        var += noise * w * geometric;
    }
    var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientSet;
    use crate::exec::Sequential;
    use crate::kernel::{linear_increment_variance, KernelConfig};

    /// Test-only set with `sigma = 0`, used to isolate the diffusion step.
    struct Noiseless;
    impl Coefficients for Noiseless {
        fn dim(&self) -> usize {
            1
        }
        fn tag(&self) -> &str {
            "noiseless"
        }
        fn bound(&self) -> f64 {
            1.0
        }
        fn ellipticity(&self) -> f64 {
            1.0
        }
        fn drift(&self, _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn dispersion(&self, _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn driftless(&self) -> bool {
            true
        }
    }

    /// Zero first row: deliberately degenerate.
    struct ZeroRow;
    impl Coefficients for ZeroRow {
        fn dim(&self) -> usize {
            2
        }
        fn tag(&self) -> &str {
            "zero-row"
        }
        fn bound(&self) -> f64 {
            1.0
        }
        fn ellipticity(&self) -> f64 {
            0.5
        }
        fn drift(&self, _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn dispersion(&self, _: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn rejects_unstable_grid() {
        let grid = SpaceTimeGrid::new(64, 100, 0.25, 0.5).unwrap();
        let c = CoefficientSet::linear(1).unwrap();
        assert!(matches!(
            simulate_path(&c, &grid, SeedSpec::new(1, 0)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn deterministic_and_zero_start() {
        let grid = SpaceTimeGrid::with_courant(32, 0.25, 0.05, 0.5).unwrap();
        let c = CoefficientSet::by_tag("trig", 2).unwrap();
        let a = simulate_path(&c, &grid, SeedSpec::new(5, 2)).unwrap();
        assert_eq!(a.state(0), &[0.0, 0.0]);
        assert_eq!(a, simulate_path(&c, &grid, SeedSpec::new(5, 2)).unwrap());
    }

    #[test]
    fn linear_in_sigma_for_power_of_two_scale() {
        let grid = SpaceTimeGrid::with_courant(32, 0.25, 0.05, 0.5).unwrap();
        let seed = SeedSpec::new(8, 0);
        let unit = simulate_path(&CoefficientSet::linear(1).unwrap(), &grid, seed).unwrap();
        let rho = 2f64.powi(-10);
        let small = simulate_path(
            &CoefficientSet::scaled_identity(1, rho).unwrap(),
            &grid,
            seed,
        )
        .unwrap();
        for (a, b) in small.states().iter().zip(unit.states()) {
            assert_eq!(a / rho, *b);
        }
        let rho = 1e-3;
        let small = simulate_path(
            &CoefficientSet::scaled_identity(1, rho).unwrap(),
            &grid,
            seed,
        )
        .unwrap();
        let scale = unit.states().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in small.states().iter().zip(unit.states()) {
            assert!((a / rho - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn diffusion_conserves_mass() {
        let grid = SpaceTimeGrid::with_courant(64, 0.5, 1.0, 0.5).unwrap();
        let mut field = FieldState::from_fn(&grid, 1, |x, u| u[0] = (3.0 * x).cos() + x * x);
        let m0 = field.mass()[0];
        let zero = NoiseSlice::zeros(grid.n_space(), 1);
        for _ in 0..grid.n_time() {
            assert!(field.step(&Noiseless, &zero));
        }
        assert!((field.mass()[0] - m0).abs() < 1e-10);
    }

    #[test]
    fn ellipticity_checks() {
        let id = CoefficientSet::linear(3).unwrap();
        assert_eq!(
            check_ellipticity(&id, 1000, SeedSpec::new(1, 0)).unwrap(),
            1.0
        );
        let trig = CoefficientSet::by_tag("trig", 2).unwrap();
        assert!(check_ellipticity(&trig, 1000, SeedSpec::new(1, 0)).unwrap() >= 0.5);
        assert!(matches!(
            check_ellipticity(&ZeroRow, 1000, SeedSpec::new(1, 0)),
            Err(Error::NotElliptic { .. })
        ));
        for tag in CoefficientSet::TAGS {
            for d in 1..=4 {
                let c = CoefficientSet::by_tag(tag, d).unwrap();
                validate_coefficients(&c, 2000, SeedSpec::new(2, 0)).unwrap();
            }
        }
    }

    #[test]
    fn zero_gap_moment_is_exact_zero() {
        let grid = SpaceTimeGrid::with_courant(16, 0.25, 0.25, 0.5).unwrap();
        let c = CoefficientSet::linear(1).unwrap();
        let paths = crate::ensemble::solver_ensemble(&c, &grid, 1, 4, &Sequential).unwrap();
        let rows = increment_moments(&paths, 0.125, &[0.0], 2).unwrap();
        assert_eq!(rows[0].moment.mean, 0.0);
        assert!(increment_moments(&paths, 0.125, &[0.5 * grid.dt()], 2).is_err());
    }

    #[test]
    fn scheme_variance_matches_recursion() {
        // Direct covariance recursion C <- A C A^T + (dt/dx) I for a small grid.
        let grid = SpaceTimeGrid::with_courant(8, 0.25, 0.05, 0.5).unwrap();
        let n = grid.n_space();
        let c = grid.dt() / (grid.dx() * grid.dx());
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            let l = if j == 0 { 0 } else { j - 1 };
            let r = if j + 1 == n { n - 1 } else { j + 1 };
            a[j * n + j] += 1.0 - 2.0 * c;
            a[j * n + l] += c;
            a[j * n + r] += c;
        }
        let mut cov = vec![0.0; n * n];
        let q = grid.dt() / grid.dx();
        for _ in 0..grid.n_time() {
            let mut ac = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    ac[i * n + k] = (0..n).map(|m| a[i * n + m] * cov[m * n + k]).sum();
                }
            }
            for i in 0..n {
                for k in 0..n {
                    cov[i * n + k] = (0..n).map(|m| ac[i * n + m] * a[k * n + m]).sum::<f64>()
                        + if i == k { q } else { 0.0 };
                }
            }
        }
        let p = grid.probe_index();
        let spectral = scheme_probe_variance(&grid, grid.n_time());
        assert!((spectral - cov[p * n + p]).abs() < 1e-12 * spectral);
    }

    #[test]
    fn scheme_bias_shrinks_with_dx() {
        let cfg = KernelConfig::default();
        let bias = |n: usize| {
            let grid = SpaceTimeGrid::with_courant(n, 0.25, 0.25, 0.5).unwrap();
            let exact = linear_increment_variance(0.0, 0.25, grid.probe_x(), &cfg).unwrap();
            (scheme_probe_variance(&grid, grid.n_time()) / exact - 1.0).abs()
        };
        assert!(bias(128) < bias(64) && bias(64) < bias(32));
    }
}
