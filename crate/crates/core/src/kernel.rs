//! Neumann heat kernel on `[0, 1]` for `du/dt = d^2u/dx^2`.
//!
//! Two independent evaluations are provided:
//! - the spectral series `1 + 2 sum_k exp(-k^2 pi^2 t) cos(k pi x) cos(k pi y)`,
//!   which converges quickly for moderate and large `t`;
//! - the image series `sum_n [p_t(x - y - 2n) + p_t(x + y - 2n)]` with the
//!   free kernel `p_t(z) = phi_{2t}(z)`, which converges quickly for small `t`.
//!
//! The module also carries the exact second moments of the additive linear
//! system `du = u'' dt + dW`, written mode by mode.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::quadrature::KernelQuadrature;
use crate::{Error, Result};

/// Crossover between the image series (below) and the spectral series.
const SERIES_CROSSOVER_T: f64 = 0.05;
/// Terms whose exponential factor falls below this are dropped.
const NEGLIGIBLE: f64 = 1e-18;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    truncation: usize,
    min_t: f64,
}

impl KernelConfig {
    /// Validates that the spectral tail beyond `truncation` terms is below
    /// `1e-12` at every admissible time.
    pub fn new(truncation: usize, min_t: f64) -> Result<Self> {
        if truncation == 0 || !(min_t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel truncation {truncation} and min_t {min_t} must be positive"
            )));
        }
        let tail = spectral_tail_bound(truncation, min_t);
        if tail >= 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "{truncation} spectral terms leave a tail of {tail:e} at t = {min_t:e}"
            )));
        }
        Ok(Self { truncation, min_t })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }
    pub fn min_t(&self) -> f64 {
        self.min_t
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= self.min_t) {
            return Err(Error::KernelDomain {
                t,
                min_t: self.min_t,
            });
        }
        Ok(())
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            truncation: 600,
            min_t: 1e-4,
        }
    }
}

/// Upper bound on `2 sum_{k > K} exp(-k^2 pi^2 t)`.
fn spectral_tail_bound(k: usize, t: f64) -> f64 {
    let k1 = (k + 1) as f64;
    let first = (-k1 * k1 * PI * PI * t).exp();
    let ratio = (-(2.0 * k1 + 1.0) * PI * PI * t).exp();
    2.0 * first / (1.0 - ratio)
}

/// Centred Gaussian density `(2 pi v)^{-1/2} exp(-z^2 / (2 v))`.
///
/// With variance `v = t` this is the comparator `phi_t`; the free heat
/// kernel of `d^2/dx^2` at time `t` is the same density with `v = 2t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianComparator {
    pub variance: f64,
}

impl GaussianComparator {
    pub fn new(variance: f64) -> Self {
        Self { variance }
    }
    /// Free heat kernel of `du/dt = u''` at time `t`.
    pub fn heat(t: f64) -> Self {
        Self { variance: 2.0 * t }
    }
    pub fn density(&self, z: f64) -> f64 {
        (-(z * z) / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }
}

/// Spectral series, truncated at `cfg.truncation()` terms or earlier once
/// the exponential factor is negligible.
pub fn spectral_kernel(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> f64 {
    let mut acc = 0.0;
    for k in 1..=cfg.truncation() {
        let kpi = k as f64 * PI;
        let e = (-kpi * kpi * t).exp();
        if e < NEGLIGIBLE {
            break;
        }
        acc += e * ((kpi * x).cos() * (kpi * y).cos());
    }
    1.0 + 2.0 * acc
}

/// Image (reflection) series. Symmetric in `(x, y)` by construction.
pub fn reflection_kernel(t: f64, x: f64, y: f64) -> f64 {
    let p = GaussianComparator::heat(t);
    let diff = (x - y).abs();
    let sum = x + y;
    let mut acc = p.density(diff) + p.density(sum);
    // Images at +-2n; stop once both new terms are negligible.
    let mut n = 1.0;
    loop {
        let shift = 2.0 * n;
        let terms = p.density(diff - shift)
            + p.density(diff + shift)
            + p.density(sum - shift)
            + p.density(sum + shift);
        acc += terms;
        if terms <= NEGLIGIBLE * acc && n > 1.0 {
            break;
        }
        n += 1.0;
    }
    acc
}

/// Which series [`neumann_kernel`] evaluates at time `t`.
pub fn preferred_series(t: f64) -> Series {
    if t < SERIES_CROSSOVER_T {
        Series::Reflection
    } else {
        Series::Spectral
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    Spectral,
    Reflection,
}

/// `G_t(x, y)` for `t >= cfg.min_t()`.
pub fn neumann_kernel(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    cfg.check(t)?;
    check_unit("x", x)?;
    check_unit("y", y)?;
    Ok(match preferred_series(t) {
        Series::Spectral => spectral_kernel(t, x, y, cfg),
        Series::Reflection => reflection_kernel(t, x, y),
    })
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

fn kernel_unchecked(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> f64 {
    match preferred_series(t) {
        Series::Spectral => spectral_kernel(t, x, y, cfg),
        Series::Reflection => reflection_kernel(t, x, y),
    }
}

/// `|int_0^1 G_t(x, y) G_s(y, z) dy - G_{t+s}(x, z)|`.
pub fn semigroup_residual(t: f64, s: f64, x: f64, z: f64, cfg: &KernelConfig) -> Result<f64> {
    cfg.check(t)?;
    cfg.check(s)?;
    check_unit("x", x)?;
    check_unit("z", z)?;
    let quad = KernelQuadrature::default();
    let lhs =
        quad.unit_interval(|y| kernel_unchecked(t, x, y, cfg) * kernel_unchecked(s, y, z, cfg));
    Ok((lhs - kernel_unchecked(t + s, x, z, cfg)).abs())
}

/// `|int_0^1 G_t(x, y) dy - 1|`.
pub fn mass_defect(t: f64, x: f64, cfg: &KernelConfig) -> Result<f64> {
    cfg.check(t)?;
    check_unit("x", x)?;
    let quad = KernelQuadrature::default();
    Ok((quad.unit_interval(|y| kernel_unchecked(t, x, y, cfg)) - 1.0).abs())
}

/// `G_t(x, y) / p_t(x - y)` against the free kernel of the same equation,
/// for `t` in `[min_t, 0.25]`. Every image term is nonnegative, so the ratio
/// is at least one.
pub fn gaussian_bound_ratio(t: f64, x: f64, y: f64, cfg: &KernelConfig) -> Result<f64> {
    cfg.check(t)?;
    if t > 0.25 {
        return Err(Error::Domain(format!(
            "Gaussian comparison is restricted to t <= 0.25, got {t}"
        )));
    }
    let g = neumann_kernel(t, x, y, cfg)?;
    Ok(g / GaussianComparator::heat(t).density(x - y))
}

/// Summary of a scan of the kernel identities over a grid of arguments.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelScanReport {
    pub max_symmetry_defect: f64,
    pub max_mass_defect: f64,
    pub max_semigroup_residual: f64,
    pub max_series_disagreement: f64,
    pub min_bound_ratio: f64,
    pub max_bound_ratio: f64,
}

/// The standard scan: `x, y` on `{0, 0.1, ..., 1}`; kernel times
/// `{1e-4, 1e-3, 0.01, 0.05, 0.25, 1}`; semigroup times `{1e-3, 0.01, 0.1}`
/// pairwise; bound-ratio times `{0.01, 0.05, 0.25}`.
pub fn scan_kernel_identities(cfg: &KernelConfig) -> Result<KernelScanReport> {
    let points: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let times = [1e-4, 1e-3, 0.01, 0.05, 0.25, 1.0];
    let mut report = KernelScanReport {
        max_symmetry_defect: 0.0,
        max_mass_defect: 0.0,
        max_semigroup_residual: 0.0,
        max_series_disagreement: 0.0,
        min_bound_ratio: f64::INFINITY,
        max_bound_ratio: 0.0,
    };
    for &t in times.iter().filter(|&&t| t >= cfg.min_t()) {
        for &x in &points {
            report.max_mass_defect = report.max_mass_defect.max(mass_defect(t, x, cfg)?);
            for &y in &points {
                let a = neumann_kernel(t, x, y, cfg)?;
                let b = neumann_kernel(t, y, x, cfg)?;
                report.max_symmetry_defect = report.max_symmetry_defect.max((a - b).abs());
                let d = (spectral_kernel(t, x, y, cfg) - reflection_kernel(t, x, y)).abs();
                report.max_series_disagreement = report.max_series_disagreement.max(d);
            }
        }
    }
    let semigroup_times = [1e-3, 0.01, 0.1];
    for &t in &semigroup_times {
        for &s in &semigroup_times {
            for &x in &points {
                for &z in &points {
                    let r = semigroup_residual(t, s, x, z, cfg)?;
                    report.max_semigroup_residual = report.max_semigroup_residual.max(r);
                }
            }
        }
    }
    for &t in &[0.01, 0.05, 0.25] {
        for &x in &points {
            for &y in &points {
                let r = gaussian_bound_ratio(t, x, y, cfg)?;
                report.min_bound_ratio = report.min_bound_ratio.min(r);
                report.max_bound_ratio = report.max_bound_ratio.max(r);
            }
        }
    }
    Ok(report)
}

/// `sum_{k >= 1} 2 cos^2(k pi x) / (k pi)^2 = 1/3 - x + x^2` on `[0, 1]`.
fn inverse_eigen_sum(x: f64) -> f64 {
    1.0 / 3.0 - x + x * x
}

/// `Var(u_k(t, x) - u_k(s, x))` for the additive linear system (identity
/// dispersion, zero drift, zero initial data); the same for every
/// coordinate.
///
/// Mode `k` (eigenvalue `lambda = (k pi)^2`, weight `e_k(x)^2 =
/// 2 cos^2(k pi x)`) contributes
/// `e_k(x)^2 (1 - E_h)(2 - E_2s (1 - E_h)) / (2 lambda)` with
/// `E_h = exp(-lambda (t - s))`, `E_2s = exp(-2 lambda s)`; the constant mode
/// contributes `t - s`. Modes beyond the point where both exponentials are
/// negligible are summed in closed form.
pub fn linear_increment_variance(s: f64, t: f64, x: f64, _cfg: &KernelConfig) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("s = {s} must be nonnegative")));
    }
    if t == s {
        return Ok(0.0);
    }
    if !(t > s) {
        return Err(Error::Domain(format!("need t > s, got s = {s}, t = {t}")));
    }
    check_unit("x", x)?;
    let h = t - s;
    // Mode beyond which exp(-lambda * scale) < NEGLIGIBLE for both scales.
    let scale = if s > 0.0 { h.min(2.0 * s) } else { h };
    let k_max = ((-NEGLIGIBLE.ln()) / (PI * PI * scale)).sqrt().ceil() as usize + 1;
    let mut direct = 0.0;
    let mut asymptotic = 0.0;
    for k in 1..=k_max {
        let kpi = k as f64 * PI;
        let lambda = kpi * kpi;
        let c = (kpi * x).cos();
        let weight = 2.0 * c * c;
        let one_minus_eh = -(-lambda * h).exp_m1();
        let e2s = (-2.0 * lambda * s).exp();
        direct += weight * one_minus_eh * (2.0 - e2s * one_minus_eh) / (2.0 * lambda);
        asymptotic += weight / lambda;
    }
    // Beyond k_max each term equals weight / lambda (s > 0) or half of it (s = 0).
    let tail_factor = if s > 0.0 { 1.0 } else { 0.5 };
    let tail = tail_factor * (inverse_eigen_sum(x) - asymptotic);
    Ok(h + direct + tail)
}
