//! Drift and dispersion coefficients `b: R^d -> R^d`, `sigma: R^d -> R^{d x d}`.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Largest system dimension supported by the fixed-size buffers of the solver.
pub const MAX_DIM: usize = 4;

/// A coefficient set for the system. Implementations must be bounded and
/// smooth, with `|sigma(u) z| >= ellipticity() |z|` for all `u`, `z`.
pub trait Coefficients: Sync {
    fn dim(&self) -> usize;
    fn tag(&self) -> &str;
    /// Uniform bound on `|b(u)|` and every `|sigma_kl(u)|`.
    fn bound(&self) -> f64;
    /// Declared ellipticity constant `rho`.
    fn ellipticity(&self) -> f64;
    fn drift(&self, u: &[f64], out: &mut [f64]);
    /// Row-major `d x d` matrix.
    fn dispersion(&self, u: &[f64], out: &mut [f64]);

    /// `out = sigma(u) xi`.
    fn apply_dispersion(&self, u: &[f64], xi: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut m = [0.0; MAX_DIM * MAX_DIM];
        self.dispersion(u, &mut m[..d * d]);
        for k in 0..d {
            out[k] = (0..d).map(|l| m[k * d + l] * xi[l]).sum();
        }
    }

    /// True when `b = 0`; lets the solver skip drift evaluation.
    fn driftless(&self) -> bool {
        false
    }
}

/// Built-in coefficient library.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientSet {
    /// `b = 0`, `sigma = rho I`. With `rho = 1` this is the additive linear system.
    ScaledIdentity { dim: usize, rho: f64, tag: String },
    /// `sigma_kk = 1 + 0.5 sin u_k`, `b_k = 0.3 cos u_k`.
    Trig { dim: usize },
    /// `sigma = I + 0.2 sin(u_1 + ... + u_d) P` with `P` the cyclic shift, `b = 0`.
    Mixing { dim: usize },
    /// `sigma = diag(1 + 0.5 cos u_k)`, `b = 0`; symmetric under `u -> -u`.
    EvenCos { dim: usize },
}

impl CoefficientSet {
    pub fn linear(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::ScaledIdentity {
            dim,
            rho: 1.0,
            tag: "linear".to_owned(),
        })
    }

    pub fn scaled_identity(dim: usize, rho: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho = {rho} must be positive"
            )));
        }
        Ok(Self::ScaledIdentity {
            dim,
            rho,
            tag: format!("scaled-identity({rho})"),
        })
    }

    /// Looks up `linear`, `trig`, `mixing` or `even-cos`.
    pub fn by_tag(tag: &str, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        match tag {
            "linear" => Self::linear(dim),
            "trig" => Ok(Self::Trig { dim }),
            "mixing" => Ok(Self::Mixing { dim }),
            "even-cos" => Ok(Self::EvenCos { dim }),
            other => Err(Error::InvalidParameter(format!(
                "unknown coefficient set `{other}` (expected linear, trig, mixing or even-cos)"
            ))),
        }
    }

    pub const TAGS: [&'static str; 4] = ["linear", "trig", "mixing", "even-cos"];
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dimension {dim} outside 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

impl Coefficients for CoefficientSet {
    fn dim(&self) -> usize {
        match *self {
            Self::ScaledIdentity { dim, .. }
            | Self::Trig { dim }
            | Self::Mixing { dim }
            | Self::EvenCos { dim } => dim,
        }
    }

    fn tag(&self) -> &str {
        match self {
            Self::ScaledIdentity { tag, .. } => tag,
            Self::Trig { .. } => "trig",
            Self::Mixing { .. } => "mixing",
            Self::EvenCos { .. } => "even-cos",
        }
    }

    fn bound(&self) -> f64 {
        match *self {
            Self::ScaledIdentity { rho, .. } => rho,
            Self::Trig { dim } => 1.5f64.max(0.3 * (dim as f64).sqrt()),
            Self::Mixing { .. } => 1.2,
            Self::EvenCos { .. } => 1.5,
        }
    }

    fn ellipticity(&self) -> f64 {
        match *self {
            Self::ScaledIdentity { rho, .. } => rho,
            Self::Trig { .. } | Self::EvenCos { .. } => 0.5,
            Self::Mixing { .. } => 0.8,
        }
    }

    fn drift(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Self::Trig { .. } => {
                for (o, &x) in out.iter_mut().zip(u) {
                    *o = 0.3 * x.cos();
                }
            }
            _ => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    fn dispersion(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out[..d * d].iter_mut().for_each(|o| *o = 0.0);
        match *self {
            Self::ScaledIdentity { rho, .. } => {
                for k in 0..d {
                    out[k * d + k] = rho;
                }
            }
            Self::Trig { .. } => {
                for k in 0..d {
                    out[k * d + k] = 1.0 + 0.5 * u[k].sin();
                }
            }
            Self::EvenCos { .. } => {
                for k in 0..d {
                    out[k * d + k] = 1.0 + 0.5 * u[k].cos();
                }
            }
            Self::Mixing { .. } => {
                let c = 0.2 * u[..d].iter().sum::<f64>().sin();
                for k in 0..d {
                    out[k * d + k] += 1.0;
                    out[k * d + (k + 1) % d] += c;
                }
            }
        }
    }

    fn apply_dispersion(&self, u: &[f64], xi: &[f64], out: &mut [f64]) {
        let d = self.dim();
        match *self {
            Self::ScaledIdentity { rho, .. } => {
                for k in 0..d {
                    out[k] = rho * xi[k];
                }
            }
            Self::Trig { .. } => {
                for k in 0..d {
                    out[k] = (1.0 + 0.5 * u[k].sin()) * xi[k];
                }
            }
            Self::EvenCos { .. } => {
                for k in 0..d {
                    out[k] = (1.0 + 0.5 * u[k].cos()) * xi[k];
                }
            }
            Self::Mixing { .. } => {
                let c = 0.2 * u[..d].iter().sum::<f64>().sin();
                for k in 0..d {
                    out[k] = xi[k] + c * xi[(k + 1) % d];
                }
            }
        }
    }

    fn driftless(&self) -> bool {
        !matches!(self, Self::Trig { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        for tag in CoefficientSet::TAGS {
            let c = CoefficientSet::by_tag(tag, 2).unwrap();
            assert_eq!(c.tag(), tag);
            assert_eq!(c.dim(), 2);
        }
        assert!(CoefficientSet::by_tag("cubic", 1).is_err());
        assert!(CoefficientSet::by_tag("linear", 5).is_err());
    }

    #[test]
    fn fast_path_matches_matrix_product() {
        let u = [0.3, -1.2, 2.0];
        let xi = [0.7, -0.1, 1.5];
        for tag in CoefficientSet::TAGS {
            let c = CoefficientSet::by_tag(tag, 3).unwrap();
            let mut m = [0.0; 9];
            c.dispersion(&u, &mut m);
            let mut fast = [0.0; 3];
            c.apply_dispersion(&u, &xi, &mut fast);
            for k in 0..3 {
                let slow: f64 = (0..3).map(|l| m[k * 3 + l] * xi[l]).sum();
                assert!((slow - fast[k]).abs() < 1e-15, "{tag}");
            }
        }
    }
}
