//! The simplex integral
//! `int_{t <= s_1 < ... < s_m <= t + h} prod_j (s_j - s_{j-1})^{-b_j} ds
//!  = h^{m - sum b} prod_j Gamma(1 - b_j) / Gamma(1 + m - sum b)`, `s_0 = t`.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::quadrature::tanh_sinh;
use crate::{Error, Result};

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EhmCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / rhs`.
    pub residual: f64,
}

/// Closed form of the simplex integral.
pub fn ehm_closed_form(b: &[f64], h: f64) -> f64 {
    let m = b.len() as f64;
    let total: f64 = b.iter().sum();
    let gammas: f64 = b.iter().map(|&bj| libm::tgamma(1.0 - bj)).product();
    h.powf(m - total) * gammas / libm::tgamma(1.0 + m - total)
}

/// Iterated tanh-sinh evaluation of the simplex integral. The integral over
/// `s_j` is taken in the gap `g = s_j - s_{j-1}`, so each level sees an
/// algebraic singularity at `g = 0` and a regular power at the far end.
pub fn ehm_quadrature(b: &[f64], h: f64) -> f64 {
    fn level(b: &[f64], r: f64) -> f64 {
        match b.split_first() {
            None => 1.0,
            Some((&bj, rest)) => tanh_sinh(
                |g, remaining| g.powf(-bj) * level(rest, remaining),
                0.0,
                r,
                1e-13,
            ),
        }
    }
    level(b, h)
}

pub fn ehm_identity_check(b: &[f64], h: f64) -> Result<EhmCheck> {
    if b.is_empty() || b.len() > MAX_ORDER {
        return Err(Error::InvalidParameter(alloc::format!(
            "order m = {} outside 1..={MAX_ORDER}",
            b.len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "h = {h} must be positive"
        )));
    }
    if let Some((index, &exponent)) = b.iter().enumerate().find(|(_, &bj)| !(bj < 1.0)) {
        return Err(Error::DivergentIntegral { index, exponent });
    }
    let lhs = ehm_quadrature(b, h);
    let rhs = ehm_closed_form(b, h);
    Ok(EhmCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs() / rhs,
    })
}

/// The three shipped cases `(b, h)`.
pub fn shipped_cases() -> Vec<(Vec<f64>, f64)> {
    alloc::vec![
        (alloc::vec![0.5], 1.0),
        (alloc::vec![0.5, 0.5], 1.0),
        (alloc::vec![0.25, 0.25, 0.25], 0.5),
    ]
}
