//! Small statistics toolkit: compensated sums, Monte Carlo summaries and
//! power-law fits.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() as f64 - 1.0)
}

/// Median of a copy of `values` (mean of the two central values when even).
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
}

impl MonteCarloEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let stderr = if n > 1 {
            (variance(values) / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            mean: mean(values),
            stderr,
            replications: n,
        }
    }

    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Least-squares fit of `log(level) = intercept + slope * log(scale)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFit {
    pub scales: Vec<f64>,
    pub levels: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
}

pub const MIN_FIT_POINTS: usize = 4;

pub fn fit_power_law(scales: &[f64], levels: &[f64]) -> Result<ExponentFit> {
    if scales.len() != levels.len() {
        return Err(Error::InvalidParameter(alloc::format!(
            "{} scales but {} levels",
            scales.len(),
            levels.len()
        )));
    }
    if scales.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientScales {
            usable: scales.len(),
            required: MIN_FIT_POINTS,
        });
    }
    for (&s, &l) in scales.iter().zip(levels) {
        if !(s > 0.0) || !(l > 0.0) || !l.is_finite() {
            return Err(Error::DegenerateFit { scale: s });
        }
    }
    let n = scales.len() as f64;
    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.ln()).collect();
    let mx = mean(&xs);
    let my = mean(&ys);
    let sxx = sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = sum(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = sum(xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2)));
    let slope_stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ExponentFit {
        scales: scales.to_vec(),
        levels: levels.to_vec(),
        slope,
        slope_stderr,
        intercept,
    })
}
