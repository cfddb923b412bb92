//! Hoelder-exponent estimates for paths and for local times in time.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::exec::Executor;
use crate::occupation::{occupation_histogram_window, MAX_LOCAL_TIME_DIM};
use crate::path::PathSample;
use crate::stats::{fit_power_law, median, ExponentFit, MIN_FIT_POINTS};
use crate::{Error, Result};

/// Gaps that are positive multiples of `dt` no longer than `limit`, with
/// their step counts.
fn usable_gaps(path: &PathSample, gaps: &[f64], limit: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    let (usable, lags): (Vec<f64>, Vec<usize>) = gaps
        .iter()
        .filter(|&&g| g <= limit * (1.0 + 1e-12))
        .filter_map(|&g| path.steps_for(g).ok().map(|s| (g, s)))
        .unzip();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientScales {
            usable: usable.len(),
            required: MIN_FIT_POINTS,
        });
    }
    Ok((usable, lags))
}

/// Level per gap: ensemble median of `max_j |u(t_j + gap) - u(t_j)|`;
/// the slope of log level against log gap estimates the path exponent.
pub fn holder_exponent_path<E: Executor>(
    ensemble: &[PathSample],
    gaps: &[f64],
    exec: &E,
) -> Result<ExponentFit> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    let (scales, lags) = usable_gaps(first, gaps, first.horizon())?;
    let per_path: Vec<Vec<f64>> = exec.map(ensemble.len(), |r| {
        let path = &ensemble[r];
        lags.iter()
            .map(|&lag| {
                (0..=path.n_time() - lag)
                    .map(|j| {
                        let (a, b) = (path.state(j), path.state(j + lag));
                        a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>()
                    })
                    .fold(0.0, f64::max)
                    .sqrt()
            })
            .collect()
    });
    let levels: Vec<f64> = (0..scales.len())
        .map(|g| median(&per_path.iter().map(|row| row[g]).collect::<Vec<_>>()))
        .collect();
    fit_power_law(&scales, &levels)
}

/// Level per gap `h`: ensemble median of `sup_xi |L(xi, t + h) - L(xi, t)|`
/// with histogram local times on `[lo, hi]` and `t = anchor`.
#[allow(clippy::too_many_arguments)]
pub fn holder_exponent_local_time<E: Executor>(
    ensemble: &[PathSample],
    lo: &[f64],
    hi: &[f64],
    bins: usize,
    anchor: f64,
    gaps: &[f64],
    exec: &E,
) -> Result<ExponentFit> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    if first.dim() > MAX_LOCAL_TIME_DIM {
        return Err(Error::UnsupportedDimension {
            d: first.dim(),
            max: MAX_LOCAL_TIME_DIM,
        });
    }
    let start = if anchor == 0.0 {
        0
    } else {
        first.steps_for(anchor)?
    };
    let (scales, lags) = usable_gaps(first, gaps, first.horizon() - anchor)?;
    let per_path: Vec<Result<Vec<f64>>> = exec.map(ensemble.len(), |r| {
        let path = &ensemble[r];
        lags.iter()
            .map(|&lag| {
                let window = occupation_histogram_window(path, start, start + lag, lo, hi, bins)?;
                Ok(window.values().iter().copied().fold(0.0, f64::max))
            })
            .collect()
    });
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_>>()?;
    let levels: Vec<f64> = (0..scales.len())
        .map(|g| median(&per_path.iter().map(|row| row[g]).collect::<Vec<_>>()))
        .collect();
    fit_power_law(&scales, &levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn dyadic(k0: i32, k1: i32) -> Vec<f64> {
        (k0..=k1).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn lipschitz_path_has_unit_slope() {
        let p = PathSample::from_fn(1, 1.0 / 1024.0, 1024, "ramp", |t, u| u[0] = t).unwrap();
        let fit = holder_exponent_path(&[p], &dyadic(4, 10), &Sequential).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.01);
    }

    #[test]
    fn constant_path_is_degenerate() {
        let p = PathSample::from_fn(1, 1.0 / 64.0, 64, "flat", |_, u| u[0] = 0.5).unwrap();
        assert!(matches!(
            holder_exponent_path(&[p], &dyadic(1, 6), &Sequential),
            Err(Error::DegenerateFit { .. })
        ));
    }

    #[test]
    fn too_few_usable_gaps() {
        let p = PathSample::from_fn(1, 1.0 / 16.0, 16, "ramp", |t, u| u[0] = t).unwrap();
        // Only 2^-1..2^-4 are representable; 0.3 is not a multiple of dt.
        assert!(matches!(
            holder_exponent_path(&[p], &[0.5, 0.25, 0.3, 2.0], &Sequential),
            Err(Error::InsufficientScales { usable: 2, .. })
        ));
    }

    #[test]
    fn uniform_occupation_local_time_slope() {
        let p = PathSample::from_fn(1, 1.0 / 4096.0, 4096, "ramp", |t, u| u[0] = t).unwrap();
        // Bin width 0.25 exceeds every gap, so each window lies in one bin.
        let fit =
            holder_exponent_local_time(&[p], &[0.0], &[1.0], 4, 0.0, &dyadic(3, 8), &Sequential)
                .unwrap();
        assert!((fit.slope - 1.0).abs() < 0.02, "{}", fit.slope);
        let q = PathSample::from_fn(4, 0.1, 10, "z", |_, u| u.fill(0.0)).unwrap();
        assert!(holder_exponent_local_time(
            &[q],
            &[0.0; 4],
            &[1.0; 4],
            2,
            0.0,
            &[0.1; 4],
            &Sequential
        )
        .is_err());
    }
}
