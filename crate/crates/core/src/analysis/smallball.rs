//! Small-ball integrals `eps^{-d} int_0^t int_0^t P(|X_s - X_r| <= eps) dr ds`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::exec::Executor;
use crate::path::PathSample;
use crate::stats::MonteCarloEstimate;
use crate::{Error, Result};

/// Pairs of grid times closer than this many steps are excluded.
pub const DIAGONAL_BAND_STEPS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SmallBallTable {
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    /// `t^2 eps^{-d}` times the fraction of admissible pairs within `eps`.
    pub criterion_values: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Ensemble mean of the admissible-pair fraction within `eps`.
    pub probabilities: Vec<f64>,
    /// Lebesgue measure of the excluded band `|s - r| < 2 dt` in `[0, t]^2`
    /// (grid-cell approximation).
    pub excluded_measure: f64,
}

/// Grid points `t_0, ..., t_{m-1}` with `m = t / dt` represent `[0, t]`;
/// ordered pairs with `|i - j| >= 2` are admissible.
pub fn small_ball_criterion<E: Executor>(
    ensemble: &[PathSample],
    epsilons: &[f64],
    t: f64,
    exec: &E,
) -> Result<SmallBallTable> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter("epsilons must be positive".into()));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter(
            "epsilons must be strictly decreasing".into(),
        ));
    }
    if t > first.horizon() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "t = {t} exceeds the horizon {}",
            first.horizon()
        )));
    }
    let m = first.steps_for(t)?;
    if m <= DIAGONAL_BAND_STEPS {
        return Err(Error::Domain(format!("t = {t} spans only {m} steps")));
    }
    let d = first.dim();
    let band = DIAGONAL_BAND_STEPS;
    let admissible = ((m - band) * (m - band + 1)) as f64;
    let eps2: Vec<f64> = epsilons.iter().map(|e| e * e).collect();
    let per_path: Vec<Vec<f64>> = exec.map(ensemble.len(), |r| {
        let path = &ensemble[r];
        let mut counts = vec![0u64; eps2.len()];
        for i in 0..m {
            let a = path.state(i);
            for j in i + band..m {
                let b = path.state(j);
                let dist2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                // Epsilons decrease, so the first miss ends the scan.
                for (c, &e2) in counts.iter_mut().zip(&eps2) {
                    if dist2 > e2 {
                        break;
                    }
                    *c += 1;
                }
            }
        }
        // Each unordered pair counts twice among ordered pairs.
        counts
            .iter()
            .map(|&c| 2.0 * c as f64 / admissible)
            .collect()
    });
    let mut table = SmallBallTable {
        epsilons: epsilons.to_vec(),
        criterion_values: Vec::with_capacity(epsilons.len()),
        stderrs: Vec::with_capacity(epsilons.len()),
        probabilities: Vec::with_capacity(epsilons.len()),
        excluded_measure: (2 * band - 1) as f64 * m as f64 * first.dt() * first.dt(),
    };
    for (k, &eps) in epsilons.iter().enumerate() {
        let fractions: Vec<f64> = per_path.iter().map(|row| row[k]).collect();
        let est = MonteCarloEstimate::from_samples(&fractions);
        let factor = t * t * eps.powi(-(d as i32));
        table.probabilities.push(est.mean);
        table.criterion_values.push(factor * est.mean);
        table.stderrs.push(factor * est.stderr);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    #[test]
    fn large_epsilon_gives_full_probability() {
        let p = PathSample::from_fn(2, 0.01, 100, "c", |t, u| {
            u[0] = t.sin();
            u[1] = t.cos();
        })
        .unwrap();
        let table = small_ball_criterion(&[p.clone(), p], &[5.0, 4.0], 1.0, &Sequential).unwrap();
        assert_eq!(table.probabilities, [1.0, 1.0]);
        assert_eq!(table.criterion_values[0], 1.0 / 25.0);
        assert_eq!(table.criterion_values[1], 1.0 / 16.0);
    }

    #[test]
    fn counts_match_brute_force() {
        let p = PathSample::from_fn(1, 0.05, 20, "w", |t, u| u[0] = (9.0 * t).sin()).unwrap();
        let eps = [0.5, 0.2, 0.05];
        let table = small_ball_criterion(std::slice::from_ref(&p), &eps, 1.0, &Sequential).unwrap();
        for (k, &e) in eps.iter().enumerate() {
            let (mut hit, mut total) = (0, 0);
            for i in 0..20usize {
                for j in 0..20usize {
                    if i.abs_diff(j) >= 2 {
                        total += 1;
                        if (p.state(i)[0] - p.state(j)[0]).abs() <= e {
                            hit += 1;
                        }
                    }
                }
            }
            assert!((table.probabilities[k] - hit as f64 / total as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_epsilons() {
        let p = PathSample::from_fn(1, 0.1, 10, "z", |_, u| u[0] = 0.0).unwrap();
        assert!(
            small_ball_criterion(std::slice::from_ref(&p), &[0.1, 0.2], 1.0, &Sequential).is_err()
        );
        assert!(small_ball_criterion(&[p], &[0.1], 2.0, &Sequential).is_err());
    }
}
