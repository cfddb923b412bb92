//! Monte Carlo joint characteristic functions of path increments.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::exec::Executor;
use crate::path::PathSample;
use crate::stats::{mean, variance};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CharFnRow {
    /// One frequency vector per increment.
    pub v: Vec<Vec<f64>>,
    pub modulus: f64,
    /// Standard error of the complex sample mean,
    /// `sqrt((Var cos + Var sin) / n)`.
    pub stderr: f64,
    /// `max_l |v_{j,l}| (t_j - t_{j-1})^{1/4}` per increment.
    pub scales: Vec<f64>,
}

/// `|E exp(i sum_j <v_j, u(t_j) - u(t_{j-1})>)|` for each entry of
/// `v_grid`, where an entry holds `m = time_points.len() - 1` vectors.
pub fn charfn_decay_probe<E: Executor>(
    ensemble: &[PathSample],
    time_points: &[f64],
    v_grid: &[Vec<Vec<f64>>],
    exec: &E,
) -> Result<Vec<CharFnRow>> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    if time_points.len() < 2 || time_points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "time points must be strictly increasing, at least two".into(),
        ));
    }
    if time_points[0] < 0.0 || *time_points.last().unwrap() > first.horizon() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "time points must lie in [0, {}]",
            first.horizon()
        )));
    }
    let d = first.dim();
    let m = time_points.len() - 1;
    let steps: Vec<usize> = time_points
        .iter()
        .map(|&t| if t == 0.0 { Ok(0) } else { first.steps_for(t) })
        .collect::<Result<_>>()?;
    for v in v_grid {
        if v.len() != m || v.iter().any(|vj| vj.len() != d) {
            return Err(Error::InvalidParameter(format!(
                "each frequency entry needs {m} vectors of dimension {d}"
            )));
        }
    }
    // Phase of every (frequency entry, path) pair.
    let phases: Vec<Vec<f64>> = exec.map(ensemble.len(), |r| {
        let path = &ensemble[r];
        v_grid
            .iter()
            .map(|v| {
                (0..m)
                    .map(|j| {
                        let (a, b) = (path.state(steps[j]), path.state(steps[j + 1]));
                        v[j].iter()
                            .zip(a.iter().zip(b))
                            .map(|(vl, (x, y))| vl * (y - x))
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .collect()
    });
    let n = ensemble.len() as f64;
    Ok(v_grid
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (c, s): (Vec<f64>, Vec<f64>) =
                phases.iter().map(|p| (p[k].cos(), p[k].sin())).unzip();
            let modulus = mean(&c).hypot(mean(&s));
            let stderr = ((variance(&c) + variance(&s)) / n).sqrt();
            let scales = (0..m)
                .map(|j| {
                    let h = time_points[j + 1] - time_points[j];
                    v[j].iter().fold(0.0, |a: f64, x| a.max(x.abs())) * h.powf(0.25)
                })
                .collect();
            CharFnRow {
                v: v.clone(),
                modulus: modulus.min(1.0),
                stderr,
                scales,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use alloc::vec;

    #[test]
    fn zero_frequency_has_unit_modulus() {
        let paths: Vec<PathSample> = (0..5)
            .map(|r| {
                PathSample::from_fn(1, 0.1, 10, "w", |t, u| u[0] = (r as f64 + t).sin()).unwrap()
            })
            .collect();
        let rows = charfn_decay_probe(
            &paths,
            &[0.2, 0.5, 0.9],
            &[vec![vec![0.0], vec![0.0]]],
            &Sequential,
        )
        .unwrap();
        assert_eq!(rows[0].modulus, 1.0);
        assert_eq!(rows[0].stderr, 0.0);
    }

    #[test]
    fn rejects_unordered_times() {
        let p = PathSample::from_fn(1, 0.1, 10, "w", |t, u| u[0] = t).unwrap();
        assert!(charfn_decay_probe(&[p], &[0.5, 0.2], &[vec![vec![1.0]]], &Sequential).is_err());
    }
}
