//! Kernel-density estimates of rescaled increments
//! `z = (u(t) - u(s)) / (t - s)^{1/4}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::exec::Executor;
use crate::occupation::MAX_LOCAL_TIME_DIM;
use crate::path::PathSample;
use crate::stats::{mean, variance};
use crate::{Error, Result};

/// Minimum effective sample count `n p(z) (2 h)^d` inside the unit ball.
pub const MIN_EFFECTIVE_COUNT: f64 = 50.0;

/// Reference bandwidth `0.3 * std(z) * n^{-1/(d+4)}`, with `std` the mean
/// per-coordinate standard deviation.
pub fn reference_bandwidth(samples: &[f64], dim: usize) -> f64 {
    let n = samples.len() / dim;
    let sd = (0..dim)
        .map(|k| {
            let col: Vec<f64> = samples.iter().skip(k).step_by(dim).copied().collect();
            variance(&col).sqrt()
        })
        .sum::<f64>()
        / dim as f64;
    0.3 * sd * (n as f64).powf(-1.0 / (dim as f64 + 4.0))
}

/// Density table for one `(s, t)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTable {
    pub s: f64,
    pub t: f64,
    pub bandwidth: f64,
    pub density: Vec<f64>,
    /// Standard error of each estimate (sample sd of kernel values / sqrt n).
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncrementDensity {
    pub dim: usize,
    /// Evaluation points, row-major `len x dim`.
    pub points: Vec<f64>,
    pub tables: Vec<DensityTable>,
    /// Average of the per-pair densities.
    pub pooled: Vec<f64>,
    pub pooled_stderr: Vec<f64>,
    /// Largest pairwise sup-distance between per-pair densities on
    /// `|z| <= 2`, relative to the largest pooled value there.
    pub collapse: f64,
    /// Minimum pooled density on `|z| <= 1`.
    pub lower_bound: f64,
}

impl IncrementDensity {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn norm(&self, i: usize) -> f64 {
        self.point(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `max_pairs sup_{|z| <= radius} |p_pair(z) - exact(pair, z)|` relative
    /// to the largest exact value on the same set.
    pub fn oracle_distance<F: Fn(usize, &[f64]) -> f64>(&self, radius: f64, exact: F) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, table) in self.tables.iter().enumerate() {
            let (mut diff, mut peak): (f64, f64) = (0.0, 0.0);
            for i in 0..self.points.len() / self.dim {
                if self.norm(i) <= radius {
                    let e = exact(k, self.point(i));
                    diff = diff.max((table.density[i] - e).abs());
                    peak = peak.max(e);
                }
            }
            worst = worst.max(diff / peak);
        }
        worst
    }
}

/// Rectangular evaluation lattice `{-extent + i step}^d`, `i = 0..=2 extent / step`.
pub fn symmetric_lattice(dim: usize, extent: f64, per_axis: usize) -> Vec<f64> {
    let step = 2.0 * extent / (per_axis - 1) as f64;
    let total = per_axis.pow(dim as u32);
    let mut points = Vec::with_capacity(total * dim);
    for idx in 0..total {
        let mut rem = idx;
        let mut row = vec![0.0; dim];
        for axis in (0..dim).rev() {
            row[axis] = -extent + (rem % per_axis) as f64 * step;
            rem /= per_axis;
        }
        points.extend_from_slice(&row);
    }
    points
}

/// Gaussian-kernel density estimates of the rescaled increments for every
/// pair, evaluated at `points` (row-major). `bandwidth = None` selects
/// [`reference_bandwidth`] per pair.
pub fn increment_density_kde<E: Executor>(
    ensemble: &[PathSample],
    pairs: &[(f64, f64)],
    bandwidth: Option<f64>,
    points: &[f64],
    exec: &E,
) -> Result<IncrementDensity> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
    let d = first.dim();
    if d > MAX_LOCAL_TIME_DIM {
        return Err(Error::UnsupportedDimension {
            d,
            max: MAX_LOCAL_TIME_DIM,
        });
    }
    if points.len() % d != 0 || points.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "evaluation points must have dimension {d}"
        )));
    }
    let n_points = points.len() / d;
    let n = ensemble.len();
    let mut tables = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        if !(t - s >= 4.0 * first.dt() * (1.0 - 1e-9)) {
            return Err(Error::Domain(format!(
                "pair ({s}, {t}) is shorter than 4 dt = {:e}",
                4.0 * first.dt()
            )));
        }
        let (i0, i1) = (
            if s == 0.0 { 0 } else { first.steps_for(s)? },
            first.steps_for(t)?,
        );
        if i1 > first.n_time() {
            return Err(Error::OutOfRange {
                what: "time step",
                index: i1,
                limit: first.n_time(),
            });
        }
        let scale = (t - s).powf(-0.25);
        let mut z = Vec::with_capacity(n * d);
        for path in ensemble {
            for (a, b) in path.state(i0).iter().zip(path.state(i1)) {
                z.push((b - a) * scale);
            }
        }
        let h = bandwidth.unwrap_or_else(|| reference_bandwidth(&z, d));
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {h} must be positive"
            )));
        }
        let norm = (2.0 * PI * h * h).powf(-0.5 * d as f64);
        let inv2h2 = 0.5 / (h * h);
        let per_point: Vec<(f64, f64)> = exec.map(n_points, |i| {
            let x = &points[i * d..(i + 1) * d];
            let k: Vec<f64> = z
                .chunks_exact(d)
                .map(|zr| {
                    let r2: f64 = zr.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    norm * (-r2 * inv2h2).exp()
                })
                .collect();
            (mean(&k), (variance(&k) / n as f64).sqrt())
        });
        let (density, stderr): (Vec<f64>, Vec<f64>) = per_point.into_iter().unzip();
        for i in 0..n_points {
            let x = &points[i * d..(i + 1) * d];
            if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                let count = n as f64 * density[i] * (2.0 * h).powi(d as i32);
                if count < MIN_EFFECTIVE_COUNT {
                    return Err(Error::UnderResolved {
                        count,
                        required: MIN_EFFECTIVE_COUNT,
                    });
                }
            }
        }
        tables.push(DensityTable {
            s,
            t,
            bandwidth: h,
            density,
            stderr,
        });
    }
    let k = tables.len() as f64;
    let pooled: Vec<f64> = (0..n_points)
        .map(|i| tables.iter().map(|t| t.density[i]).sum::<f64>() / k)
        .collect();
    let pooled_stderr: Vec<f64> = (0..n_points)
        .map(|i| {
            tables
                .iter()
                .map(|t| t.stderr[i] * t.stderr[i])
                .sum::<f64>()
                .sqrt()
                / k
        })
        .collect();
    let mut out = IncrementDensity {
        dim: d,
        points: points.to_vec(),
        tables,
        pooled,
        pooled_stderr,
        collapse: 0.0,
        lower_bound: f64::INFINITY,
    };
    let mut peak: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for i in 0..n_points {
        let r = out.norm(i);
        if r <= 1.0 {
            out.lower_bound = out.lower_bound.min(out.pooled[i]);
        }
        if r <= 2.0 {
            peak = peak.max(out.pooled[i]);
            for a in 0..out.tables.len() {
                for b in a + 1..out.tables.len() {
                    gap = gap.max((out.tables[a].density[i] - out.tables[b].density[i]).abs());
                }
            }
        }
    }
    out.collapse = if peak > 0.0 {
        gap / peak
    } else {
        f64::INFINITY
    };
    Ok(out)
}

/// `max_z |p(z) - p(-z)| / sqrt(se(z)^2 + se(-z)^2)` over a lattice that is
/// symmetric under `z -> -z` (as produced by [`symmetric_lattice`]).
pub fn symmetry_defect(density: &[f64], stderr: &[f64]) -> f64 {
    let n = density.len();
    (0..n)
        .map(|i| {
            let j = n - 1 - i;
            let se = (stderr[i] * stderr[i] + stderr[j] * stderr[j]).sqrt();
            if se > 0.0 {
                (density[i] - density[j]).abs() / se
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    #[test]
    fn lattice_is_point_symmetric() {
        let pts = symmetric_lattice(2, 2.0, 5);
        let n = pts.len() / 2;
        for i in 0..n {
            let j = n - 1 - i;
            assert_eq!(pts[2 * i], -pts[2 * j]);
            assert_eq!(pts[2 * i + 1], -pts[2 * j + 1]);
        }
    }

    #[test]
    fn under_resolved_is_rejected() {
        let paths: Vec<PathSample> = (0..10)
            .map(|r| {
                PathSample::from_fn(1, 0.1, 10, "w", |t, u| u[0] = t * (r as f64 - 4.5)).unwrap()
            })
            .collect();
        let pts = symmetric_lattice(1, 2.0, 9);
        assert!(matches!(
            increment_density_kde(&paths, &[(0.0, 0.5)], None, &pts, &Sequential),
            Err(Error::UnderResolved { .. })
        ));
        assert!(increment_density_kde(&paths, &[(0.0, 0.2)], None, &pts, &Sequential).is_err());
    }
}
