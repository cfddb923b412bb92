//! Occupation measures and local times of a probe trajectory, the Fourier
//! functional `f(xi) = int_0^t exp(i <xi, u(s)>) ds`, and the Sobolev-energy
//! diagnostic `int |xi|^{2 alpha} |f(xi)|^2 dxi`.
//!
//! All time integrals are left-endpoint sums over the simulation grid: step
//! `j` (for `j < n_time`) carries weight `dt` at state `u(t_j)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::exec::Executor;
use crate::path::PathSample;
use crate::stats::{CompensatedSum, MonteCarloEstimate};
use crate::{Error, Result};

/// Largest dimension in which local times exist.
pub const MAX_LOCAL_TIME_DIM: usize = 3;

/// Histogram estimate of the occupation density on a box split into
/// `bins^d` equal cells. `values` is row-major with the first axis slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationDensity {
    lo: Vec<f64>,
    hi: Vec<f64>,
    bins: usize,
    values: Vec<f64>,
    horizon: f64,
    out_of_box: f64,
}

impl OccupationDensity {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
    pub fn bins(&self) -> usize {
        self.bins
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// Length of the time window the histogram covers.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    /// Time spent outside the box.
    pub fn out_of_box(&self) -> f64 {
        self.out_of_box
    }
    pub fn bin_width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.bins as f64
    }
    pub fn bin_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.bin_width(a)).product()
    }
    /// Centre of the bin with flat index `index`.
    pub fn bin_center(&self, index: usize, out: &mut [f64]) {
        let d = self.dim();
        let mut rem = index;
        for axis in (0..d).rev() {
            let i = rem % self.bins;
            rem /= self.bins;
            out[axis] = self.lo[axis] + (i as f64 + 0.5) * self.bin_width(axis);
        }
    }
    /// `sum values * bin volume`.
    pub fn total_mass(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for &v in &self.values {
            acc.add(v);
        }
        acc.value() * self.bin_volume()
    }
    /// Density of the bin containing `point`, or zero outside the box.
    pub fn density_at(&self, point: &[f64]) -> f64 {
        self.flat_index(point).map_or(0.0, |i| self.values[i])
    }

    fn flat_index(&self, point: &[f64]) -> Option<usize> {
        let mut index = 0;
        for (axis, &x) in point.iter().enumerate() {
            let (lo, hi) = (self.lo[axis], self.hi[axis]);
            if !(x >= lo && x <= hi) {
                return None;
            }
            let i = (((x - lo) / self.bin_width(axis)) as usize).min(self.bins - 1);
            index = index * self.bins + i;
        }
        Some(index)
    }

    /// Accumulates `axpy * other` into `self` (same geometry).
    pub fn accumulate(&mut self, other: &Self, axpy: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += axpy * b;
        }
        self.out_of_box += axpy * other.out_of_box;
        self.horizon += axpy * other.horizon;
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self.out_of_box *= factor;
        self.horizon *= factor;
        self
    }
}

fn check_box(dim: usize, lo: &[f64], hi: &[f64], bins: usize) -> Result<()> {
    if lo.len() != dim || hi.len() != dim {
        return Err(Error::InvalidParameter(format!(
            "box corners must have dimension {dim}"
        )));
    }
    if bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 bins per axis, got {bins}"
        )));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::InvalidParameter(
            "box needs lo < hi on every axis".into(),
        ));
    }
    Ok(())
}

/// Occupation density of `path` over its whole horizon.
pub fn occupation_histogram(
    path: &PathSample,
    lo: &[f64],
    hi: &[f64],
    bins: usize,
) -> Result<OccupationDensity> {
    occupation_histogram_window(path, 0, path.n_time(), lo, hi, bins)
}

/// Occupation density of the steps `start..end` (time window
/// `[start dt, end dt)`).
pub fn occupation_histogram_window(
    path: &PathSample,
    start: usize,
    end: usize,
    lo: &[f64],
    hi: &[f64],
    bins: usize,
) -> Result<OccupationDensity> {
    let d = path.dim();
    check_box(d, lo, hi, bins)?;
    if start > end || end > path.n_time() {
        return Err(Error::OutOfRange {
            what: "time step",
            index: end,
            limit: path.n_time(),
        });
    }
    let mut density = OccupationDensity {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        bins,
        values: vec![0.0; bins.pow(d as u32)],
        horizon: (end - start) as f64 * path.dt(),
        out_of_box: 0.0,
    };
    let mut counts = vec![0u64; density.values.len()];
    let mut outside = 0u64;
    for i in start..end {
        match density.flat_index(path.state(i)) {
            Some(k) => counts[k] += 1,
            None => outside += 1,
        }
    }
    let scale = path.dt() / density.bin_volume();
    for (v, &c) in density.values.iter_mut().zip(&counts) {
        *v = c as f64 * scale;
    }
    density.out_of_box = outside as f64 * path.dt();
    Ok(density)
}

/// `f(xi)` for one path.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierFunctional {
    pub xi: Vec<f64>,
    pub value: Complex64,
    pub horizon: f64,
}

pub fn fourier_functional(path: &PathSample, xi: &[f64]) -> Result<FourierFunctional> {
    if xi.len() != path.dim() {
        return Err(Error::InvalidParameter(format!(
            "frequency has dimension {}, path has {}",
            xi.len(),
            path.dim()
        )));
    }
    let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
    for i in 0..path.n_time() {
        let phase: f64 = xi.iter().zip(path.state(i)).map(|(a, b)| a * b).sum();
        let (s, c) = phase.sin_cos();
        re.add(c);
        im.add(s);
    }
    Ok(FourierFunctional {
        xi: xi.to_vec(),
        value: Complex64::new(re.value(), im.value()) * path.dt(),
        horizon: path.horizon(),
    })
}

/// Uniform lattice `{k step : |k| <= m}^d` with `m = round(cutoff / step)`
/// and trapezoid weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyLattice {
    dim: usize,
    step: f64,
    half: usize,
}

impl FrequencyLattice {
    pub fn new(dim: usize, cutoff: f64, step: f64) -> Result<Self> {
        if dim == 0 || !(step > 0.0) || !(cutoff >= step) {
            return Err(Error::InvalidParameter(format!(
                "frequency lattice needs 0 < step <= cutoff (step {step}, cutoff {cutoff})"
            )));
        }
        let raw = cutoff / step;
        let half = raw.round();
        if (raw - half).abs() > 1e-9 * raw {
            return Err(Error::InvalidParameter(format!(
                "cutoff {cutoff} is not a multiple of the frequency step {step}"
            )));
        }
        Ok(Self {
            dim,
            step,
            half: half as usize,
        })
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn cutoff(&self) -> f64 {
        self.half as f64 * self.step
    }
    /// Points per axis.
    pub fn side(&self) -> usize {
        2 * self.half + 1
    }
    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Signed per-axis integer coordinates of flat index `index`.
    pub fn coords(&self, index: usize, out: &mut [i64]) {
        let side = self.side();
        let mut rem = index;
        for axis in (0..self.dim).rev() {
            out[axis] = (rem % side) as i64 - self.half as i64;
            rem /= side;
        }
    }
    /// Trapezoid weight times cell volume `step^d`.
    pub fn weight_of(&self, coords: &[i64]) -> f64 {
        let edge = self.half as i64;
        coords.iter().fold(1.0, |w, &k| {
            w * if k.abs() == edge {
                0.5 * self.step
            } else {
                self.step
            }
        })
    }
}

/// `f` on every lattice point (flat order of [`FrequencyLattice::coords`]).
/// Only half the lattice is summed; the rest follows from `f(-xi) = conj f(xi)`.
pub fn fourier_lattice(path: &PathSample, lattice: &FrequencyLattice) -> Result<Vec<Complex64>> {
    let d = path.dim();
    if d != lattice.dim() {
        return Err(Error::InvalidParameter(format!(
            "lattice dimension {} differs from path dimension {d}",
            lattice.dim()
        )));
    }
    let n = lattice.len();
    let side = lattice.side();
    let half_len = n / 2 + 1;
    let mut acc = vec![Complex64::new(0.0, 0.0); half_len];
    // Per-axis powers exp(i k step u_a) for k = -m..=m.
    let mut powers = vec![Complex64::new(0.0, 0.0); d * side];
    let m = lattice.half;
    let mut coords = vec![0i64; d];
    for i in 0..path.n_time() {
        let u = path.state(i);
        for a in 0..d {
            let base = Complex64::from_polar(1.0, lattice.step * u[a]);
            let row = &mut powers[a * side..(a + 1) * side];
            row[m] = Complex64::new(1.0, 0.0);
            let mut z = Complex64::new(1.0, 0.0);
            for k in 1..=m {
                // Refresh from the exact phase periodically to bound drift.
                z = if k % 64 == 0 {
                    Complex64::from_polar(1.0, k as f64 * lattice.step * u[a])
                } else {
                    z * base
                };
                row[m + k] = z;
                row[m - k] = z.conj();
            }
        }
        if d == 1 {
            for (slot, p) in acc.iter_mut().zip(&powers[..half_len]) {
                *slot += p;
            }
            continue;
        }
        coords.iter_mut().for_each(|c| *c = 0);
        for (idx, slot) in acc.iter_mut().enumerate() {
            lattice.coords(idx, &mut coords);
            let mut z = powers[(coords[0] + m as i64) as usize];
            for a in 1..d {
                z *= powers[a * side + (coords[a] + m as i64) as usize];
            }
            *slot += z;
        }
    }
    let dt = path.dt();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (idx, v) in acc.iter().enumerate() {
        out[idx] = v * dt;
        out[n - 1 - idx] = (v * dt).conj();
    }
    Ok(out)
}

/// Truncated Fourier-inversion estimate of the local time at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InversionEstimate {
    pub re: f64,
    /// Imaginary residue (zero for an exact real local time).
    pub im: f64,
}

fn check_local_time_dim(d: usize) -> Result<()> {
    if d > MAX_LOCAL_TIME_DIM {
        return Err(Error::UnsupportedDimension {
            d,
            max: MAX_LOCAL_TIME_DIM,
        });
    }
    Ok(())
}

/// `(2 pi)^{-d} int_{[-N, N]^d} exp(-i <xi, x>) f(xi) dxi` by the trapezoid
/// rule on the frequency lattice.
pub fn local_time_fourier_inversion(
    path: &PathSample,
    point: &[f64],
    cutoff: f64,
    freq_step: f64,
) -> Result<InversionEstimate> {
    Ok(local_time_fourier_inversion_many(path, &[point.to_vec()], cutoff, freq_step)?[0])
}

/// As [`local_time_fourier_inversion`] for several points, sharing one
/// evaluation of `f` on the lattice.
pub fn local_time_fourier_inversion_many(
    path: &PathSample,
    points: &[Vec<f64>],
    cutoff: f64,
    freq_step: f64,
) -> Result<Vec<InversionEstimate>> {
    let d = path.dim();
    check_local_time_dim(d)?;
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidParameter(format!(
            "evaluation points must have dimension {d}"
        )));
    }
    let lattice = FrequencyLattice::new(d, cutoff, freq_step)?;
    let f = fourier_lattice(path, &lattice)?;
    Ok(invert_lattice(&lattice, &f, points))
}

fn invert_lattice(
    lattice: &FrequencyLattice,
    f: &[Complex64],
    points: &[Vec<f64>],
) -> Vec<InversionEstimate> {
    let d = lattice.dim();
    let norm = (2.0 * PI).powi(-(d as i32));
    let mut coords = vec![0i64; d];
    points
        .iter()
        .map(|x| {
            let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
            for (idx, fv) in f.iter().enumerate() {
                lattice.coords(idx, &mut coords);
                let phase: f64 = coords
                    .iter()
                    .zip(x)
                    .map(|(&k, &xa)| k as f64 * lattice.step() * xa)
                    .sum();
                let term = Complex64::from_polar(lattice.weight_of(&coords), -phase) * fv;
                re.add(term.re);
                im.add(term.im);
            }
            InversionEstimate {
                re: norm * re.value(),
                im: norm * im.value(),
            }
        })
        .collect()
}

/// `|int_0^t g(u(s)) ds - int g(x) L(x) dx| / (|int_0^t g(u(s)) ds| + 1e-12)`,
/// with the space side evaluated at bin centres.
pub fn occupation_formula_residual<G: Fn(&[f64]) -> f64>(
    path: &PathSample,
    density: &OccupationDensity,
    test_fn: G,
) -> f64 {
    let mut time_side = CompensatedSum::default();
    for i in 0..path.n_time() {
        time_side.add(test_fn(path.state(i)));
    }
    let time_side = time_side.value() * path.dt();
    let mut space_side = CompensatedSum::default();
    let mut centre = vec![0.0; density.dim()];
    for (idx, &v) in density.values().iter().enumerate() {
        if v != 0.0 {
            density.bin_center(idx, &mut centre);
            space_side.add(test_fn(&centre) * v);
        }
    }
    let space_side = space_side.value() * density.bin_volume();
    (time_side - space_side).abs() / (time_side.abs() + 1e-12)
}

/// `sum_xi w(xi) |xi|^{2 alpha} |f(xi)|^2` for each `alpha` and each cutoff
/// in `radii`, from a single lattice at the largest cutoff. Every radius must
/// be a multiple of `freq_step`. Returns `energies[a][r]`.
pub fn sobolev_profile(
    path: &PathSample,
    alphas: &[f64],
    radii: &[f64],
    freq_step: f64,
) -> Result<Vec<Vec<f64>>> {
    let d = path.dim();
    if alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::InvalidParameter("alpha must be nonnegative".into()));
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let outer = FrequencyLattice::new(d, r_max, freq_step)?;
    let subs: Vec<FrequencyLattice> = radii
        .iter()
        .map(|&r| FrequencyLattice::new(d, r, freq_step))
        .collect::<Result<_>>()?;
    let f = fourier_lattice(path, &outer)?;
    let mut coords = vec![0i64; d];
    let mut acc = vec![vec![CompensatedSum::default(); radii.len()]; alphas.len()];
    for (idx, fv) in f.iter().enumerate() {
        outer.coords(idx, &mut coords);
        let sq = fv.norm_sqr();
        let radius2 = coords
            .iter()
            .map(|&k| (k as f64 * freq_step).powi(2))
            .sum::<f64>();
        let extent = coords.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0) as usize;
        for (r, sub) in subs.iter().enumerate() {
            if extent > sub.half {
                continue;
            }
            let w = sub.weight_of(&coords) * sq;
            for (a, &alpha) in alphas.iter().enumerate() {
                acc[a][r].add(w * radius2.powf(alpha));
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|row| row.into_iter().map(|s| s.value()).collect())
        .collect())
}

/// Ensemble Monte Carlo estimate of the Sobolev energy at one `(alpha, R)`.
pub fn sobolev_energy<E: Executor>(
    ensemble: &[PathSample],
    alpha: f64,
    radius: f64,
    freq_step: f64,
    exec: &E,
) -> Result<MonteCarloEstimate> {
    let per_path: Vec<f64> = exec
        .map(ensemble.len(), |i| {
            sobolev_profile(&ensemble[i], &[alpha], &[radius], freq_step).map(|e| e[0][0])
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(MonteCarloEstimate::from_samples(&per_path))
}

/// Ensemble estimates `[alpha][radius]` sharing one lattice per path.
pub fn sobolev_ensemble_profile<E: Executor>(
    ensemble: &[PathSample],
    alphas: &[f64],
    radii: &[f64],
    freq_step: f64,
    exec: &E,
) -> Result<Vec<Vec<MonteCarloEstimate>>> {
    let per_path: Vec<Vec<Vec<f64>>> = exec
        .map(ensemble.len(), |i| {
            sobolev_profile(&ensemble[i], alphas, radii, freq_step)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok((0..alphas.len())
        .map(|a| {
            (0..radii.len())
                .map(|r| {
                    let v: Vec<f64> = per_path.iter().map(|p| p[a][r]).collect();
                    MonteCarloEstimate::from_samples(&v)
                })
                .collect()
        })
        .collect())
}

/// Ensemble comparison of histogram and Fourier-inversion local times.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTimeAgreement {
    pub points: Vec<Vec<f64>>,
    pub histogram: Vec<f64>,
    pub inversion: Vec<f64>,
    pub inversion_im: Vec<f64>,
    /// Mean absolute difference over the points divided by the mean
    /// histogram level.
    pub relative_gap: f64,
}

/// Averages both local-time estimators over the ensemble at `points`.
#[allow(clippy::too_many_arguments)]
pub fn histogram_fourier_agreement<E: Executor>(
    ensemble: &[PathSample],
    lo: &[f64],
    hi: &[f64],
    bins: usize,
    points: &[Vec<f64>],
    cutoff: f64,
    freq_step: f64,
    exec: &E,
) -> Result<LocalTimeAgreement> {
    let per_path: Vec<(Vec<f64>, Vec<InversionEstimate>)> = exec
        .map(ensemble.len(), |i| {
            let path = &ensemble[i];
            let hist = occupation_histogram(path, lo, hi, bins)?;
            let h = points.iter().map(|p| hist.density_at(p)).collect();
            let inv = local_time_fourier_inversion_many(path, points, cutoff, freq_step)?;
            Ok((h, inv))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let n = per_path.len() as f64;
    let k = points.len();
    let mut histogram = vec![0.0; k];
    let mut inversion = vec![0.0; k];
    let mut inversion_im = vec![0.0; k];
    for (h, inv) in &per_path {
        for j in 0..k {
            histogram[j] += h[j] / n;
            inversion[j] += inv[j].re / n;
            inversion_im[j] += inv[j].im / n;
        }
    }
    let gap = histogram
        .iter()
        .zip(&inversion)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / k as f64;
    let level = histogram.iter().sum::<f64>() / k as f64;
    Ok(LocalTimeAgreement {
        points: points.to_vec(),
        histogram,
        inversion,
        inversion_im,
        relative_gap: gap / level,
    })
}
