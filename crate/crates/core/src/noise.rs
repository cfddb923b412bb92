//! Space-time grids and discretised white noise.
//!
//! The spatial interval `[0, 1]` is split into `n_space` cells of width
//! `dx = 1 / n_space`; node `j` sits at the cell centre `(j + 1/2) dx`.
//! The noise increment of a cell over one time step is the white-noise
//! measure of the rectangle `[t_i, t_i + dt) x cell`, hence `N(0, dt dx)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::rng::{GaussianStream, Namespace};
use crate::{Error, Result};

/// Identity of one replication's random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub replication: u64,
}

impl SeedSpec {
    pub const fn new(base_seed: u64, replication: u64) -> Self {
        Self {
            base_seed,
            replication,
        }
    }
}

/// Discretisation of `[0, T] x [0, 1]` with a probe node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    n_space: usize,
    n_time: usize,
    horizon: f64,
    dx: f64,
    dt: f64,
    probe: usize,
}

impl SpaceTimeGrid {
    /// Builds a grid and snaps `probe_x` to the nearest cell centre. The
    /// probe must land on a non-boundary cell.
    pub fn new(n_space: usize, n_time: usize, horizon: f64, probe_x: f64) -> Result<Self> {
        if n_space < 3 {
            return Err(Error::InvalidGrid(format!(
                "n_space = {n_space}; at least 3 cells are needed for an interior probe"
            )));
        }
        if n_time == 0 {
            return Err(Error::InvalidGrid("n_time must be positive".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon {horizon} must be positive"
            )));
        }
        if !(probe_x > 0.0 && probe_x < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "probe_x = {probe_x} not in (0, 1)"
            )));
        }
        let dx = 1.0 / n_space as f64;
        let probe = (probe_x / dx - 0.5).round().max(0.0) as usize;
        if probe < 1 || probe + 2 > n_space {
            return Err(Error::InvalidGrid(format!(
                "probe_x = {probe_x} snaps to boundary cell {probe} of {n_space}"
            )));
        }
        Ok(Self {
            n_space,
            n_time,
            horizon,
            dx,
            dt: horizon / n_time as f64,
            probe,
        })
    }

    /// Grid whose time step is `courant * dx^2` (rounded so that `n_time`
    /// steps land exactly on `horizon`).
    pub fn with_courant(n_space: usize, courant: f64, horizon: f64, probe_x: f64) -> Result<Self> {
        if !(courant > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "courant number {courant} must be positive"
            )));
        }
        let dx = 1.0 / n_space.max(1) as f64;
        let n_time = (horizon / (courant * dx * dx)).ceil().max(1.0) as usize;
        Self::new(n_space, n_time, horizon, probe_x)
    }

    /// Rejects grids violating `dt <= dx^2 / 2`.
    pub fn check_explicit_stability(&self) -> Result<()> {
        let limit = 0.5 * self.dx * self.dx;
        // Relative slack absorbs the rounding in dt = T / n_time.
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Unstable { dt: self.dt, limit });
        }
        Ok(())
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }
    pub fn n_time(&self) -> usize {
        self.n_time
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn probe_index(&self) -> usize {
        self.probe
    }
    /// Position of the snapped probe node.
    pub fn probe_x(&self) -> f64 {
        self.node_x(self.probe)
    }
    pub fn node_x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Converts a time span into a whole number of steps, rejecting spans
    /// that are not (to 1e-9 relative) a multiple of `dt`.
    pub fn steps_for(&self, span: f64) -> Result<usize> {
        let raw = span / self.dt;
        let steps = raw.round();
        if !(span > 0.0) || (raw - steps).abs() > 1e-9 * raw.max(1.0) {
            return Err(Error::Domain(format!(
                "time span {span:e} is not a positive multiple of dt = {:e}",
                self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// One time step of noise: `n_space x d` independent `N(0, dt dx)` entries,
/// stored node-major (`values[j * d + l]`).
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSlice {
    n_space: usize,
    dim: usize,
    values: Vec<f64>,
}

impl NoiseSlice {
    pub fn zeros(n_space: usize, dim: usize) -> Self {
        Self {
            n_space,
            dim,
            values: vec![0.0; n_space * dim],
        }
    }
    pub fn n_space(&self) -> usize {
        self.n_space
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// Increments of node `j`, one per noise component.
    pub fn node(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }
}

/// Noise of step `step_index` for replication `seed`; a pure function of its
/// arguments.
pub fn sample_noise_step(
    grid: &SpaceTimeGrid,
    dim: usize,
    seed: SeedSpec,
    step_index: usize,
) -> Result<NoiseSlice> {
    if step_index >= grid.n_time() {
        return Err(Error::OutOfRange {
            what: "time step",
            index: step_index,
            limit: grid.n_time(),
        });
    }
    let mut slice = NoiseSlice::zeros(grid.n_space(), dim);
    let len = slice.values.len();
    GaussianStream::at_block(seed, Namespace::Noise, len, step_index as u64)
        .fill_scaled(&mut slice.values, (grid.dt() * grid.dx()).sqrt());
    Ok(slice)
}

/// Sequential reader producing the same slices as [`sample_noise_step`]
/// for steps `0, 1, 2, ...` without re-keying the generator.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    stream: GaussianStream,
    scale: f64,
}

impl NoiseStream {
    pub fn new(grid: &SpaceTimeGrid, seed: SeedSpec) -> Self {
        Self {
            stream: GaussianStream::new(seed, Namespace::Noise),
            scale: (grid.dt() * grid.dx()).sqrt(),
        }
    }

    pub fn next_into(&mut self, slice: &mut NoiseSlice) {
        self.stream.fill_scaled(&mut slice.values, self.scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(128, 64, 0.064, 0.5).unwrap()
    }

    #[test]
    fn probe_snaps_to_nearest_centre() {
        let g = SpaceTimeGrid::new(64, 10, 1.0, 0.5).unwrap();
        assert_eq!(g.probe_index(), 32);
        assert!((g.probe_x() - 0.5078125).abs() < 1e-15);
        let g = SpaceTimeGrid::new(10, 10, 1.0, 0.31).unwrap();
        assert_eq!(g.probe_index(), 3);
        assert!(SpaceTimeGrid::new(10, 10, 1.0, 0.02).is_err());
        assert!(SpaceTimeGrid::new(10, 10, 1.0, 0.99).is_err());
        assert!(SpaceTimeGrid::new(10, 10, 1.0, 1.0).is_err());
    }

    #[test]
    fn stability_rule() {
        let ok = SpaceTimeGrid::with_courant(64, 0.5, 0.25, 0.5).unwrap();
        assert!(ok.check_explicit_stability().is_ok());
        let bad = SpaceTimeGrid::new(64, 100, 0.25, 0.5).unwrap();
        assert!(matches!(
            bad.check_explicit_stability(),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn steps_for_rejects_off_grid_spans() {
        let g = SpaceTimeGrid::new(16, 1024, 1.0, 0.5).unwrap();
        assert_eq!(g.steps_for(0.25).unwrap(), 256);
        assert!(g.steps_for(0.0001).is_err());
        assert!(g.steps_for(-0.25).is_err());
    }

    #[test]
    fn out_of_range_step() {
        let g = grid();
        assert!(matches!(
            sample_noise_step(&g, 1, SeedSpec::new(1, 0), 64),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn deterministic_and_stream_consistent() {
        let g = grid();
        let seed = SeedSpec::new(11, 4);
        let a = sample_noise_step(&g, 2, seed, 5).unwrap();
        let b = sample_noise_step(&g, 2, seed, 5).unwrap();
        assert_eq!(a, b);
        let mut stream = NoiseStream::new(&g, seed);
        let mut s = NoiseSlice::zeros(g.n_space(), 2);
        for _ in 0..=5 {
            stream.next_into(&mut s);
        }
        assert_eq!(s, a);
    }

    #[test]
    fn pooled_variance_is_dt_dx() {
        // dt = 1e-3, dx = 1/128: variance 7.8125e-6.
        let g = SpaceTimeGrid::new(128, 8000, 8.0, 0.5).unwrap();
        assert!((g.dt() - 1e-3).abs() < 1e-18);
        let seed = SeedSpec::new(2024, 0);
        let mut stream = NoiseStream::new(&g, seed);
        let mut slice = NoiseSlice::zeros(128, 1);
        let (mut n, mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..7813 {
            stream.next_into(&mut slice);
            for &v in slice.values() {
                n += 1.0;
                s1 += v;
                s2 += v * v;
                s4 += v * v * v * v;
            }
        }
        assert!(n >= 1e6);
        let target = 7.8125e-6;
        let mean = s1 / n;
        let var = s2 / n - mean * mean;
        // Standard error of the sample variance from the fourth moment.
        let se = ((s4 / n - (s2 / n) * (s2 / n)) / n).sqrt();
        assert!((var - target).abs() < 3.0 * se, "var {var} se {se}");
        assert!(mean.abs() < 4.0 * (target / n).sqrt());
    }

    #[test]
    fn distinct_cells_uncorrelated() {
        let g = SpaceTimeGrid::new(4, 100_000, 100.0, 0.5).unwrap();
        let mut stream = NoiseStream::new(&g, SeedSpec::new(5, 0));
        let mut slice = NoiseSlice::zeros(4, 1);
        let var = g.dt() * g.dx();
        let (mut sxy, mut n) = (0.0, 0.0);
        for _ in 0..100_000 {
            stream.next_into(&mut slice);
            sxy += slice.values()[1] * slice.values()[2];
            n += 1.0;
        }
        let corr = sxy / n / var;
        assert!(corr.abs() < 4.0 / n.sqrt(), "corr {corr}");
    }

    #[test]
    fn replication_streams_uncorrelated() {
        let g = SpaceTimeGrid::new(64, 1000, 1.0, 0.5).unwrap();
        let mut a = NoiseStream::new(&g, SeedSpec::new(8, 0));
        let mut b = NoiseStream::new(&g, SeedSpec::new(8, 1));
        let mut sa = NoiseSlice::zeros(64, 1);
        let mut sb = NoiseSlice::zeros(64, 1);
        let (mut sxy, mut n) = (0.0, 0.0);
        let var = g.dt() * g.dx();
        for _ in 0..1000 {
            a.next_into(&mut sa);
            b.next_into(&mut sb);
            for (x, y) in sa.values().iter().zip(sb.values()) {
                sxy += x * y;
                n += 1.0;
            }
        }
        assert!((sxy / n / var).abs() < 4.0 / n.sqrt());
    }
}
