//! Probe-point trajectories.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::noise::SeedSpec;
use crate::{Error, Result};

/// One realization of `t -> u(t, x*)` on a uniform time grid.
///
/// `states` is row-major with `n_time + 1` rows of `dim` values; row `i`
/// is the state at time `i * dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    dim: usize,
    dt: f64,
    states: Vec<f64>,
    seed: Option<SeedSpec>,
    tag: String,
}

impl PathSample {
    pub fn new(
        dim: usize,
        dt: f64,
        states: Vec<f64>,
        seed: Option<SeedSpec>,
        tag: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || !(dt > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "path needs dim >= 1 and dt > 0 (got {dim}, {dt})"
            )));
        }
        if states.len() % dim != 0 || states.len() < 2 * dim {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} state values do not form at least two rows of width {dim}",
                states.len()
            )));
        }
        if let Some(bad) = states.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(alloc::format!(
                "non-finite state at row {}",
                bad / dim
            )));
        }
        Ok(Self {
            dim,
            dt,
            states,
            seed,
            tag: tag.into(),
        })
    }

    /// Synthetic path sampling `f(t)` at `t = i * dt`, `i = 0..=n_time`.
    pub fn from_fn<F>(dim: usize, dt: f64, n_time: usize, tag: &str, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, &mut [f64]),
    {
        let mut states = alloc::vec![0.0; (n_time + 1) * dim];
        for (i, row) in states.chunks_exact_mut(dim).enumerate() {
            f(i as f64 * dt, row);
        }
        Self::new(dim, dt, states, None, tag)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    /// Number of time steps (rows minus one).
    pub fn n_time(&self) -> usize {
        self.states.len() / self.dim - 1
    }
    pub fn horizon(&self) -> f64 {
        self.n_time() as f64 * self.dt
    }
    pub fn states(&self) -> &[f64] {
        &self.states
    }
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }
    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(self.dim)
    }
    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }
    pub fn tag(&self) -> &str {
        &self.tag
    }
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_time()).map(move |i| i as f64 * self.dt)
    }

    /// Converts a time span into a step count; the span must be a multiple
    /// of `dt` to within `1e-9` relative.
    pub fn steps_for(&self, span: f64) -> Result<usize> {
        let raw = span / self.dt;
        let steps = raw.round();
        if !(span > 0.0) || (raw - steps).abs() > 1e-9 * raw.max(1.0) {
            return Err(Error::Domain(alloc::format!(
                "time span {span:e} is not a positive multiple of dt = {:e}",
                self.dt
            )));
        }
        Ok(steps as usize)
    }
}
