//! Exact simulation of the additive linear system `du = u'' dt + dW`
//! (identity dispersion, zero drift) at the probe point.
//!
//! In the cosine basis `e_0 = 1`, `e_k = sqrt(2) cos(k pi x)` each mode is an
//! independent Ornstein-Uhlenbeck process with rate `lambda_k = (k pi)^2`,
//! sampled by its exact transition. Modes `k >= K` are chosen so that
//! `exp(-lambda_K dt) < 1e-12`: they decorrelate completely within a step,
//! so their joint contribution at each grid time is an independent centred
//! Gaussian whose variance is the closed-form remainder
//! `(1/3 - x + x^2 - sum_{k<K} e_k(x)^2 / lambda_k) / 2`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::noise::{SeedSpec, SpaceTimeGrid};
use crate::path::PathSample;
use crate::rng::{GaussianStream, Namespace};
use crate::{Error, Result};

pub const DEFAULT_MODES: usize = 256;
/// Largest admissible `exp(-lambda_K dt)` for the first unresolved mode.
const DECORRELATION: f64 = 1e-12;

/// Smallest `K` with `exp(-(K pi)^2 dt) < 1e-12`.
pub fn required_modes(dt: f64) -> usize {
    ((-DECORRELATION.ln() / dt).sqrt() / PI).floor() as usize + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralConfig {
    grid: SpaceTimeGrid,
    dim: usize,
    modes: usize,
    seed: SeedSpec,
}

impl SpectralConfig {
    /// Uses `max(256, required_modes(dt))` rounded up to a power of two.
    pub fn new(grid: SpaceTimeGrid, dim: usize, seed: SeedSpec) -> Result<Self> {
        let modes = DEFAULT_MODES
            .max(required_modes(grid.dt()))
            .next_power_of_two();
        Self::with_modes(grid, dim, modes, seed)
    }

    pub fn with_modes(
        grid: SpaceTimeGrid,
        dim: usize,
        modes: usize,
        seed: SeedSpec,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "oracle dimension must be positive".into(),
            ));
        }
        let need = required_modes(grid.dt());
        if modes < need {
            return Err(Error::InvalidParameter(format!(
                "{modes} oracle modes do not decorrelate within dt = {:e}; need at least {need}",
                grid.dt()
            )));
        }
        Ok(Self {
            grid,
            dim,
            modes,
            seed,
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn modes(&self) -> usize {
        self.modes
    }
    pub fn seed(&self) -> SeedSpec {
        self.seed
    }
    pub fn with_replication(&self, replication: u64) -> Self {
        let mut c = self.clone();
        c.seed.replication = replication;
        c
    }
}

/// Per-mode transition coefficients at the probe point.
struct ModeTable {
    decay: Vec<f64>,
    /// `sqrt((1 - exp(-2 lambda dt)) / (2 lambda)) * e_k(x)`.
    kick: Vec<f64>,
    weight: Vec<f64>,
    tail_sd: f64,
    zero_sd: f64,
}

impl ModeTable {
    fn new(cfg: &SpectralConfig) -> Self {
        let dt = cfg.grid.dt();
        let x = cfg.grid.probe_x();
        let m = cfg.modes - 1;
        let mut decay = Vec::with_capacity(m);
        let mut kick = Vec::with_capacity(m);
        let mut weight = Vec::with_capacity(m);
        let mut resolved = 0.0;
        for k in 1..cfg.modes {
            let kpi = k as f64 * PI;
            let lambda = kpi * kpi;
            let e = 2f64.sqrt() * (kpi * x).cos();
            decay.push((-lambda * dt).exp());
            kick.push((-(-2.0 * lambda * dt).exp_m1() / (2.0 * lambda)).sqrt());
            weight.push(e);
            resolved += e * e / lambda;
        }
        let tail = 0.5 * (1.0 / 3.0 - x + x * x - resolved);
        Self {
            decay,
            kick,
            weight,
            tail_sd: tail.max(0.0).sqrt(),
            zero_sd: dt.sqrt(),
        }
    }
}

/// Probe trajectory of the additive linear system.
pub fn simulate_linear_path(cfg: &SpectralConfig) -> PathSample {
    let table = ModeTable::new(cfg);
    let d = cfg.dim;
    let n_time = cfg.grid.n_time();
    let m = table.decay.len();
    let mut stream = GaussianStream::new(cfg.seed, Namespace::Oracle);
    let mut amps = vec![0.0; d * m];
    let mut zero = vec![0.0; d];
    // Per coordinate and step: m OU kicks, one constant-mode kick, one tail draw.
    let mut z = vec![0.0; d * (m + 2)];
    let mut states = vec![0.0; (n_time + 1) * d];
    for i in 1..=n_time {
        stream.fill(&mut z);
        for k in 0..d {
            let zk = &z[k * (m + 2)..(k + 1) * (m + 2)];
            let a = &mut amps[k * m..(k + 1) * m];
            let mut value = 0.0;
            for j in 0..m {
                a[j] = table.decay[j] * a[j] + table.kick[j] * zk[j];
                value += table.weight[j] * a[j];
            }
            zero[k] += table.zero_sd * zk[m];
            states[i * d + k] = zero[k] + value + table.tail_sd * zk[m + 1];
        }
    }
    PathSample::new(d, cfg.grid.dt(), states, Some(cfg.seed), "linear")
        .expect("oracle states are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{linear_increment_variance, KernelConfig};
    use crate::stats::{mean, variance};

    #[test]
    fn mode_requirement() {
        let dt = 1.0 / 4096.0;
        let k = required_modes(dt);
        let lambda = |k: usize| (k as f64 * PI).powi(2);
        assert!((-lambda(k) * dt).exp() < DECORRELATION);
        assert!((-lambda(k - 1) * dt).exp() >= DECORRELATION);
        let grid = SpaceTimeGrid::new(128, 4096, 1.0, 0.5).unwrap();
        assert!(SpectralConfig::with_modes(grid, 1, k - 1, SeedSpec::new(0, 0)).is_err());
        assert_eq!(
            SpectralConfig::new(grid, 1, SeedSpec::new(0, 0))
                .unwrap()
                .modes(),
            256
        );
    }

    #[test]
    fn starts_at_zero_and_is_deterministic() {
        let grid = SpaceTimeGrid::new(64, 100, 0.1, 0.5).unwrap();
        let cfg = SpectralConfig::new(grid, 2, SeedSpec::new(3, 1)).unwrap();
        let a = simulate_linear_path(&cfg);
        assert_eq!(a.state(0), &[0.0, 0.0]);
        assert_eq!(a, simulate_linear_path(&cfg));
        assert_ne!(a, simulate_linear_path(&cfg.with_replication(2)));
    }

    #[test]
    fn marginal_variance_and_independence() {
        let grid = SpaceTimeGrid::new(128, 40, 0.1, 0.5).unwrap();
        let cfg = SpectralConfig::new(grid, 2, SeedSpec::new(11, 0)).unwrap();
        let reps = 10_000;
        let mut u1 = Vec::with_capacity(reps);
        let mut u2 = Vec::with_capacity(reps);
        for r in 0..reps {
            let p = simulate_linear_path(&cfg.with_replication(r as u64));
            u1.push(p.state(40)[0]);
            u2.push(p.state(40)[1]);
        }
        let exact =
            linear_increment_variance(0.0, 0.1, grid.probe_x(), &KernelConfig::default()).unwrap();
        // Standard error of the sample variance of a Gaussian: v sqrt(2/(n-1)).
        let se = exact * (2.0 / (reps as f64 - 1.0)).sqrt();
        assert!(
            (variance(&u1) - exact).abs() < 3.0 * se,
            "{} vs {exact}",
            variance(&u1)
        );
        let (m1, m2) = (mean(&u1), mean(&u2));
        let cov: f64 = u1
            .iter()
            .zip(&u2)
            .map(|(a, b)| (a - m1) * (b - m2))
            .sum::<f64>()
            / (reps as f64 - 1.0);
        assert!(cov.abs() < 4.0 * exact / (reps as f64).sqrt());
    }
}
