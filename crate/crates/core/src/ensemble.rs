//! Replication ensembles. Replication `r` always uses `SeedSpec(base_seed, r)`,
//! so an ensemble is identical whatever executor produced it.

use alloc::vec::Vec;

use crate::coeffs::Coefficients;
use crate::exec::Executor;
use crate::noise::{SeedSpec, SpaceTimeGrid};
use crate::oracle::{simulate_linear_path, SpectralConfig};
use crate::path::PathSample;
use crate::solver::simulate_path;
use crate::Result;

/// Solver ensemble; on failure, the error of the lowest failing replication.
pub fn solver_ensemble<C, E>(
    coeffs: &C,
    grid: &SpaceTimeGrid,
    base_seed: u64,
    n_reps: usize,
    exec: &E,
) -> Result<Vec<PathSample>>
where
    C: Coefficients + ?Sized,
    E: Executor,
{
    grid.check_explicit_stability()?;
    exec.map(n_reps, |r| {
        simulate_path(coeffs, grid, SeedSpec::new(base_seed, r as u64))
    })
    .into_iter()
    .collect()
}

/// Gaussian-oracle ensemble of the additive linear system in dimension `dim`.
pub fn oracle_ensemble<E: Executor>(
    grid: &SpaceTimeGrid,
    dim: usize,
    base_seed: u64,
    n_reps: usize,
    exec: &E,
) -> Result<Vec<PathSample>> {
    let cfg = SpectralConfig::new(*grid, dim, SeedSpec::new(base_seed, 0))?;
    Ok(exec.map(n_reps, |r| {
        simulate_linear_path(&cfg.with_replication(r as u64))
    }))
}
