//! Numerical core for simulating systems of stochastic heat equations on
//! `[0, T] x [0, 1]` driven by space-time white noise, and for estimating
//! the local times of the solution observed at a fixed interior point.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and seeds; IO, configuration and thread pools
//! live in the `ocpa` companion crate, which plugs a parallel
//! [`exec::Executor`] into the ensemble-level routines.
//!
//! Module map:
//! - [`noise`]: grids, seeds and white-noise increments.
//! - [`kernel`]: the Neumann heat kernel and exact second moments of the
//!   additive linear system.
//! - [`oracle`]: exact spectral simulation of the additive linear system.
//! - [`coeffs`], [`solver`]: coefficient sets and the finite-difference solver.
//! - [`occupation`]: occupation densities, Fourier functionals, Sobolev energy.
//! - [`analysis`]: exponent fits, small-ball criterion, characteristic
//!   functions, increment densities and the simplex-integral identity.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![deny(unsafe_code)]
// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod coeffs;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod kernel;
pub mod noise;
pub mod occupation;
pub mod oracle;
pub mod path;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use noise::{SeedSpec, SpaceTimeGrid};
pub use path::PathSample;
