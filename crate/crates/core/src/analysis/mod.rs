//! Statistical diagnostics computed from frozen ensembles of probe paths,
//! plus a deterministic check of the simplex-integral identity.

pub mod charfn;
pub mod density;
pub mod ehm;
pub mod holder;
pub mod smallball;

pub use crate::stats::ExponentFit;
