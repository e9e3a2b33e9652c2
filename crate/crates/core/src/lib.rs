//! Exact numerics for the supersymmetric M₁ lattice model and its
//! Rydberg-dressed quantum simulator.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`] enumerates constrained fermion and Rydberg product bases.
//! * [`operators`] assembles the supercharge, `H_Q`, local densities,
//!   kink detectors and the Rydberg Hamiltonian as sparse matrices.
//! * [`spectra`] diagonalizes them and extracts the one-kink band.
//! * [`kinkdyn`] builds localized kinks, runs quenches and sweeps.
//! * [`analytic`] holds the continuum dispersion, saddle-point overlaps
//!   and coherence budgets.
//! * [`dressing`] evaluates and designs Rydberg-dressed potentials.
//!
//! Grid-shaped workloads go through [`exec::Exec`], which runs on rayon
//! when the `parallel` feature is on and sequentially otherwise.

pub mod analytic;
pub mod dressing;
pub mod error;
pub mod exec;
pub mod hilbert;
pub mod kinkdyn;
pub mod linalg;
pub mod operators;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;
