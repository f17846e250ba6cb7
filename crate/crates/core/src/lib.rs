//! Quantum feature-map kernels and their spectral analysis.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! * [`quantum`]: dense statevector and density-matrix algebra (gates,
//!   Haar-random unitaries, partial trace, purity, Hilbert–Schmidt products).
//! * [`kernels`]: the cosine product kernel, simulated full and projected
//!   ("biased") quantum kernels, the RBF baseline, Gram assembly, centering
//!   and shot-noise estimation.
//! * [`spectral`]: mean density matrices, the vectorized second-moment
//!   operator of the kernel integral operator and its eigendecomposition,
//!   product spectra and empirical Gram spectra.
//! * [`learn`]: kernel ridge regression and alignment diagnostics.
//! * [`experiments`]: seeded data generation and the experiment cells whose
//!   rows are written out by the `qkl` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod experiments;
pub mod kernels;
pub mod learn;
pub mod linalg;
pub mod quantum;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
