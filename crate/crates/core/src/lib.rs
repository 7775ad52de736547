//! Covariant linear operators for time-varying signals on directed graphs.
//!
//! A generator `S` is a finite-support Laurent (block-Toeplitz) operator on
//! sequences of node vectors. Filters that commute with `S` are built in the
//! frequency domain from the per-frequency Jordan decomposition of the
//! symbol `Ŝ(ω)`, either by applying a scalar function along tracked
//! eigenvalue branches or by a resolvent contour integral.
//!
//! Module map:
//! - [`kernel`], [`signal`]: time-domain types and exact operator action.
//! - [`transform`]: Fourier pair on signals, kernel symbols, frequency-domain action.
//! - [`spectral`]: point decompositions, branch tracking, spectrum locus, regions.
//! - [`calculus`]: scalar-function filters (spectral and contour paths).
//! - [`product`]: Cartesian-product baseline and model comparison.
//! - [`learn`]: least-squares fitting of filter parameters.
//! - [`cli`]: the `covgraph` command-line surface.

pub mod calculus;
pub mod cli;
pub mod error;
pub mod io;
pub mod kernel;
pub mod learn;
pub mod linalg;
pub mod product;
pub mod signal;
pub mod spectral;
pub mod transform;

pub use error::{Error, Result};
pub use kernel::KernelSequence;
pub use linalg::{CMatrix, CVector};
pub use signal::Signal;
pub use transform::{FrequencyGrid, FrequencySignal, FrequencyTable, Window};

pub use num_complex::Complex64;
