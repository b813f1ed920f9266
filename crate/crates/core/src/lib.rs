//! Functional autoencoders for discretely observed functional data.
//!
//! The crate bundles everything needed to learn low-dimensional
//! representations of curves sampled on regular or irregular grids:
//!
//! - [`basis`]: B-spline and Fourier basis systems, design and Gram matrices.
//! - [`quadrature`]: trapezoidal integration weights per observation grid.
//! - [`nncore`]: dense layers, reverse-mode gradients and first-order optimizers.
//! - [`fae`]: the functional autoencoder (feature layer, hidden stack,
//!   coefficient layer) and its penalized training.
//! - [`fpca`]: functional principal component analysis baseline.
//! - [`baseline_ae`]: classic dense autoencoder on masked discretized curves.
//! - [`simgen`]: Gaussian-mixture driven synthetic functional datasets.
//! - [`eval`]: prediction error, logistic-regression classification, splits
//!   and replicated experiment pipelines.
//!
//! The crate is `no_std` (it needs `alloc`). All floating point math goes
//! through `libm`, so results do not depend on the platform libc.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod baseline_ae;
pub mod basis;
pub mod error;
pub mod eval;
pub mod fae;
pub mod fpca;
pub mod linalg;
pub mod math;
pub mod nncore;
pub mod quadrature;
pub mod sample;
pub mod simgen;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use sample::FunctionalSample;
