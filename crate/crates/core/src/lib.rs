//! Tomographic reconstruction by mollification.
//!
//! The reconstruction target is not the object `f0` itself but a smoothed
//! version `C f0`, where `C` is a Hann-windowed low-pass convolution. When the
//! projector `R` is a realistic model (here, a Radon projector with a
//! depth-dependent detector blur), no operator `X` satisfies `R C = X R`
//! exactly, and the data is instead preprocessed with the minimum Frobenius
//! norm solution `X = R C R†`. The pseudo-inverse application `R† g` is
//! computed with a proximal point iteration, after which the variational
//! problem
//!
//! ```text
//! minimize  ½‖R C R† g − R f‖² + (α/2)‖(I − C) f‖²
//! ```
//!
//! is solved by conjugate gradients.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the companion `mollify` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod fourier;
pub mod krylov;
pub mod linalg;
pub mod operators;
pub mod preprocessing;
pub mod proximal;
pub mod pseudoinverse;
pub mod reconstruction;
pub mod rng;
pub mod simulation;
pub mod vector;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use operators::{
    GeometryConfig, HighPass, Identity, ImageGrid, LinearMap, Mollifier, MollifierSpec,
    RadonProjector, Sinogram,
};
