//! PnP-ADMM with exact analytic MMSE denoisers.
//!
//! Gaussian and Gaussian-mixture priors give denoisers whose implicit
//! regularizer, Lipschitz constant and mismatch distance are all computable,
//! so the convergence inequalities of the method can be checked iterate by
//! iterate. The same solver runs practical super-resolution and deblurring
//! problems on PGM/PPM images.

// `!(x > 0.0)` rejects NaN as well; keep that form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod canonical;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod image;
pub mod operators;
pub mod pnm;
pub mod priors;
pub mod solver;

pub use error::{Error, PnmError, Result};
pub use image::{gaussian_noise, ImageBuffer, Rng, Shape};
