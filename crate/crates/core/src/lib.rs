//! Discourse-state features and probabilistic emotion/volume forecasting for
//! social-movement corpora.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); file formats
//! and the end-to-end pipeline use `f64`.

// Guards like `!(w >= 0)` are written negated on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod config;
pub mod corpus;
mod error;
pub mod evaluation;
pub mod features;
pub mod forecast;
mod parallel;
pub mod pipeline;
mod scalar;
pub mod special;
pub mod stats;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision theme matrix.
pub type ThemeMatrix64 = features::ThemeMatrix<f64>;
/// Single-precision theme matrix.
pub type ThemeMatrix32 = features::ThemeMatrix<f32>;
