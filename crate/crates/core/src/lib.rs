//! Normalization toolkit for attribute-embedding zero-shot classifiers.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the precision for typical use.

pub mod czsl;
pub mod error;
pub mod init;
pub mod linalg;
pub mod logits;
pub mod nn;
pub mod norm;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod theory;
pub mod variance_lab;
pub mod zsl;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use rng::Rng;
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Embedder64 = nn::Embedder<f64>;
pub type Embedder32 = nn::Embedder<f32>;
