//! Networks with hand-written backward passes.

pub mod class_norm;
pub mod embedder;
pub mod layers;
pub mod optim;
pub mod plain;

pub use class_norm::{ClassNorm, ClassNormCache, Mode, DEFAULT_MOMENTUM};
pub use embedder::{Embedder, EmbedderCache, EmbedderConfig};
pub use layers::{Activation, Dense, LayerSpec, Mlp, MlpCache, MlpGrads};
pub use optim::{clip_global_norm, AdamState, Optimizer, OptimizerKind, SgdState};
pub use plain::PlainClassifier;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Anything exposing an ordered list of trainable matrices.
pub trait Parameterized<T: Scalar> {
    fn parameters(&self) -> Vec<&Matrix<T>>;

    /// Mutable access; implementations invalidate cached activations.
    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>>;

    fn param_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }
}

/// One gradient matrix per parameter, in parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTape<T> {
    grads: Vec<Matrix<T>>,
}

impl<T: Scalar> GradientTape<T> {
    pub fn new(grads: Vec<Matrix<T>>) -> Self {
        Self { grads }
    }

    pub fn zeros_like(params: &[&Matrix<T>]) -> Self {
        Self {
            grads: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix<T>> + '_ {
        self.grads.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Matrix<T>> + '_ {
        self.grads.iter_mut()
    }

    pub fn into_inner(self) -> Vec<Matrix<T>> {
        self.grads
    }

    /// L2 norm over every entry of every gradient.
    pub fn global_norm(&self) -> T {
        self.grads.iter().map(|g| g.sum_sq()).sum::<T>().sqrt()
    }

    pub fn scale_in_place(&mut self, alpha: T) {
        for g in &mut self.grads {
            g.scale_in_place(alpha);
        }
    }

    pub fn entry_count(&self) -> usize {
        self.grads.iter().map(|g| g.len()).sum()
    }

    /// Errors unless shapes match `params` one to one.
    pub fn check_shapes(&self, params: &[&mut Matrix<T>]) -> Result<()> {
        if self.grads.len() != params.len() {
            return Err(Error::dim(format!(
                "{} gradients for {} parameters",
                self.grads.len(),
                params.len()
            )));
        }
        for (i, (g, p)) in self.grads.iter().zip(params).enumerate() {
            if g.shape() != p.shape() {
                return Err(Error::dim(format!(
                    "gradient {i} is {:?}, parameter is {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
        }
        Ok(())
    }
}

impl<T> std::ops::Index<usize> for GradientTape<T> {
    type Output = Matrix<T>;

    fn index(&self, i: usize) -> &Matrix<T> {
        &self.grads[i]
    }
}
