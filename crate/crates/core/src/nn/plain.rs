use crate::error::{Error, Result};
use crate::init::InitScheme;
use crate::linalg::Matrix;
use crate::nn::layers::{Activation, LayerSpec, Mlp, MlpCache};
use crate::nn::{GradientTape, Parameterized};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Ordinary feature classifier `z ↦ logits`, an MLP with ReLU hidden layers.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainClassifier<T> {
    mlp: Mlp<T>,
}

impl<T: Scalar> PlainClassifier<T> {
    /// `n_layers` dense layers: `d_z → d_h → … → d_h → n_classes`.
    pub fn init(
        d_z: usize,
        d_h: usize,
        n_classes: usize,
        n_layers: usize,
        init: InitScheme,
        rng: &mut Rng,
    ) -> Result<Self> {
        if n_layers == 0 {
            return Err(Error::config("plain classifier needs at least one layer"));
        }
        let specs: Vec<LayerSpec> = (0..n_layers)
            .map(|i| LayerSpec {
                in_dim: if i == 0 { d_z } else { d_h },
                out_dim: if i + 1 == n_layers { n_classes } else { d_h },
                activation: if i + 1 == n_layers {
                    Activation::Identity
                } else {
                    Activation::Relu
                },
                init,
            })
            .collect();
        Ok(Self {
            mlp: Mlp::init(&specs, rng)?,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.mlp.out_dim().unwrap_or(0)
    }

    pub fn forward(&self, z: &Matrix<T>) -> Result<(Matrix<T>, MlpCache<T>)> {
        self.mlp.forward(z)
    }

    pub fn predict(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        self.mlp.predict(z)
    }

    pub fn backward(&self, cache: &MlpCache<T>, d_logits: &Matrix<T>) -> Result<GradientTape<T>> {
        let g = self.mlp.backward(cache, d_logits)?;
        let mut grads = Vec::with_capacity(2 * g.layers.len());
        for (dw, db) in g.layers {
            grads.push(dw);
            grads.push(db);
        }
        Ok(GradientTape::new(grads))
    }
}

impl<T: Scalar> Parameterized<T> for PlainClassifier<T> {
    fn parameters(&self) -> Vec<&Matrix<T>> {
        self.mlp.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>> {
        self.mlp
            .layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}
