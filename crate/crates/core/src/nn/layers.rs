use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{sample_init, InitScheme};
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Identity => x,
        }
    }

    /// Derivative at `x`; ReLU uses 0 at the kink.
    #[inline]
    fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu if x > T::zero() => T::one(),
            Activation::Relu => T::zero(),
            Activation::Identity => T::one(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::config(format!("unknown activation '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub init: InitScheme,
}

/// Fully connected layer `y = act(x·W + b)` with `W` stored `in_dim × out_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub spec: LayerSpec,
    pub weight: Matrix<T>,
    /// `1 × out_dim`.
    pub bias: Matrix<T>,
}

impl<T: Scalar> Dense<T> {
    /// Weights drawn from `spec.init`, biases zero.
    pub fn init(spec: LayerSpec, rng: &mut Rng) -> Result<Self> {
        if spec.in_dim == 0 || spec.out_dim == 0 {
            return Err(Error::config("layer dimensions must be positive"));
        }
        let weight = sample_init(spec.init, spec.in_dim, spec.out_dim, Some(spec.in_dim), rng)?;
        Ok(Self {
            spec,
            weight,
            bias: Matrix::zeros(1, spec.out_dim),
        })
    }

    fn pre_activation(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut pre = x.matmul(&self.weight)?;
        pre.add_row_broadcast(self.bias.as_slice())?;
        Ok(pre)
    }
}

/// Stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

/// Activations kept by [`Mlp::forward`].
#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    inputs: Vec<Matrix<T>>,
    pre: Vec<Matrix<T>>,
}

/// Per-layer `(dW, db)` plus the gradient with respect to the network input.
pub struct MlpGrads<T> {
    pub layers: Vec<(Matrix<T>, Matrix<T>)>,
    pub input: Matrix<T>,
}

impl<T: Scalar> Mlp<T> {
    pub fn init(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        for pair in specs.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::config(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        let layers = specs
            .iter()
            .map(|&s| Dense::init(s, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> Option<usize> {
        self.layers.first().map(|l| l.spec.in_dim)
    }

    pub fn out_dim(&self) -> Option<usize> {
        self.layers.last().map(|l| l.spec.out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, MlpCache<T>)> {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut cur = x.clone();
        for layer in &self.layers {
            let pre = layer.pre_activation(&cur)?;
            let act = layer.spec.activation;
            let out = pre.map(|v| act.apply(v));
            cache.inputs.push(cur);
            cache.pre.push(pre);
            cur = out;
        }
        Ok((cur, cache))
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut cur = x.clone();
        for layer in &self.layers {
            let act = layer.spec.activation;
            cur = layer.pre_activation(&cur)?.map(|v| act.apply(v));
        }
        Ok(cur)
    }

    pub fn backward(&self, cache: &MlpCache<T>, d_out: &Matrix<T>) -> Result<MlpGrads<T>> {
        if cache.pre.len() != self.layers.len() {
            return Err(Error::State("cache does not match network depth".into()));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[i];
            if pre.shape() != delta.shape() {
                return Err(Error::dim(format!(
                    "layer {i} gradient {:?} vs activation {:?}",
                    delta.shape(),
                    pre.shape()
                )));
            }
            let act = layer.spec.activation;
            if act != Activation::Identity {
                for (d, &p) in delta.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    *d *= act.derivative(p);
                }
            }
            let dw = cache.inputs[i].t_matmul(&delta)?;
            let db = Matrix::row_vector(&delta.col_sums());
            let dx = delta.matmul_t(&layer.weight)?;
            grads.push((dw, db));
            delta = dx;
        }
        grads.reverse();
        Ok(MlpGrads {
            layers: grads,
            input: delta,
        })
    }
}
