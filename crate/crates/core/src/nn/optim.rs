use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::GradientTape;
use crate::scalar::Scalar;

/// Adam with bias correction. Moment buffers are allocated on the first step.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr: f64,
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8).expect("default Adam constants are valid")
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::config(format!("Adam betas must lie in [0, 1), got {beta1}, {beta2}")));
        }
        if !(epsilon > 0.0) || !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::config(format!("invalid Adam epsilon {epsilon} or lr {lr}")));
        }
        Ok(Self {
            step: 0,
            beta1,
            beta2,
            epsilon,
            lr,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn step(&mut self, mut params: Vec<&mut Matrix<T>>, grads: &GradientTape<T>) -> Result<()> {
        grads.check_shapes(&params)?;
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
            self.second = self.first.clone();
        } else if self.first.iter().zip(grads.iter()).any(|(m, g)| m.shape() != g.shape())
            || self.first.len() != grads.len()
        {
            return Err(Error::dim("gradient shapes changed between Adam steps"));
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let c1 = T::lit(1.0 - self.beta1.powi(t));
        let c2 = T::lit(1.0 - self.beta2.powi(t));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.epsilon);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let pairs = p.as_mut_slice().iter_mut().zip(g.as_slice());
            for ((pv, &gv), (mv, vv)) in pairs.zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice())) {
                *mv = b1 * *mv + (T::one() - b1) * gv;
                *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Classical momentum SGD: `v ← μ·v + g`, `θ ← θ − lr·v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdState<T> {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Matrix<T>>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) || !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::config(format!("invalid SGD lr {lr} or momentum {momentum}")));
        }
        Ok(Self {
            lr,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn step(&mut self, mut params: Vec<&mut Matrix<T>>, grads: &GradientTape<T>) -> Result<()> {
        grads.check_shapes(&params)?;
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
        } else if self.velocity.len() != grads.len() {
            return Err(Error::dim("gradient count changed between SGD steps"));
        }
        let mu = T::lit(self.momentum);
        let lr = T::lit(self.lr);
        for ((p, g), vel) in params.iter_mut().zip(grads.iter()).zip(&mut self.velocity) {
            if vel.shape() != g.shape() {
                return Err(Error::dim("gradient shapes changed between SGD steps"));
            }
            let pairs = p.as_mut_slice().iter_mut().zip(g.as_slice());
            for ((pv, &gv), vv) in pairs.zip(vel.as_mut_slice()) {
                *vv = mu * *vv + gv;
                *pv -= lr * *vv;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::config(format!("unknown optimizer '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer<T> {
    Adam(AdamState<T>),
    Sgd(SgdState<T>),
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64) -> Result<Self> {
        Ok(match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::with_betas(lr, 0.9, 0.999, 1e-8)?),
            OptimizerKind::Sgd => Optimizer::Sgd(SgdState::new(lr, momentum)?),
        })
    }

    pub fn step(&mut self, params: Vec<&mut Matrix<T>>, grads: &GradientTape<T>) -> Result<()> {
        match self {
            Optimizer::Adam(s) => s.step(params, grads),
            Optimizer::Sgd(s) => s.step(params, grads),
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            Optimizer::Adam(s) => s.lr,
            Optimizer::Sgd(s) => s.lr,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        match self {
            Optimizer::Adam(s) => s.lr = lr,
            Optimizer::Sgd(s) => s.lr = lr,
        }
    }
}

/// Rescales `grads` so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut GradientTape<T>, max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::config(format!("clip norm must be positive, got {max_norm}")));
    }
    let norm = grads.global_norm().as_f64();
    if norm > max_norm {
        grads.scale_in_place(T::lit(max_norm / norm));
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix<f64> {
        Matrix::filled(1, 1, v)
    }

    fn tape(g: f64) -> GradientTape<f64> {
        GradientTape::new(vec![scalar(g)])
    }

    #[test]
    fn adam_zero_gradient() {
        let mut p = scalar(2.5);
        let mut adam = AdamState::new(0.1);
        adam.step(vec![&mut p], &tape(0.0)).unwrap();
        assert_eq!(p[(0, 0)], 2.5);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn adam_first_step_is_lr() {
        let mut p = scalar(0.0);
        let mut adam = AdamState::new(0.1);
        adam.step(vec![&mut p], &tape(1.0)).unwrap();
        assert!((p[(0, 0)] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_moves_against_gradient_sign() {
        let mut p = scalar(0.0);
        let mut adam = AdamState::new(0.01);
        adam.step(vec![&mut p], &tape(-3.0)).unwrap();
        let first = p[(0, 0)];
        adam.step(vec![&mut p], &tape(-3.0)).unwrap();
        assert!(first > 0.0 && p[(0, 0)] > first);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut p = Matrix::<f64>::zeros(2, 2);
        let mut adam = AdamState::new(0.1);
        assert!(matches!(adam.step(vec![&mut p], &tape(1.0)), Err(Error::Dimension(_))));
    }

    #[test]
    fn sgd_plain_and_momentum() {
        let mut p = scalar(1.0);
        let mut sgd = SgdState::new(0.1, 0.0).unwrap();
        sgd.step(vec![&mut p], &tape(0.0)).unwrap();
        assert_eq!(p[(0, 0)], 1.0);
        sgd.step(vec![&mut p], &tape(2.0)).unwrap();
        assert_eq!(p[(0, 0)], 1.0 - 0.1 * 2.0);

        let mut p = scalar(0.0);
        let mut sgd = SgdState::new(0.1, 0.9).unwrap();
        for _ in 0..3 {
            sgd.step(vec![&mut p], &tape(1.0)).unwrap();
        }
        // Velocities 1, 1.9, 2.71.
        assert!((p[(0, 0)] + 0.1 * (1.0 + 1.9 + 2.71)).abs() < 1e-12);
    }

    #[test]
    fn clipping() {
        let mut g = GradientTape::<f64>::new(vec![Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap()]);
        let n = clip_global_norm(&mut g, 1.0).unwrap();
        assert_eq!(n, 5.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-15);
        let mut g = tape(0.5);
        clip_global_norm(&mut g, 1.0).unwrap();
        assert_eq!(g[0][(0, 0)], 0.5);
    }
}
