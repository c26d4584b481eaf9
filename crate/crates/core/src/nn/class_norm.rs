//! Class-wise standardization of hidden representations.
//!
//! During training each hidden dimension is standardized over the class axis
//! of the embedded attribute matrix, `(h − μ) / sqrt(σ² + ε)`, with population
//! statistics. Batch statistics are folded into running estimates by an
//! exponential moving average which evaluation mode uses instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::norm::{column_moments, STD_EPSILON};
use crate::scalar::Scalar;

/// Default weight of the newest batch in the running-statistics average.
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassNorm<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    /// Weight of the newest batch, in `(0, 1]`.
    pub momentum: f64,
    pub epsilon: f64,
}

/// Values needed to back-propagate through one standardization.
#[derive(Clone, Debug)]
pub struct ClassNormCache<T> {
    mode: Mode,
    normalized: Matrix<T>,
    inv_std: Vec<T>,
    /// Dimensions whose class variance did not exceed `epsilon`.
    pub degenerate_dims: Vec<usize>,
}

impl<T: Scalar> ClassNorm<T> {
    pub fn new(dim: usize, momentum: f64) -> Result<Self> {
        if !(momentum > 0.0 && momentum <= 1.0) {
            return Err(Error::config(format!("momentum must lie in (0, 1], got {momentum}")));
        }
        Ok(Self {
            running_mean: vec![T::zero(); dim],
            running_var: vec![T::one(); dim],
            momentum,
            epsilon: STD_EPSILON,
        })
    }

    pub fn dim(&self) -> usize {
        self.running_mean.len()
    }

    /// Standardizes the `K × d_h` matrix `h`. Train mode uses and records the
    /// statistics of `h`; eval mode applies the running statistics.
    pub fn standardize(&mut self, h: &Matrix<T>, mode: Mode) -> Result<(Matrix<T>, ClassNormCache<T>)> {
        if h.cols() != self.dim() {
            return Err(Error::dim(format!(
                "class norm over {} dims applied to {} columns",
                self.dim(),
                h.cols()
            )));
        }
        match mode {
            Mode::Eval => self.standardize_eval(h),
            Mode::Train => {
                if h.rows() < 2 {
                    return Err(Error::InsufficientData(format!(
                        "class standardization needs at least 2 classes in training, got {}",
                        h.rows()
                    )));
                }
                let (means, vars) = column_moments(h);
                let eps = T::lit(self.epsilon);
                let inv_std: Vec<T> = vars.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
                let degenerate_dims: Vec<usize> =
                    (0..vars.len()).filter(|&j| vars[j] <= eps).collect();
                if !degenerate_dims.is_empty() {
                    log::warn!(
                        "{} hidden dimension(s) have no spread across classes",
                        degenerate_dims.len()
                    );
                }
                let normalized = shift_scale(h, &means, &inv_std);
                let m = T::lit(self.momentum);
                let keep = T::one() - m;
                for j in 0..self.dim() {
                    self.running_mean[j] = keep * self.running_mean[j] + m * means[j];
                    self.running_var[j] = keep * self.running_var[j] + m * vars[j];
                }
                Ok((
                    normalized.clone(),
                    ClassNormCache {
                        mode,
                        normalized,
                        inv_std,
                        degenerate_dims,
                    },
                ))
            }
        }
    }

    fn standardize_eval(&self, h: &Matrix<T>) -> Result<(Matrix<T>, ClassNormCache<T>)> {
        if h.rows() == 0 {
            return Err(Error::InsufficientData("class standardization of zero classes".into()));
        }
        let eps = T::lit(self.epsilon);
        let inv_std: Vec<T> = self
            .running_var
            .iter()
            .map(|&v| T::one() / (v + eps).sqrt())
            .collect();
        let normalized = shift_scale(h, &self.running_mean, &inv_std);
        Ok((
            normalized.clone(),
            ClassNormCache {
                mode: Mode::Eval,
                normalized,
                inv_std,
                degenerate_dims: Vec::new(),
            },
        ))
    }

    /// Eval-mode standardization without any state change.
    pub fn apply_running(&self, h: &Matrix<T>) -> Result<Matrix<T>> {
        if h.cols() != self.dim() {
            return Err(Error::dim(format!(
                "class norm over {} dims applied to {} columns",
                self.dim(),
                h.cols()
            )));
        }
        self.standardize_eval(h).map(|(m, _)| m)
    }
}

fn shift_scale<T: Scalar>(h: &Matrix<T>, shift: &[T], scale: &[T]) -> Matrix<T> {
    let mut out = h.clone();
    for i in 0..h.rows() {
        for ((v, &mu), &s) in out.row_mut(i).iter_mut().zip(shift).zip(scale) {
            *v = (*v - mu) * s;
        }
    }
    out
}

impl<T: Scalar> ClassNormCache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Gradient with respect to the standardized input. In train mode the
    /// class mean and variance are differentiated through as well.
    pub fn backward(&self, d_out: &Matrix<T>) -> Result<Matrix<T>> {
        if d_out.shape() != self.normalized.shape() {
            return Err(Error::dim(format!(
                "class norm gradient {:?} vs output {:?}",
                d_out.shape(),
                self.normalized.shape()
            )));
        }
        let k = d_out.rows();
        let mut dh = d_out.clone();
        match self.mode {
            Mode::Eval => {
                for i in 0..k {
                    for (v, &s) in dh.row_mut(i).iter_mut().zip(&self.inv_std) {
                        *v *= s;
                    }
                }
            }
            Mode::Train => {
                let kf = T::from_count(k);
                let sum_dy = d_out.col_sums();
                let sum_dy_xhat = d_out.hadamard(&self.normalized)?.col_sums();
                for i in 0..k {
                    let xhat = self.normalized.row(i);
                    for (j, v) in dh.row_mut(i).iter_mut().enumerate() {
                        *v = self.inv_std[j] / kf * (kf * *v - sum_dy[j] - xhat[j] * sum_dy_xhat[j]);
                    }
                }
            }
        }
        Ok(dh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn three_class_hand_computation() {
        let mut cn = ClassNorm::<f64>::new(1, DEFAULT_MOMENTUM).unwrap();
        let h = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let (out, _) = cn.standardize(&h, Mode::Train).unwrap();
        // Population std of {1,2,3} is sqrt(2/3); (1-2)/sqrt(2/3) = -sqrt(3/2).
        let r = 1.5f64.sqrt();
        for (got, want) in out.as_slice().iter().zip([-r, 0.0, r]) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_rows_map_to_zero_with_warning() {
        let mut cn = ClassNorm::<f64>::new(2, DEFAULT_MOMENTUM).unwrap();
        let h = Matrix::from_rows(&[vec![0.3, -2.0], vec![0.3, -2.0], vec![0.3, -2.0]]).unwrap();
        let (out, cache) = cn.standardize(&h, Mode::Train).unwrap();
        assert!(out.max_abs() < 1e-6);
        assert_eq!(cache.degenerate_dims, vec![0, 1]);
    }

    #[test]
    fn eval_uses_running_statistics() {
        let mut cn = ClassNorm::<f64>::new(2, DEFAULT_MOMENTUM).unwrap();
        cn.running_mean = vec![5.0, 5.0];
        cn.running_var = vec![1.0, 1.0];
        let h = Matrix::from_rows(&[vec![5.0, 5.0]]).unwrap();
        let (out, _) = cn.standardize(&h, Mode::Eval).unwrap();
        assert_eq!(out, Matrix::zeros(1, 2));
        assert_eq!(cn.running_mean, vec![5.0, 5.0]);
    }

    #[test]
    fn single_class_rejected_in_training() {
        let mut cn = ClassNorm::<f64>::new(2, DEFAULT_MOMENTUM).unwrap();
        let h = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(cn.standardize(&h, Mode::Train), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn output_moments_and_norm() {
        let mut cn = ClassNorm::<f64>::new(16, DEFAULT_MOMENTUM).unwrap();
        let h: Matrix<f64> = Rng::seed_from(12).normal_matrix(9, 16).scale(3.0);
        let (out, _) = cn.standardize(&h, Mode::Train).unwrap();
        let (means, vars) = column_moments(&out);
        assert!(means.iter().all(|m| m.abs() <= 1e-10));
        assert!(vars.iter().all(|v| (v - 1.0).abs() <= 1e-6));
        assert!((vars.iter().sum::<f64>() - 16.0).abs() <= 1e-6);
        let mean_sq_norm = out.sum_sq() / 9.0;
        assert!((mean_sq_norm - 16.0).abs() <= 1e-6);
    }

    #[test]
    fn running_statistics_converge() {
        let mut cn = ClassNorm::<f64>::new(4, DEFAULT_MOMENTUM).unwrap();
        let h: Matrix<f64> = Rng::seed_from(1).normal_matrix(6, 4);
        for _ in 0..1000 {
            cn.standardize(&h, Mode::Train).unwrap();
        }
        let (means, vars) = column_moments(&h);
        for j in 0..4 {
            assert!((cn.running_mean[j] - means[j]).abs() < 1e-6);
            assert!((cn.running_var[j] - vars[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn train_backward_matches_finite_differences() {
        let mut rng = Rng::seed_from(40);
        let h: Matrix<f64> = rng.normal_matrix(5, 3);
        let up: Matrix<f64> = rng.normal_matrix(5, 3);
        let f = |h: &Matrix<f64>| {
            let mut cn = ClassNorm::<f64>::new(3, DEFAULT_MOMENTUM).unwrap();
            cn.standardize(h, Mode::Train).unwrap().0.hadamard(&up).unwrap().sum()
        };
        let mut cn = ClassNorm::<f64>::new(3, DEFAULT_MOMENTUM).unwrap();
        let (_, cache) = cn.standardize(&h, Mode::Train).unwrap();
        let g = cache.backward(&up).unwrap();
        for idx in 0..h.len() {
            let mut p = h.clone();
            let mut m = h.clone();
            p.as_mut_slice()[idx] += 1e-6;
            m.as_mut_slice()[idx] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - g.as_slice()[idx]).abs() < 1e-7, "{fd} vs {}", g.as_slice()[idx]);
        }
    }
}
