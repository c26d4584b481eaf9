//! Attribute normalization, attribute standardization and dynamic normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Stabilizer added to the variance before the square root in every
/// standardization, `(x − μ) / sqrt(σ² + ε)`.
pub const STD_EPSILON: f64 = 1e-10;

/// Scales every row to unit L2 norm.
pub fn attribute_normalize<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let mut out = a.clone();
    for (c, norm) in a.row_norms().into_iter().enumerate() {
        if norm == T::zero() {
            return Err(Error::Degenerate(format!("attribute row of class {c} is all zeros")));
        }
        for v in out.row_mut(c) {
            *v /= norm;
        }
    }
    Ok(out)
}

/// Column standardization output.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardized<T> {
    pub output: Matrix<T>,
    /// Columns whose variance did not exceed the stabilizer.
    pub degenerate: Vec<usize>,
}

/// Per-column `(mean, population variance)`.
pub(crate) fn column_moments<T: Scalar>(m: &Matrix<T>) -> (Vec<T>, Vec<T>) {
    let n = T::from_count(m.rows());
    let means: Vec<T> = m.col_sums().into_iter().map(|s| s / n).collect();
    let mut vars = vec![T::zero(); m.cols()];
    for row in m.row_iter() {
        for ((v, &x), &mu) in vars.iter_mut().zip(row).zip(&means) {
            let d = x - mu;
            *v += d * d;
        }
    }
    for v in &mut vars {
        *v /= n;
    }
    (means, vars)
}

/// Converts each column to zero mean and unit population variance.
pub fn attribute_standardize<T: Scalar>(a: &Matrix<T>) -> Result<Standardized<T>> {
    if a.rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "standardization needs at least 2 rows, got {}",
            a.rows()
        )));
    }
    let (means, vars) = column_moments(a);
    let eps = T::lit(STD_EPSILON);
    let inv_std: Vec<T> = vars.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let degenerate: Vec<usize> = vars
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= eps)
        .map(|(j, _)| j)
        .collect();
    if !degenerate.is_empty() {
        log::warn!("{} constant attribute column(s) standardized to zero", degenerate.len());
    }
    let mut output = a.clone();
    for i in 0..a.rows() {
        for (j, v) in output.row_mut(i).iter_mut().enumerate() {
            *v = (*v - means[j]) * inv_std[j];
        }
    }
    Ok(Standardized { output, degenerate })
}

/// Normalizer used by [`dynamic_normalize`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicNormVariant {
    /// Divide by the batch mean of `‖h‖²`.
    #[default]
    MeanSquaredNorm,
    /// Divide by the square root of the batch mean of `‖h‖²`.
    RootMeanSquaredNorm,
}

/// Divides every row by the batch statistic `E‖h‖²` (or its root).
pub fn dynamic_normalize<T: Scalar>(h: &Matrix<T>, variant: DynamicNormVariant) -> Result<Matrix<T>> {
    if h.rows() == 0 {
        return Err(Error::InsufficientData("dynamic normalization of an empty batch".into()));
    }
    let mean_sq = h.sum_sq() / T::from_count(h.rows());
    if mean_sq == T::zero() {
        return Err(Error::Degenerate("batch has zero mean squared norm".into()));
    }
    let denom = match variant {
        DynamicNormVariant::MeanSquaredNorm => mean_sq,
        DynamicNormVariant::RootMeanSquaredNorm => mean_sq.sqrt(),
    };
    Ok(h.scale(T::one() / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        let a = Matrix::<f64>::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let n = attribute_normalize(&a).unwrap();
        assert!((n[(0, 0)] - 0.6).abs() < 1e-15 && (n[(0, 1)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn unit_row_unchanged() {
        let a = Matrix::from_rows(&[vec![0.6, 0.8], vec![1.0, 0.0]]).unwrap();
        let n = attribute_normalize(&a).unwrap();
        assert!(n.sub(&a).unwrap().max_abs() <= 1e-15);
    }

    #[test]
    fn zero_row_names_class() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        match attribute_normalize(&a) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("class 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_point_standardization() {
        let a = Matrix::<f64>::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let s = attribute_standardize(&a).unwrap();
        assert!((s.output[(0, 0)] + 1.0).abs() < 1e-9 && (s.output[(1, 0)] - 1.0).abs() < 1e-9);
        assert!(s.degenerate.is_empty());
    }

    #[test]
    fn constant_column_goes_to_zero() {
        let a = Matrix::<f64>::from_rows(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 4.0]]).unwrap();
        let s = attribute_standardize(&a).unwrap();
        assert_eq!(s.degenerate, vec![0]);
        assert!(s.output.col(0).iter().all(|v| v.abs() < 1e-6));
        assert!(matches!(
            attribute_standardize(&Matrix::<f64>::zeros(1, 3)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn standardization_is_idempotent() {
        let a: Matrix<f64> = Rng::seed_from(3).normal_matrix(40, 7);
        let once = attribute_standardize(&a).unwrap().output;
        let twice = attribute_standardize(&once).unwrap().output;
        assert!(twice.sub(&once).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn dynamic_normalization_examples() {
        let h = Matrix::from_rows(&[vec![0.6, 0.8]]).unwrap();
        let out = dynamic_normalize(&h, DynamicNormVariant::MeanSquaredNorm).unwrap();
        assert!(out.sub(&h).unwrap().max_abs() < 1e-15);

        let h = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let out = dynamic_normalize(&h, DynamicNormVariant::MeanSquaredNorm).unwrap();
        assert_eq!(out, Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap());
        let out = dynamic_normalize(&h, DynamicNormVariant::RootMeanSquaredNorm).unwrap();
        assert_eq!(out, Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());

        assert!(matches!(
            dynamic_normalize(&Matrix::<f64>::zeros(2, 2), DynamicNormVariant::MeanSquaredNorm),
            Err(Error::Degenerate(_))
        ));
    }

    proptest! {
        #[test]
        fn normalize_is_unit_idempotent_and_scale_invariant(
            seed in any::<u64>(),
            c in 0.01f64..100.0,
        ) {
            let a: Matrix<f64> = Rng::seed_from(seed).normal_matrix(6, 5);
            let n = attribute_normalize(&a).unwrap();
            for norm in n.row_norms() {
                prop_assert!((norm - 1.0).abs() <= 1e-12);
            }
            let nn = attribute_normalize(&n).unwrap();
            prop_assert!(nn.sub(&n).unwrap().max_abs() <= 1e-12);
            let scaled = attribute_normalize(&a.scale(c)).unwrap();
            prop_assert!(scaled.sub(&n).unwrap().max_abs() <= 1e-12);
        }

        #[test]
        fn dynamic_normalize_is_homogeneous_of_degree_minus_one(
            seed in any::<u64>(),
            c in 0.1f64..10.0,
        ) {
            let h: Matrix<f64> = Rng::seed_from(seed).normal_matrix(5, 4);
            let base = dynamic_normalize(&h, DynamicNormVariant::MeanSquaredNorm).unwrap();
            let scaled = dynamic_normalize(&h.scale(c), DynamicNormVariant::MeanSquaredNorm).unwrap();
            prop_assert!(scaled.sub(&base.scale(1.0 / c)).unwrap().max_abs() <= 1e-12 * (1.0 + base.max_abs()));
        }
    }
}
