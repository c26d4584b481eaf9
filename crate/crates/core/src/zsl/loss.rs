use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    p
}

/// Mean cross-entropy plus `entropy_weight` times the batch mean of
/// `Σ_c p_c log p_c`. Returns the value and its gradient w.r.t. the logits.
pub fn loss<T: Scalar>(logits: &Matrix<T>, labels: &[usize], entropy_weight: f64) -> Result<(f64, Matrix<T>)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::dim(format!("{n} logit rows but {} labels", labels.len())));
    }
    if n == 0 {
        return Err(Error::InsufficientData("loss of an empty batch".into()));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Label { label, classes: k });
    }
    if !(entropy_weight >= 0.0 && entropy_weight.is_finite()) {
        return Err(Error::config(format!("entropy weight must be non-negative, got {entropy_weight}")));
    }
    let w = T::lit(entropy_weight);
    let inv_n = T::one() / T::from_count(n);
    let mut grad = Matrix::zeros(n, k);
    let mut total = T::zero();
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let log_z = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        let log_p: Vec<T> = row.iter().map(|&v| v - log_z).collect();
        let p: Vec<T> = log_p.iter().map(|&l| l.exp()).collect();
        let neg_entropy: T = p.iter().zip(&log_p).map(|(&pc, &lc)| pc * lc).sum();
        total += -log_p[labels[i]] + w * neg_entropy;
        for (c, g) in grad.row_mut(i).iter_mut().enumerate() {
            let ce = if c == labels[i] { p[c] - T::one() } else { p[c] };
            *g = (ce + w * p[c] * (log_p[c] - neg_entropy)) * inv_n;
        }
    }
    Ok(((total * inv_n).as_f64(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn uniform_logits() {
        let logits = Matrix::<f64>::filled(3, 4, 0.7);
        let labels = [0, 1, 3];
        let (v, _) = loss(&logits, &labels, 0.0).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-12);
        let (v, _) = loss(&logits, &labels, 0.25).unwrap();
        assert!((v - (4f64.ln() - 0.25 * 4f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_label() {
        let logits = Matrix::<f64>::zeros(1, 3);
        assert!(matches!(loss(&logits, &[3], 0.0), Err(Error::Label { label: 3, classes: 3 })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from(17);
        let logits: Matrix<f64> = rng.normal_matrix(5, 7).scale(2.0);
        let labels: Vec<usize> = (0..5).map(|_| rng.below(7)).collect();
        let w = 0.3;
        let (_, g) = loss(&logits, &labels, w).unwrap();
        let h = 1e-6;
        for idx in 0..logits.len() {
            let mut p = logits.clone();
            let mut m = logits.clone();
            p.as_mut_slice()[idx] += h;
            m.as_mut_slice()[idx] -= h;
            let fd = (loss(&p, &labels, w).unwrap().0 - loss(&m, &labels, w).unwrap().0) / (2.0 * h);
            let an = g.as_slice()[idx];
            let rel = (fd - an).abs() / an.abs().max(1e-3);
            assert!(rel < 1e-6, "{idx}: {fd} vs {an}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let l: Matrix<f64> = Rng::seed_from(2).normal_matrix(4, 6).scale(30.0);
        for row in softmax_rows(&l).row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
