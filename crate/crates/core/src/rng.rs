//! Seeded random number generation.
//!
//! All randomness in the crate flows through [`Rng`], a ChaCha8 stream cipher
//! generator (`rand_chacha::ChaCha8Rng`). ChaCha output is defined bit-for-bit
//! by its seed, independent of platform and word size. Normal variates use the
//! 128-layer Ziggurat sampler of `rand_distr::StandardNormal`; uniform integers
//! use Lemire's widening-multiply rejection method. Both algorithm versions
//! are pinned by the workspace lockfile.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seed_from(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` of the generator keyed by `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Child generator seeded from this one's output.
    pub fn fork(&mut self) -> Self {
        Self::seed_from(self.next_u64())
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Standard normal variate.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform variate in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }

    pub fn normal_vec<T: Scalar>(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| T::lit(self.normal())).collect()
    }

    /// Matrix of i.i.d. standard normals. Zero dimensions give an empty matrix.
    pub fn normal_matrix<T: Scalar>(&mut self, rows: usize, cols: usize) -> Matrix<T> {
        Matrix::from_fn(rows, cols, |_, _| T::lit(self.normal()))
    }
}

/// Matrix of i.i.d. standard normals drawn from `rng`.
pub fn standard_normal_matrix<T: Scalar>(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::dim(format!(
            "standard normal matrix needs positive dimensions, got {rows}x{cols}"
        )));
    }
    Ok(rng.normal_matrix(rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_give_identical_streams() {
        let a: Matrix<f64> = standard_normal_matrix(1, 1, &mut Rng::seed_from(7)).unwrap();
        let b: Matrix<f64> = standard_normal_matrix(1, 1, &mut Rng::seed_from(7)).unwrap();
        assert_eq!(a[(0, 0)].to_bits(), b[(0, 0)].to_bits());

        let x: Matrix<f64> = Rng::seed_from(3).normal_matrix(20, 30);
        let y: Matrix<f64> = Rng::seed_from(3).normal_matrix(20, 30);
        let xb: Vec<u64> = x.as_slice().iter().map(|v| v.to_bits()).collect();
        let yb: Vec<u64> = y.as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(xb, yb);
    }

    #[test]
    fn substreams_differ() {
        let a = Rng::substream(5, 0).normal();
        let b = Rng::substream(5, 1).normal();
        assert_ne!(a, b);
        assert_eq!(a, Rng::substream(5, 0).normal());
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(
            standard_normal_matrix::<f64>(0, 5, &mut Rng::seed_from(1)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn sample_moments_within_clt_bounds() {
        // 64000 draws: stderr of the mean is 1/sqrt(n), stderr of the variance
        // sqrt(2/n) for a normal population.
        let m: Matrix<f64> = standard_normal_matrix(1000, 64, &mut Rng::seed_from(2024)).unwrap();
        let n = m.len() as f64;
        let mean = m.sum() / n;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut p = Rng::seed_from(9).permutation(100);
        p.sort_unstable();
        assert_eq!(p, (0..100).collect::<Vec<_>>());
    }
}
