//! Descriptive statistics, the D'Agostino–Pearson normality test, column
//! correlations and Monte-Carlo moment estimation.
//!
//! Moments are population moments (divide by `n`), the same convention the
//! class-standardization layer uses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// `m3 / m2^{3/2}`; `None` when the sample has zero spread.
    pub skewness: Option<f64>,
    /// `m4 / m2² − 3`; `None` when the sample has zero spread.
    pub excess_kurtosis: Option<f64>,
}

impl StatSummary {
    pub fn is_degenerate(&self) -> bool {
        self.skewness.is_none()
    }
}

/// Central moments `(mean, m2, m3, m4)` computed in two passes.
fn central_moments<T: Scalar>(v: &[T]) -> (f64, f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().map(|x| x.as_f64()).sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in v {
        let d = x.as_f64() - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

/// Spread below this is treated as zero: rounding noise of a constant sample.
fn is_zero_spread<T: Scalar>(v: &[T], m2: f64) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.as_f64().abs()));
    m2 <= (4.0 * f64::EPSILON * scale).powi(2)
}

pub fn descriptive_stats<T: Scalar>(v: &[T]) -> Result<StatSummary> {
    if v.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "descriptive statistics need at least 2 values, got {}",
            v.len()
        )));
    }
    let (mean, m2, m3, m4) = central_moments(v);
    let (skewness, excess_kurtosis) = if is_zero_spread(v, m2) {
        (None, None)
    } else {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    };
    Ok(StatSummary {
        n: v.len(),
        mean,
        variance: if skewness.is_some() { m2 } else { 0.0 },
        skewness,
        excess_kurtosis,
    })
}

/// Result of the D'Agostino–Pearson omnibus test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityTest {
    /// Omnibus statistic `K² = z_skew² + z_kurt²`, χ²(2) under normality.
    pub k2: f64,
    pub p_value: f64,
    pub z_skew: f64,
    pub z_kurt: f64,
}

/// Smallest sample the kurtosis transformation is valid for.
pub const NORMALITY_MIN_SAMPLES: usize = 20;

/// D'Agostino–Pearson K² normality test.
///
/// Skewness is mapped to a standard normal with D'Agostino's (1970) Johnson
/// SU transformation, excess kurtosis with the Anscombe–Glynn (1983)
/// cube-root transformation. These are the same constants used by
/// `scipy.stats.normaltest`. The p-value is the χ²(2) upper tail,
/// `exp(−K²/2)`.
pub fn normality_statistic<T: Scalar>(v: &[T]) -> Result<NormalityTest> {
    let n = v.len();
    if n < NORMALITY_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "normality test needs at least {NORMALITY_MIN_SAMPLES} values, got {n}"
        )));
    }
    let (_, m2, m3, m4) = central_moments(v);
    if is_zero_spread(v, m2) {
        return Err(Error::Degenerate("normality test on a constant sample".into()));
    }
    let nf = n as f64;
    let g1 = m3 / m2.powf(1.5);
    let b2 = m4 / (m2 * m2);

    // Skewness.
    let y = g1 * ((nf + 1.0) * (nf + 3.0) / (6.0 * (nf - 2.0))).sqrt();
    let beta2 = 3.0 * (nf * nf + 27.0 * nf - 70.0) * (nf + 1.0) * (nf + 3.0)
        / ((nf - 2.0) * (nf + 5.0) * (nf + 7.0) * (nf + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let z_skew = delta * (y / alpha).asinh();

    // Kurtosis.
    let e = 3.0 * (nf - 1.0) / (nf + 1.0);
    let var_b2 = 24.0 * nf * (nf - 2.0) * (nf - 3.0)
        / ((nf + 1.0) * (nf + 1.0) * (nf + 3.0) * (nf + 5.0));
    let x = (b2 - e) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (nf * nf - 5.0 * nf + 2.0) / ((nf + 7.0) * (nf + 9.0))
        * (6.0 * (nf + 3.0) * (nf + 5.0) / (nf * (nf - 2.0) * (nf - 3.0))).sqrt();
    let a = 6.0
        + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate("kurtosis transformation is singular".into()));
    }
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    let z_kurt = (term1 - term2) / (2.0 / (9.0 * a)).sqrt();

    let k2 = z_skew * z_skew + z_kurt * z_kurt;
    Ok(NormalityTest {
        k2,
        p_value: (-k2 / 2.0).exp(),
        z_skew,
        z_kurt,
    })
}

/// Per-column mean absolute Pearson correlation with every other usable column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsCorrelation {
    /// Indices of the columns that entered the computation.
    pub columns: Vec<usize>,
    /// `values[i]` is the mean of `|corr(columns[i], k)|` over usable `k ≠ columns[i]`.
    pub values: Vec<f64>,
    /// Zero-variance columns that were left out.
    pub excluded: Vec<usize>,
}

pub fn pairwise_abs_correlation<T: Scalar>(m: &Matrix<T>) -> Result<AbsCorrelation> {
    if m.rows() < 2 || m.cols() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 2x2 data, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let mut centered: Vec<Vec<f64>> = Vec::new();
    let mut columns = Vec::new();
    let mut excluded = Vec::new();
    for j in 0..m.cols() {
        let col = m.col(j);
        let (mean, m2, _, _) = central_moments(&col);
        if is_zero_spread(&col, m2) {
            excluded.push(j);
            continue;
        }
        let sd = (m2 * col.len() as f64).sqrt();
        centered.push(col.iter().map(|x| (x.as_f64() - mean) / sd).collect());
        columns.push(j);
    }
    if !excluded.is_empty() {
        log::warn!("{} zero-variance column(s) excluded from correlation", excluded.len());
    }
    if columns.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} column(s) with nonzero variance",
            columns.len()
        )));
    }
    let k = columns.len();
    let mut sums = vec![0.0; k];
    for a in 0..k {
        for b in a + 1..k {
            let r: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
            let r = r.abs().min(1.0);
            sums[a] += r;
            sums[b] += r;
        }
    }
    let values = sums.into_iter().map(|s| s / (k - 1) as f64).collect();
    Ok(AbsCorrelation {
        columns,
        values,
        excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub trials: usize,
    pub mean: f64,
    /// Population variance of the sampled values.
    pub variance: f64,
    /// Standard error of `variance`, `sqrt((m4 − m2²) / trials)`.
    pub stderr_of_variance: f64,
}

/// Runs `sampler` `trials` times and summarizes the draws.
pub fn mc_estimate(
    mut sampler: impl FnMut(&mut Rng) -> f64,
    trials: usize,
    rng: &mut Rng,
) -> Result<McEstimate> {
    if trials < 2 {
        return Err(Error::InsufficientData(format!(
            "Monte-Carlo estimate needs at least 2 trials, got {trials}"
        )));
    }
    let draws: Vec<f64> = (0..trials).map(|_| sampler(rng)).collect();
    Ok(summarize_draws(&draws))
}

/// Mean, variance and variance standard error of a finished batch of draws.
pub fn summarize_draws(draws: &[f64]) -> McEstimate {
    let (mean, m2, _, m4) = central_moments(draws);
    let n = draws.len() as f64;
    McEstimate {
        trials: draws.len(),
        mean,
        variance: m2,
        stderr_of_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// One-sided `P(X ≥ wins)` for `X ~ Binomial(wins + losses, 1/2)`.
    pub p_value: f64,
}

/// Paired sign test of `a > b`. Ties are dropped.
pub fn paired_sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() {
        return Err(Error::dim(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let n = wins + losses;
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_choose = 0.0;
    let mut p = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= wins {
            p += (ln_choose + ln_half_n).exp();
        }
    }
    Ok(SignTest {
        wins,
        losses,
        ties: a.len() - n,
        p_value: p.min(1.0),
    })
}
