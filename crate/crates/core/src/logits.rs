//! Logit computation between feature vectors and class prototypes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogitMode {
    /// `zᵀ p_c`
    Dot,
    /// `γ² · cos(z, p_c)`
    NormalizeScale,
}

impl fmt::Display for LogitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogitMode::Dot => "dot",
            LogitMode::NormalizeScale => "normalize_scale",
        })
    }
}

impl FromStr for LogitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(LogitMode::Dot),
            "normalize_scale" | "ns" => Ok(LogitMode::NormalizeScale),
            _ => Err(Error::config(format!("unknown logit mode '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitConfig {
    pub mode: LogitMode,
    pub gamma: f64,
    /// Evaluation-time multiplier on seen-class logits, in `(0, 1]`.
    pub seen_scale: f64,
}

impl Default for LogitConfig {
    fn default() -> Self {
        Self {
            mode: LogitMode::NormalizeScale,
            gamma: 5.0,
            seen_scale: 1.0,
        }
    }
}

impl LogitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == LogitMode::NormalizeScale && !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::config(format!("gamma must be finite and positive, got {}", self.gamma)));
        }
        check_seen_scale(self.seen_scale)
    }
}

/// Seen-scale grid used for calibration sweeps.
pub const SEEN_SCALE_GRID: [f64; 5] = [1.0, 0.95, 0.9, 0.85, 0.8];

fn check_seen_scale(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::config(format!("seen scale must lie in (0, 1], got {s}")));
    }
    Ok(())
}

/// Values retained by [`forward_logits`] for the backward pass.
#[derive(Clone, Debug)]
pub struct LogitCache<T> {
    mode: LogitMode,
    gamma_sq: T,
    z_hat: Matrix<T>,
    w_hat: Matrix<T>,
    z_norms: Vec<T>,
    w_norms: Vec<T>,
}

fn unit_rows<T: Scalar>(m: &Matrix<T>, what: &str) -> Result<(Matrix<T>, Vec<T>)> {
    let norms = m.row_norms();
    let mut out = m.clone();
    for (i, &n) in norms.iter().enumerate() {
        if n == T::zero() {
            return Err(Error::Degenerate(format!("{what} row {i} has zero norm")));
        }
        for v in out.row_mut(i) {
            *v /= n;
        }
    }
    Ok((out, norms))
}

/// Logits `N × K` for features `z` (`N × d_z`) against prototypes `w` (`K × d_z`).
pub fn forward_logits<T: Scalar>(
    z: &Matrix<T>,
    w: &Matrix<T>,
    cfg: &LogitConfig,
) -> Result<(Matrix<T>, LogitCache<T>)> {
    if z.cols() != w.cols() {
        return Err(Error::dim(format!(
            "feature dim {} does not match prototype dim {}",
            z.cols(),
            w.cols()
        )));
    }
    match cfg.mode {
        LogitMode::Dot => {
            let logits = z.matmul_t(w)?;
            let cache = LogitCache {
                mode: LogitMode::Dot,
                gamma_sq: T::one(),
                z_hat: z.clone(),
                w_hat: w.clone(),
                z_norms: Vec::new(),
                w_norms: Vec::new(),
            };
            Ok((logits, cache))
        }
        LogitMode::NormalizeScale => {
            cfg.validate()?;
            let (z_hat, z_norms) = unit_rows(z, "feature")?;
            let (w_hat, w_norms) = unit_rows(w, "prototype")?;
            let gamma_sq = T::lit(cfg.gamma * cfg.gamma);
            let logits = z_hat.matmul_t(&w_hat)?.scale(gamma_sq);
            Ok((
                logits,
                LogitCache {
                    mode: LogitMode::NormalizeScale,
                    gamma_sq,
                    z_hat,
                    w_hat,
                    z_norms,
                    w_norms,
                },
            ))
        }
    }
}

pub fn compute_logits<T: Scalar>(z: &Matrix<T>, w: &Matrix<T>, cfg: &LogitConfig) -> Result<Matrix<T>> {
    forward_logits(z, w, cfg).map(|(l, _)| l)
}

/// Backward through `x ↦ x / ‖x‖` applied row-wise.
fn unit_rows_backward<T: Scalar>(x_hat: &Matrix<T>, norms: &[T], d_hat: &Matrix<T>) -> Matrix<T> {
    let mut out = d_hat.clone();
    for i in 0..x_hat.rows() {
        let proj = dot(x_hat.row(i), d_hat.row(i));
        let inv = T::one() / norms[i];
        for (o, &u) in out.row_mut(i).iter_mut().zip(x_hat.row(i)) {
            *o = (*o - u * proj) * inv;
        }
    }
    out
}

impl<T: Scalar> LogitCache<T> {
    /// Gradients `(dZ, dW)` given the upstream gradient on the logits.
    pub fn backward(&self, d_logits: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
        let expected = (self.z_hat.rows(), self.w_hat.rows());
        if d_logits.shape() != expected {
            return Err(Error::dim(format!(
                "logit gradient is {:?}, expected {expected:?}",
                d_logits.shape()
            )));
        }
        match self.mode {
            LogitMode::Dot => Ok((d_logits.matmul(&self.w_hat)?, d_logits.t_matmul(&self.z_hat)?)),
            LogitMode::NormalizeScale => {
                let scaled = d_logits.scale(self.gamma_sq);
                let dz_hat = scaled.matmul(&self.w_hat)?;
                let dw_hat = scaled.t_matmul(&self.z_hat)?;
                Ok((
                    unit_rows_backward(&self.z_hat, &self.z_norms, &dz_hat),
                    unit_rows_backward(&self.w_hat, &self.w_norms, &dw_hat),
                ))
            }
        }
    }
}

/// Multiplies the columns flagged in `seen_mask` by `s`.
pub fn apply_seen_scale<T: Scalar>(logits: &Matrix<T>, seen_mask: &[bool], s: f64) -> Result<Matrix<T>> {
    check_seen_scale(s)?;
    if seen_mask.len() != logits.cols() {
        return Err(Error::dim(format!(
            "seen mask has {} entries for {} classes",
            seen_mask.len(),
            logits.cols()
        )));
    }
    let s = T::lit(s);
    let mut out = logits.clone();
    for i in 0..out.rows() {
        for (v, &seen) in out.row_mut(i).iter_mut().zip(seen_mask) {
            if seen {
                *v *= s;
            }
        }
    }
    Ok(out)
}
