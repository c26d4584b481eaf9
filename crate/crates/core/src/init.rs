//! Weight initialization schemes and their target variances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// `2 / (d_in + d_out)`
    Xavier,
    /// `1 / d_in`
    XavierFanIn,
    /// `1 / d_out`
    XavierFanOut,
    /// `2 / d_in`
    KaimingFanIn,
    /// `2 / d_out`
    KaimingFanOut,
    /// `1 / (d_z · d_h)` for the output projection behind class standardization.
    CnOutput,
    /// `1 / (d_z · d_a)` for a linear embedder fed standardized attributes.
    LinearCorrected,
}

impl InitKind {
    pub const ALL: [InitKind; 7] = [
        InitKind::Xavier,
        InitKind::XavierFanIn,
        InitKind::XavierFanOut,
        InitKind::KaimingFanIn,
        InitKind::KaimingFanOut,
        InitKind::CnOutput,
        InitKind::LinearCorrected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitKind::Xavier => "xavier",
            InitKind::XavierFanIn => "xavier_fan_in",
            InitKind::XavierFanOut => "xavier_fan_out",
            InitKind::KaimingFanIn => "kaiming_fan_in",
            InitKind::KaimingFanOut => "kaiming_fan_out",
            InitKind::CnOutput => "cn_output",
            InitKind::LinearCorrected => "linear_corrected",
        }
    }

    /// Whether the scheme needs the extra context dimension.
    pub fn needs_context(self) -> bool {
        matches!(self, InitKind::CnOutput | InitKind::LinearCorrected)
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InitKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown init scheme '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitDistribution {
    /// `U(−√(3v), √(3v))`
    #[default]
    Uniform,
    /// `N(0, v)`
    Normal,
}

impl fmt::Display for InitDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitDistribution::Uniform => "uniform",
            InitDistribution::Normal => "normal",
        })
    }
}

impl FromStr for InitDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(InitDistribution::Uniform),
            "normal" => Ok(InitDistribution::Normal),
            _ => Err(Error::config(format!("unknown init distribution '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    pub distribution: InitDistribution,
}

impl InitScheme {
    pub fn new(kind: InitKind, distribution: InitDistribution) -> Self {
        Self { kind, distribution }
    }

    pub fn uniform(kind: InitKind) -> Self {
        Self::new(kind, InitDistribution::Uniform)
    }
}

/// Target weight variance of `scheme` for a `d_in → d_out` layer.
///
/// `d_extra` is the representation width feeding the output projection
/// (`d_h` for `cn_output`, `d_a` for `linear_corrected`), with `d_out = d_z`.
pub fn init_variance(scheme: InitKind, d_in: usize, d_out: usize, d_extra: Option<usize>) -> Result<f64> {
    if d_in == 0 || d_out == 0 || d_extra == Some(0) {
        return Err(Error::config(format!(
            "init dimensions must be positive (d_in={d_in}, d_out={d_out}, d_extra={d_extra:?})"
        )));
    }
    let (d_in, d_out) = (d_in as f64, d_out as f64);
    let extra = || {
        d_extra
            .map(|d| d as f64)
            .ok_or_else(|| Error::config(format!("init scheme {scheme} needs a context dimension")))
    };
    Ok(match scheme {
        InitKind::Xavier => 2.0 / (d_in + d_out),
        InitKind::XavierFanIn => 1.0 / d_in,
        InitKind::XavierFanOut => 1.0 / d_out,
        InitKind::KaimingFanIn => 2.0 / d_in,
        InitKind::KaimingFanOut => 2.0 / d_out,
        InitKind::CnOutput | InitKind::LinearCorrected => 1.0 / (d_out * extra()?),
    })
}

/// Samples a `d_in × d_out` weight matrix with zero-mean i.i.d. entries of
/// variance `init_variance(scheme.kind, d_in, d_out, d_extra)`.
pub fn sample_init<T: Scalar>(
    scheme: InitScheme,
    d_in: usize,
    d_out: usize,
    d_extra: Option<usize>,
    rng: &mut Rng,
) -> Result<Matrix<T>> {
    let var = init_variance(scheme.kind, d_in, d_out, d_extra)?;
    let m = match scheme.distribution {
        InitDistribution::Normal => {
            let sd = var.sqrt();
            Matrix::from_fn(d_in, d_out, |_, _| T::lit(sd * rng.normal()))
        }
        InitDistribution::Uniform => {
            let bound = (3.0 * var).sqrt();
            Matrix::from_fn(d_in, d_out, |_, _| T::lit(bound * (2.0 * rng.uniform() - 1.0)))
        }
    };
    Ok(m)
}
