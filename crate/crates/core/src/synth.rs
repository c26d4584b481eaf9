//! Synthetic zero-shot data: class attributes, a random nonlinear map to
//! class centers, and Gaussian feature noise around each center.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::zsl::{LabeledFeatures, Pool, SplitSpec, ZslDataset};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrModel {
    /// i.i.d. N(0, 1) entries.
    #[default]
    Gaussian,
    /// exp of i.i.d. N(0, 1) entries: positive and long-tailed.
    Lognormal,
}

impl fmt::Display for AttrModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttrModel::Gaussian => "gaussian",
            AttrModel::Lognormal => "lognormal",
        })
    }
}

impl FromStr for AttrModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(AttrModel::Gaussian),
            "lognormal" => Ok(AttrModel::Lognormal),
            _ => Err(Error::config(format!("unknown attribute model '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub k_seen: usize,
    pub k_unseen: usize,
    pub d_a: usize,
    pub d_z: usize,
    /// Train plus test examples per class.
    pub n_per_class: usize,
    pub attr_model: AttrModel,
    /// Standard deviation of the feature noise.
    pub noise: f64,
    /// Share of each class's examples that go to the test split.
    pub test_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            k_seen: 20,
            k_unseen: 5,
            d_a: 32,
            d_z: 128,
            n_per_class: 50,
            attr_model: AttrModel::Gaussian,
            noise: 0.5,
            test_fraction: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_seen < 2 || self.k_unseen < 1 || self.d_a < 1 || self.d_z < 1 {
            return Err(Error::config(format!(
                "need k_seen >= 2 and k_unseen, d_a, d_z >= 1, got {}/{}/{}/{}",
                self.k_seen, self.k_unseen, self.d_a, self.d_z
            )));
        }
        if self.n_per_class < 2 {
            return Err(Error::config("n_per_class must be at least 2 to fill both splits"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config(format!("noise must be finite and nonnegative, got {}", self.noise)));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.k_seen + self.k_unseen
    }

    fn n_test(&self) -> usize {
        ((self.n_per_class as f64 * self.test_fraction).round() as usize).clamp(1, self.n_per_class - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData<T> {
    pub pool: Pool<T>,
    pub split: SplitSpec,
    /// Noise-free feature vector of every class.
    pub centers: Matrix<T>,
}

impl<T: Scalar> SynthData<T> {
    pub fn dataset(&self) -> Result<ZslDataset<T>> {
        self.pool.split_with(&self.split.seen, &self.split.unseen)
    }
}

/// Draws a synthetic problem. Centers are `tanh(a M)` with `M` having
/// N(0, 1/d_a) entries, rescaled so that the average center has unit
/// per-coordinate scale before the nonlinearity.
pub fn generate<T: Scalar>(cfg: &SynthConfig, rng: &mut Rng) -> Result<SynthData<T>> {
    cfg.validate()?;
    let k = cfg.n_classes();
    let attributes: Matrix<f64> = Matrix::from_fn(k, cfg.d_a, |_, _| {
        let x = rng.normal();
        match cfg.attr_model {
            AttrModel::Gaussian => x,
            AttrModel::Lognormal => x.exp(),
        }
    });
    let mean_sq = attributes.sum_sq() / (k * cfg.d_a) as f64;
    let map_std = 1.0 / (cfg.d_a as f64 * mean_sq).sqrt();
    let map: Matrix<f64> = Matrix::from_fn(cfg.d_a, cfg.d_z, |_, _| rng.normal() * map_std);
    let centers = attributes.matmul(&map)?.map(f64::tanh);

    let n_test = cfg.n_test();
    let n_train = cfg.n_per_class - n_test;
    let mut sample = |n: usize| {
        let mut rows = Vec::with_capacity(n * k * cfg.d_z);
        let mut labels = Vec::with_capacity(n * k);
        for c in 0..k {
            for _ in 0..n {
                rows.extend(centers.row(c).iter().map(|&m| m + cfg.noise * rng.normal()));
                labels.push(c);
            }
        }
        LabeledFeatures::new(Matrix::new(n * k, cfg.d_z, rows)?.cast(), labels)
    };
    let train = sample(n_train)?;
    let test = sample(n_test)?;

    let perm = rng.permutation(k);
    let mut seen = perm[..cfg.k_seen].to_vec();
    let mut unseen = perm[cfg.k_seen..].to_vec();
    seen.sort_unstable();
    unseen.sort_unstable();
    Ok(SynthData {
        pool: Pool::new(attributes.cast(), train, test)?,
        split: SplitSpec { seen, unseen },
        centers: centers.cast(),
    })
}

/// Same data with training labels permuted among the seen classes.
pub fn shuffle_labels<T: Scalar>(data: &SynthData<T>, rng: &mut Rng) -> SynthData<T> {
    let mut out = data.clone();
    let labels = &mut out.pool.train.labels;
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| data.split.seen.contains(&labels[i])).collect();
    let mut values: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
    rng.shuffle(&mut values);
    for (&i, v) in idx.iter().zip(values) {
        labels[i] = v;
    }
    out
}
