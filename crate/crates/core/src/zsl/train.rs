use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{InitDistribution, InitKind, InitScheme};
use crate::linalg::Matrix;
use crate::logits::{forward_logits, LogitConfig, LogitMode};
use crate::nn::{clip_global_norm, Embedder, EmbedderConfig, Mode, Optimizer, OptimizerKind, Parameterized};
use crate::norm::{attribute_normalize, attribute_standardize};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::zsl::dataset::{local_labels, LabeledFeatures, ZslDataset};
use crate::zsl::loss::loss;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributePreproc {
    /// Unit L2 norm per class.
    #[default]
    An,
    /// Zero mean, unit variance per attribute dimension.
    Standardize,
    None,
}

impl fmt::Display for AttributePreproc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributePreproc::An => "an",
            AttributePreproc::Standardize => "standardize",
            AttributePreproc::None => "none",
        })
    }
}

impl FromStr for AttributePreproc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "an" | "unit_norm" => Ok(AttributePreproc::An),
            "standardize" | "standardized" => Ok(AttributePreproc::Standardize),
            "none" | "raw" => Ok(AttributePreproc::None),
            _ => Err(Error::config(format!("unknown attribute preprocessing '{s}'"))),
        }
    }
}

impl AttributePreproc {
    /// Applies the preprocessing to a full attribute matrix.
    pub fn apply<T: Scalar>(self, a: &Matrix<T>) -> Result<Matrix<T>> {
        match self {
            AttributePreproc::An => attribute_normalize(a),
            AttributePreproc::Standardize => attribute_standardize(a).map(|s| s.output),
            AttributePreproc::None => Ok(a.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub hidden_dim: usize,
    pub n_hidden_layers: usize,
    pub logit_mode: LogitMode,
    pub gamma: f64,
    pub entropy_weight: f64,
    pub attribute_preproc: AttributePreproc,
    pub class_norm: bool,
    pub body_init: InitKind,
    pub output_init: InitKind,
    pub init_distribution: InitDistribution,
    pub optimizer: OptimizerKind,
    /// SGD momentum; ignored by Adam.
    pub momentum: f64,
    /// Global gradient-norm clip, if any.
    pub clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 50,
            lr: 0.005,
            hidden_dim: 1024,
            n_hidden_layers: 2,
            logit_mode: LogitMode::NormalizeScale,
            gamma: 5.0,
            entropy_weight: 0.001,
            attribute_preproc: AttributePreproc::An,
            class_norm: true,
            body_init: InitKind::XavierFanIn,
            output_init: InitKind::CnOutput,
            init_distribution: InitDistribution::Uniform,
            optimizer: OptimizerKind::Adam,
            momentum: 0.9,
            clip: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.n_hidden_layers > 0 && self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::config(format!("lr must be non-negative, got {}", self.lr)));
        }
        if !(self.entropy_weight.is_finite() && self.entropy_weight >= 0.0) {
            return Err(Error::config(format!(
                "entropy_weight must be non-negative, got {}",
                self.entropy_weight
            )));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::config(format!("clip must be positive, got {c}")));
            }
        }
        self.logit_config().validate()
    }

    pub fn logit_config(&self) -> LogitConfig {
        LogitConfig {
            mode: self.logit_mode,
            gamma: self.gamma,
            seen_scale: 1.0,
        }
    }

    pub fn embedder_config(&self, d_a: usize, d_z: usize) -> EmbedderConfig {
        EmbedderConfig {
            d_a,
            d_h: if self.n_hidden_layers == 0 { d_a } else { self.hidden_dim },
            d_z,
            n_hidden_layers: self.n_hidden_layers,
            class_norm: self.class_norm,
            body_init: InitScheme::new(self.body_init, self.init_distribution),
            output_init: InitScheme::new(self.output_init, self.init_distribution),
            momentum: crate::nn::DEFAULT_MOMENTUM,
        }
    }
}

/// Embedder together with the attribute preprocessing and logit settings it
/// was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct ZslModel<T> {
    pub embedder: Embedder<T>,
    pub preproc: AttributePreproc,
    pub logit: LogitConfig,
}

impl<T: Scalar> ZslModel<T> {
    pub fn init(cfg: &TrainConfig, d_a: usize, d_z: usize, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            embedder: Embedder::init(cfg.embedder_config(d_a, d_z), rng)?,
            preproc: cfg.attribute_preproc,
            logit: cfg.logit_config(),
        })
    }

    /// Eval-mode prototypes for `classes`, rows in the given order.
    pub fn prototypes(&self, attributes: &Matrix<T>, classes: &[usize]) -> Result<Matrix<T>> {
        let prepared = self.preproc.apply(attributes)?;
        self.embedder.predict(&prepared.select_rows(classes))
    }

    /// Eval-mode logits of `features` against `classes`.
    pub fn logits(&self, attributes: &Matrix<T>, classes: &[usize], features: &Matrix<T>) -> Result<Matrix<T>> {
        let w = self.prototypes(attributes, classes)?;
        forward_logits(features, &w, &self.logit).map(|(l, _)| l)
    }
}

/// What an observer sees after every optimizer step.
pub struct StepInfo<'a, T> {
    pub step: usize,
    pub logits: &'a Matrix<T>,
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
}

/// Read-only hook into a training run.
pub trait TrainObserver<T> {
    fn attach(&mut self) {}
    fn on_step(&mut self, info: &StepInfo<'_, T>);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: usize,
    pub epochs: Vec<EpochRecord>,
}

/// Model, optimizer and batch sampler that persist across calls to
/// [`Trainer::run_steps`].
pub struct Trainer<T> {
    pub model: ZslModel<T>,
    pub optimizer: Optimizer<T>,
    cfg: TrainConfig,
    batch_rng: Rng,
    order: Vec<usize>,
    cursor: usize,
    step: usize,
}

impl<T: Scalar> Trainer<T> {
    /// Parameters come from substream 0 of `cfg.seed`, batches from substream 1.
    pub fn new(cfg: &TrainConfig, d_a: usize, d_z: usize) -> Result<Self> {
        let model = ZslModel::init(cfg, d_a, d_z, &mut Rng::substream(cfg.seed, 0))?;
        Ok(Self {
            model,
            optimizer: Optimizer::new(cfg.optimizer, cfg.lr, cfg.momentum)?,
            cfg: cfg.clone(),
            batch_rng: Rng::substream(cfg.seed, 1),
            order: Vec::new(),
            cursor: 0,
            step: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Steps in one pass over `n` examples.
    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.cfg.batch_size)
    }

    fn next_batch(&mut self, n: usize) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.order = self.batch_rng.permutation(n);
            self.cursor = 0;
        }
        let end = (self.cursor + self.cfg.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }

    /// Takes `n_steps` optimizer steps on `data`, whose labels must lie in
    /// `classes`. Batches walk through fresh permutations of `data`; a new
    /// call starts a new permutation. Returns the per-step losses.
    pub fn run_steps(
        &mut self,
        attributes: &Matrix<T>,
        classes: &[usize],
        data: &LabeledFeatures<T>,
        n_steps: usize,
        observers: &mut [&mut dyn TrainObserver<T>],
    ) -> Result<Vec<f64>> {
        if n_steps == 0 {
            return Ok(Vec::new());
        }
        if data.is_empty() {
            return Err(Error::InsufficientData("no training examples".into()));
        }
        if classes.len() < 2 && self.model.embedder.class_norm().is_some() {
            return Err(Error::InsufficientData(format!(
                "class standardization needs at least 2 training classes, got {}",
                classes.len()
            )));
        }
        let labels = local_labels(&data.labels, classes)?;
        let prepared = self.model.preproc.apply(attributes)?.select_rows(classes);
        self.model.embedder.set_mode(Mode::Train);
        self.order.clear();
        self.cursor = 0;
        let mut losses = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let batch = self.next_batch(data.len());
            let z = data.features.select_rows(&batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (w, cache) = self.model.embedder.forward(&prepared)?;
            let (logits, logit_cache) = forward_logits(&z, &w, &self.model.logit)?;
            let (value, d_logits) = loss(&logits, &y, self.cfg.entropy_weight)?;
            if !value.is_finite() {
                return Err(Error::Degenerate(format!("loss became non-finite at step {}", self.step)));
            }
            let (_, d_w) = logit_cache.backward(&d_logits)?;
            let mut tape = self.model.embedder.backward(&cache, &d_w)?;
            let grad_norm = match self.cfg.clip {
                Some(c) => clip_global_norm(&mut tape, c)?,
                None => tape.global_norm().as_f64(),
            };
            self.optimizer.step(self.model.embedder.parameters_mut(), &tape)?;
            self.step += 1;
            let info = StepInfo {
                step: self.step,
                logits: &logits,
                loss: value,
                grad_norm,
            };
            for o in observers.iter_mut() {
                o.on_step(&info);
            }
            losses.push(value);
        }
        self.model.embedder.set_mode(Mode::Eval);
        Ok(losses)
    }
}

/// Trains on the seen classes of `data` for `cfg.epochs` epochs.
pub fn train<T: Scalar>(cfg: &TrainConfig, data: &ZslDataset<T>) -> Result<(ZslModel<T>, TrainLog)> {
    train_observed(cfg, data, &mut [])
}

pub fn train_observed<T: Scalar>(
    cfg: &TrainConfig,
    data: &ZslDataset<T>,
    observers: &mut [&mut dyn TrainObserver<T>],
) -> Result<(ZslModel<T>, TrainLog)> {
    data.validate()?;
    let mut trainer = Trainer::new(cfg, data.attribute_dim(), data.feature_dim())?;
    for o in observers.iter_mut() {
        o.attach();
    }
    let per_epoch = trainer.steps_per_epoch(data.train.len());
    let losses = trainer.run_steps(
        &data.attributes,
        &data.seen_classes,
        &data.train,
        cfg.epochs * per_epoch,
        observers,
    )?;
    let epochs = losses
        .chunks(per_epoch.max(1))
        .enumerate()
        .map(|(e, chunk)| EpochRecord {
            epoch: e + 1,
            mean_loss: chunk.iter().sum::<f64>() / chunk.len() as f64,
        })
        .collect();
    trainer.model.embedder.set_mode(Mode::Eval);
    Ok((
        trainer.model,
        TrainLog {
            steps: losses.len(),
            epochs,
        },
    ))
}
