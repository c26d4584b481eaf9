//! Gradient-magnitude probe of loss-surface smoothness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::{InitKind, InitScheme};
use crate::linalg::Matrix;
use crate::logits::forward_logits;
use crate::nn::{clip_global_norm, GradientTape, Mode, Optimizer, Parameterized, PlainClassifier};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::zsl::dataset::local_labels;
use crate::zsl::{loss, LabeledFeatures, TrainConfig, Trainer, ZslDataset, ZslModel};

/// A model whose loss gradient can be taken on a labeled feature batch.
pub trait ProbeTarget<T: Scalar> {
    /// Classes the model predicts over, in logit order.
    fn classes(&self) -> &[usize];

    fn param_count(&self) -> usize;

    /// Gradient of the training loss on `z` with global `labels`. With
    /// `attribute_noise`, class attributes are perturbed by N(0, I) too.
    fn gradient(&self, z: &Matrix<T>, labels: &[usize], attribute_noise: Option<&mut Rng>) -> Result<GradientTape<T>>;
}

pub struct ZslTarget<'a, T> {
    pub model: &'a ZslModel<T>,
    pub attributes: &'a Matrix<T>,
    pub classes: Vec<usize>,
    pub entropy_weight: f64,
}

impl<T: Scalar> ProbeTarget<T> for ZslTarget<'_, T> {
    fn classes(&self) -> &[usize] {
        &self.classes
    }

    fn param_count(&self) -> usize {
        self.model.embedder.param_count()
    }

    fn gradient(&self, z: &Matrix<T>, labels: &[usize], attribute_noise: Option<&mut Rng>) -> Result<GradientTape<T>> {
        let mut embedder = self.model.embedder.clone();
        embedder.set_mode(Mode::Train);
        let mut prepared = self.model.preproc.apply(self.attributes)?.select_rows(&self.classes);
        if let Some(rng) = attribute_noise {
            prepared.as_mut_slice().iter_mut().for_each(|v| *v += T::lit(rng.normal()));
        }
        let (w, cache) = embedder.forward(&prepared)?;
        let (logits, logit_cache) = forward_logits(z, &w, &self.model.logit)?;
        let (_, d_logits) = loss(&logits, &local_labels(labels, &self.classes)?, self.entropy_weight)?;
        let (_, d_w) = logit_cache.backward(&d_logits)?;
        embedder.backward(&cache, &d_w)
    }
}

pub struct PlainTarget<'a, T> {
    pub classifier: &'a PlainClassifier<T>,
    pub classes: Vec<usize>,
    pub entropy_weight: f64,
}

impl<T: Scalar> ProbeTarget<T> for PlainTarget<'_, T> {
    fn classes(&self) -> &[usize] {
        &self.classes
    }

    fn param_count(&self) -> usize {
        self.classifier.param_count()
    }

    fn gradient(&self, z: &Matrix<T>, labels: &[usize], _: Option<&mut Rng>) -> Result<GradientTape<T>> {
        let (logits, cache) = self.classifier.forward(z)?;
        let (_, d_logits) = loss(&logits, &local_labels(labels, &self.classes)?, self.entropy_weight)?;
        self.classifier.backward(&cache, &d_logits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothnessOptions {
    pub n_batches: usize,
    pub batch_size: usize,
    pub perturb_attributes: bool,
}

impl Default for SmoothnessOptions {
    fn default() -> Self {
        Self {
            n_batches: 10,
            batch_size: 256,
            perturb_attributes: false,
        }
    }
}

/// Mean over `n_batches` batches (drawn with replacement, features plus
/// N(0, I) noise) of the loss gradient norm divided by the parameter count.
pub fn smoothness_probe<T: Scalar>(
    target: &dyn ProbeTarget<T>,
    data: &LabeledFeatures<T>,
    opts: &SmoothnessOptions,
    rng: &mut Rng,
) -> Result<f64> {
    if opts.n_batches == 0 || opts.batch_size == 0 {
        return Err(Error::config("smoothness probe needs at least one batch of at least one example"));
    }
    let data = data.filter_classes(target.classes());
    if data.is_empty() {
        return Err(Error::InsufficientData("no examples of the target's classes".into()));
    }
    let n_params = target.param_count() as f64;
    let mut total = 0.0;
    for _ in 0..opts.n_batches {
        let idx: Vec<usize> = (0..opts.batch_size).map(|_| rng.below(data.len())).collect();
        let batch = data.select(&idx);
        let mut z = batch.features;
        z.as_mut_slice().iter_mut().for_each(|v| *v += T::lit(rng.normal()));
        let noise = if opts.perturb_attributes { Some(&mut *rng) } else { None };
        let g = target.gradient(&z, &batch.labels, noise)?;
        total += g.global_norm().as_f64() / n_params;
    }
    Ok(total / opts.n_batches as f64)
}

/// Feature classifier trained with the batching and optimizer of [`Trainer`].
pub struct PlainTrainer<T> {
    pub classifier: PlainClassifier<T>,
    optimizer: Optimizer<T>,
    cfg: TrainConfig,
    batch_rng: Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl<T: Scalar> PlainTrainer<T> {
    /// `n_hidden_layers + 1` dense layers, so layer counts match an embedder
    /// trained with the same config.
    pub fn new(cfg: &TrainConfig, d_z: usize, n_classes: usize) -> Result<Self> {
        cfg.validate()?;
        let classifier = PlainClassifier::init(
            d_z,
            cfg.hidden_dim,
            n_classes,
            cfg.n_hidden_layers + 1,
            InitScheme::new(cfg.body_init, cfg.init_distribution),
            &mut Rng::substream(cfg.seed, 0),
        )?;
        Ok(Self {
            classifier,
            optimizer: Optimizer::new(cfg.optimizer, cfg.lr, cfg.momentum)?,
            cfg: cfg.clone(),
            batch_rng: Rng::substream(cfg.seed, 1),
            order: Vec::new(),
            cursor: 0,
        })
    }

    pub fn run_steps(&mut self, classes: &[usize], data: &LabeledFeatures<T>, n_steps: usize) -> Result<Vec<f64>> {
        if data.is_empty() {
            return Err(Error::InsufficientData("no training examples".into()));
        }
        let labels = local_labels(&data.labels, classes)?;
        let mut losses = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            if self.cursor >= self.order.len() {
                self.order = self.batch_rng.permutation(data.len());
                self.cursor = 0;
            }
            let end = (self.cursor + self.cfg.batch_size).min(self.order.len());
            let batch = &self.order[self.cursor..end];
            self.cursor = end;
            let z = data.features.select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (logits, cache) = self.classifier.forward(&z)?;
            let (value, d_logits) = loss(&logits, &y, self.cfg.entropy_weight)?;
            let mut tape = self.classifier.backward(&cache, &d_logits)?;
            if let Some(c) = self.cfg.clip {
                clip_global_norm(&mut tape, c)?;
            }
            self.optimizer.step(self.classifier.parameters_mut(), &tape)?;
            losses.push(value);
        }
        Ok(losses)
    }
}

/// Trains a plain classifier on the seen classes of `data` for `cfg.epochs`.
pub fn train_plain<T: Scalar>(cfg: &TrainConfig, data: &ZslDataset<T>) -> Result<PlainClassifier<T>> {
    data.validate()?;
    let mut t = PlainTrainer::new(cfg, data.feature_dim(), data.seen_classes.len())?;
    let steps = cfg.epochs * data.train.len().div_ceil(cfg.batch_size);
    t.run_steps(&data.seen_classes, &data.train, steps)?;
    Ok(t.classifier)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessComparison {
    /// Optimizer steps taken before each probe.
    pub steps: Vec<usize>,
    pub plain: Vec<f64>,
    pub zsl: Vec<f64>,
    pub zsl_cn: Vec<f64>,
}

impl SmoothnessComparison {
    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Trace means `(plain, zsl, zsl_cn)`.
    pub fn means(&self) -> (f64, f64, f64) {
        (Self::mean(&self.plain), Self::mean(&self.zsl), Self::mean(&self.zsl_cn))
    }
}

/// Trains a plain classifier, a ZSL model without class normalization and
/// one with it, all from `cfg` and on the same batches, probing each every
/// `probe_every` steps (and at initialization) with identical probe batches.
///
/// The model without class normalization uses Xavier fan-out for `V`.
pub fn smoothness_comparison<T: Scalar>(
    cfg: &TrainConfig,
    data: &ZslDataset<T>,
    total_steps: usize,
    probe_every: usize,
    opts: &SmoothnessOptions,
) -> Result<SmoothnessComparison> {
    data.validate()?;
    if probe_every == 0 {
        return Err(Error::config("probe interval must be at least 1"));
    }
    let classes = data.seen_classes.clone();
    let vanilla = TrainConfig {
        class_norm: false,
        output_init: InitKind::XavierFanOut,
        ..cfg.clone()
    };
    let with_cn = TrainConfig {
        class_norm: true,
        output_init: InitKind::CnOutput,
        ..cfg.clone()
    };
    let mut plain = PlainTrainer::new(cfg, data.feature_dim(), classes.len())?;
    let mut zsl = Trainer::new(&vanilla, data.attribute_dim(), data.feature_dim())?;
    let mut zsl_cn = Trainer::new(&with_cn, data.attribute_dim(), data.feature_dim())?;

    let mut out = SmoothnessComparison {
        steps: Vec::new(),
        plain: Vec::new(),
        zsl: Vec::new(),
        zsl_cn: Vec::new(),
    };
    let mut done = 0;
    loop {
        let seed = Rng::substream(cfg.seed, 2).next_u64() ^ done as u64;
        let probe = |target: &dyn ProbeTarget<T>| smoothness_probe(target, &data.train, opts, &mut Rng::seed_from(seed));
        out.steps.push(done);
        out.plain.push(probe(&PlainTarget {
            classifier: &plain.classifier,
            classes: classes.clone(),
            entropy_weight: cfg.entropy_weight,
        })?);
        for (trainer, trace) in [(&zsl, &mut out.zsl), (&zsl_cn, &mut out.zsl_cn)] {
            trace.push(probe(&ZslTarget {
                model: &trainer.model,
                attributes: &data.attributes,
                classes: classes.clone(),
                entropy_weight: cfg.entropy_weight,
            })?);
        }
        if done >= total_steps {
            break;
        }
        let n = probe_every.min(total_steps - done);
        plain.run_steps(&classes, &data.train, n)?;
        zsl.run_steps(&data.attributes, &classes, &data.train, n, &mut [])?;
        zsl_cn.run_steps(&data.attributes, &classes, &data.train, n, &mut [])?;
        done += n;
    }
    Ok(out)
}
