use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::init_variance;
use crate::linalg::{dot, Matrix};
use crate::nn::{Embedder, EmbedderConfig};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::stats::summarize_draws;
use crate::theory::{predicted_ns_variance, predicted_prelogit_variance};
use crate::variance_lab::VarianceReport;
use crate::zsl::AttributePreproc;

pub const MIN_COSINE_TRIALS: usize = 1000;

/// `γ² · cos(x, y)`.
pub fn scaled_cosine(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    gamma * gamma * dot(x, y) / (dot(x, x).sqrt() * dot(y, y).sqrt())
}

/// Variance of `γ²·cos(x, y)` for independent `x, y ~ N(0, I_d)`, one report
/// per entry of `d_list`.
pub fn synthetic_cosine_experiment(d_list: &[usize], gamma: f64, trials: usize, rng: &mut Rng) -> Result<Vec<VarianceReport>> {
    if trials < MIN_COSINE_TRIALS {
        return Err(Error::config(format!(
            "cosine experiment needs at least {MIN_COSINE_TRIALS} trials, got {trials}"
        )));
    }
    d_list
        .iter()
        .map(|&d| {
            let predicted = predicted_ns_variance(gamma, d)?;
            let mut stream = rng.fork();
            let mut x = vec![0.0; d];
            let mut y = vec![0.0; d];
            let draws: Vec<f64> = (0..trials)
                .map(|_| {
                    x.iter_mut().for_each(|v| *v = stream.normal());
                    y.iter_mut().for_each(|v| *v = stream.normal());
                    scaled_cosine(&x, &y, gamma)
                })
                .collect();
            VarianceReport::from_estimate("cosine", Some(d), Some(gamma), predicted, &summarize_draws(&draws))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrelogitSetup {
    pub embedder: EmbedderConfig,
    pub source: AttributePreproc,
    /// Per-coordinate variance of the features `z`.
    pub var_z: f64,
}

impl PrelogitSetup {
    pub fn label(&self) -> String {
        format!(
            "prelogit layers={} cn={} body={} output={} attributes={}",
            self.embedder.n_hidden_layers,
            self.embedder.class_norm,
            self.embedder.body_init.kind,
            self.embedder.output_init.kind,
            self.source
        )
    }
}

/// Variance of the pre-logit `zᵀp_c` at initialization. Every trial draws a
/// fresh embedder, embeds all classes in train mode, picks one class at
/// random and one `z ~ N(0, var_z·I)`.
///
/// The prediction is `d_z · var_z · Var(V) · E‖x‖²`, with `x` the input of
/// `V` and the expectation taken over trials and classes.
pub fn prelogit_variance_experiment<T: Scalar>(
    setup: &PrelogitSetup,
    attributes: &Matrix<T>,
    trials: usize,
    rng: &mut Rng,
) -> Result<VarianceReport> {
    setup.embedder.validate()?;
    if trials < 2 {
        return Err(Error::config(format!("need at least 2 trials, got {trials}")));
    }
    if !(setup.var_z > 0.0 && setup.var_z.is_finite()) {
        return Err(Error::config(format!("var_z must be positive, got {}", setup.var_z)));
    }
    let prepared = setup.source.apply(attributes)?;
    let k = prepared.rows();
    if k == 0 {
        return Err(Error::InsufficientData("no attribute rows".into()));
    }
    let d_z = setup.embedder.d_z;
    let d_h = setup.embedder.hidden_dim();
    let var_v = init_variance(setup.embedder.output_init.kind, d_h, d_z, Some(d_h))?;
    let z_std = setup.var_z.sqrt();

    let mut draws = Vec::with_capacity(trials);
    let mut sq_norm_total = 0.0;
    for _ in 0..trials {
        let mut embedder: Embedder<T> = Embedder::init(setup.embedder.clone(), rng)?;
        let (w, cache) = embedder.forward(&prepared)?;
        let x = cache.projected_input();
        sq_norm_total += x.sum_sq().as_f64() / k as f64;
        let c = rng.below(k);
        let y: f64 = w.row(c).iter().map(|p| p.as_f64() * z_std * rng.normal()).sum();
        draws.push(y);
    }
    let mean_sq_norm = sq_norm_total / trials as f64;
    let predicted = predicted_prelogit_variance(d_z, setup.var_z, var_v, mean_sq_norm)?;
    VarianceReport::from_estimate(setup.label(), Some(d_z), None, predicted, &summarize_draws(&draws))
}
