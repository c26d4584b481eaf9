use std::path::PathBuf;

use clap::Args;
use classnorm::czsl::{czsl_cross_validate, czsl_metrics, forgetting, run_sequence, split_tasks, TaskSequence};
use classnorm::init::{InitKind, InitScheme};
use classnorm::logits::SEEN_SCALE_GRID;
use classnorm::nn::{EmbedderConfig, DEFAULT_MOMENTUM};
use classnorm::synth::{generate, shuffle_labels, AttrModel, SynthConfig};
use classnorm::theory::{optimal_gamma, predicted_ns_variance};
use classnorm::variance_lab::{
    attribute_diagnostics, prelogit_variance_experiment, smoothness_comparison, synthetic_cosine_experiment,
    PrelogitSetup, SmoothnessOptions, VarianceReport, REPORT_CSV_HEADER,
};
use classnorm::zsl::{gzsl_eval, sweep_seen_scale, train, AttributePreproc, EvalReport};
use classnorm::{Error, Matrix, Result, Rng};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::io::{load_checkpoint, save_checkpoint, AttributeFile, DataDir, ATTRIBUTES_FILE};
use crate::output::{cell, opt_cell, Output, Table};

/// Stream of the seed reserved for task splits.
const TASK_SPLIT_STREAM: u64 = 7;

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Experiment config file (key = value per line)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. --set gamma=6
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self, seed: u64) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        cfg.train.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn eval_row(table: &mut Table, r: &EvalReport) {
    table.push(vec![
        cell(r.gzsl_u),
        cell(r.gzsl_s),
        cell(r.gzsl_h),
        cell(r.ausuc),
        cell(r.seen_scale_used),
    ]);
}

const EVAL_HEADER: [&str; 5] = ["gzsl_u", "gzsl_s", "gzsl_h", "ausuc", "seen_scale"];

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{what}: cannot parse '{v}'")))
        })
        .collect()
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// Output data directory
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = SynthConfig::default().k_seen)]
    pub k_seen: usize,
    #[arg(long, default_value_t = SynthConfig::default().k_unseen)]
    pub k_unseen: usize,
    #[arg(long, default_value_t = SynthConfig::default().d_a)]
    pub d_a: usize,
    #[arg(long, default_value_t = SynthConfig::default().d_z)]
    pub d_z: usize,
    /// Train plus test examples per class
    #[arg(long, default_value_t = SynthConfig::default().n_per_class)]
    pub n_per_class: usize,
    /// gaussian | lognormal
    #[arg(long, default_value_t = SynthConfig::default().attr_model)]
    pub attr_model: AttrModel,
    /// Standard deviation of the feature noise
    #[arg(long, default_value_t = SynthConfig::default().noise)]
    pub noise: f64,
    #[arg(long, default_value_t = SynthConfig::default().test_fraction)]
    pub test_fraction: f64,
    /// Permute labels among seen-class training examples
    #[arg(long)]
    pub shuffle_labels: bool,
}

pub fn synth(a: &SynthArgs) -> Result<Output> {
    let cfg = SynthConfig {
        k_seen: a.k_seen,
        k_unseen: a.k_unseen,
        d_a: a.d_a,
        d_z: a.d_z,
        n_per_class: a.n_per_class,
        attr_model: a.attr_model,
        noise: a.noise,
        test_fraction: a.test_fraction,
    };
    let mut rng = Rng::seed_from(a.seed);
    let mut data = generate::<f64>(&cfg, &mut rng)?;
    if a.shuffle_labels {
        data = shuffle_labels(&data, &mut rng);
    }
    let k = cfg.n_classes();
    let dir = DataDir {
        ids: (0..k as u32).collect(),
        pool: data.pool,
        split: Some(data.split),
    };
    dir.save(&a.dir)?;
    let split = dir.split.as_ref().unwrap();
    let summary = json!({
        "dir": a.dir.display().to_string(),
        "seed": a.seed,
        "config": cfg,
        "shuffled_labels": a.shuffle_labels,
        "n_train": dir.pool.train.len(),
        "n_test": dir.pool.test.len(),
        "seen": split.seen,
        "unseen": split.unseen,
    });
    let mut table = Table::new(&["class", "role"]);
    for &c in &split.seen {
        table.push(vec![cell(c), "seen".into()]);
    }
    for &c in &split.unseen {
        table.push(vec![cell(c), "unseen".into()]);
    }
    Output::new(&summary, table)
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Data directory with attributes, features and split
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the checkpoint (sidecar gets a .json extension)
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn train_cmd(a: &TrainArgs) -> Result<Output> {
    let cfg = a.config.resolve(a.seed)?;
    let dir = DataDir::load(&a.data)?;
    let split = dir.require_split()?;
    let data = dir.pool.split_with(&split.seen, &split.unseen)?;
    let (model, log) = train(&cfg.train, &data)?;
    save_checkpoint(&a.checkpoint, &model, &cfg.train)?;
    let report = gzsl_eval(&model, &data, cfg.seen_scale)?;
    let mut table = Table::new(&EVAL_HEADER);
    eval_row(&mut table, &report);
    Output::new(
        &json!({
            "config": cfg,
            "checkpoint": a.checkpoint.display().to_string(),
            "log": log,
            "report": report,
        }),
        table,
    )
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Multiplier on seen-class logits
    #[arg(long, default_value_t = 1.0)]
    pub seen_scale: f64,
}

pub fn eval(a: &EvalArgs) -> Result<Output> {
    if !(a.seen_scale > 0.0 && a.seen_scale.is_finite()) {
        return Err(Error::Config(format!("seen scale must be positive, got {}", a.seen_scale)));
    }
    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let dir = DataDir::load(&a.data)?;
    let split = dir.require_split()?;
    let report = gzsl_eval(&model, &dir.pool.split_with(&split.seen, &split.unseen)?, a.seen_scale)?;
    let mut table = Table::new(&EVAL_HEADER);
    eval_row(&mut table, &report);
    Output::new(&report, table)
}

#[derive(Args, Debug, Clone)]
pub struct GammaArgs {
    /// Target logit variance
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Feature dimension
    #[arg(long, default_value_t = 2048)]
    pub d_z: usize,
}

pub fn gamma(a: &GammaArgs) -> Result<Output> {
    let g = optimal_gamma(a.nu, a.d_z)?;
    let v = predicted_ns_variance(g, a.d_z)?;
    let mut table = Table::new(&["nu", "d_z", "gamma", "predicted_variance"]);
    table.push(vec![cell(a.nu), cell(a.d_z), cell(g), cell(v)]);
    Output::new(
        &json!({ "nu": a.nu, "d_z": a.d_z, "gamma": g, "predicted_variance": v }),
        table,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    /// Variance of scaled cosine logits for Gaussian vectors
    Cosine,
    /// Pre-logit variance of a freshly initialized embedder
    Prelogit,
}

#[derive(Args, Debug, Clone)]
pub struct VarianceLabArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long)]
    pub seed: u64,
    /// Monte-Carlo trials per setting
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Relative tolerance for the within_tolerance flag
    #[arg(long, default_value_t = 0.1)]
    pub tolerance: f64,
    /// [cosine] comma-separated dimensions
    #[arg(long, default_value = "32,64,128,256,512,1024,2048,4096,8192")]
    pub d_list: String,
    /// [cosine] comma-separated scales
    #[arg(long, default_value = "1,5")]
    pub gamma_list: String,
    /// [prelogit] number of classes
    #[arg(long, default_value_t = 50)]
    pub classes: usize,
    /// [prelogit] attribute dimension
    #[arg(long, default_value_t = 32)]
    pub d_a: usize,
    /// [prelogit] hidden width
    #[arg(long, default_value_t = 256)]
    pub d_h: usize,
    /// [prelogit] feature dimension
    #[arg(long, default_value_t = 128)]
    pub d_z: usize,
    /// [prelogit] hidden layers (0 = linear embedder)
    #[arg(long, default_value_t = 0)]
    pub layers: usize,
    /// [prelogit] standardize class embeddings
    #[arg(long)]
    pub class_norm: bool,
    /// [prelogit] body init scheme
    #[arg(long, default_value_t = InitKind::XavierFanIn)]
    pub body_init: InitKind,
    /// [prelogit] output init scheme
    #[arg(long, default_value_t = InitKind::XavierFanOut)]
    pub output_init: InitKind,
    /// [prelogit] attribute preprocessing: an | standardize | none
    #[arg(long, default_value_t = AttributePreproc::An)]
    pub source: AttributePreproc,
    /// [prelogit] attribute distribution: gaussian | lognormal
    #[arg(long, default_value_t = AttrModel::Gaussian)]
    pub attr_model: AttrModel,
    /// [prelogit] multiplier on the raw attributes
    #[arg(long, default_value_t = 1.0)]
    pub attr_scale: f64,
    /// [prelogit] per-coordinate variance of z
    #[arg(long, default_value_t = 1.0)]
    pub var_z: f64,
    /// [prelogit] attribute file instead of synthetic attributes
    #[arg(long)]
    pub attributes: Option<PathBuf>,
}

#[derive(Serialize)]
struct CheckedReport<'a> {
    #[serde(flatten)]
    report: &'a VarianceReport,
    relative_error: f64,
    within_tolerance: bool,
}

fn report_table(reports: &[VarianceReport], tolerance: f64) -> Table {
    let mut header: Vec<&str> = REPORT_CSV_HEADER.to_vec();
    header.push("within_tolerance");
    let mut t = Table::new(&header);
    for r in reports {
        t.push(vec![
            r.setting.clone(),
            opt_cell(r.d),
            opt_cell(r.gamma),
            cell(r.predicted),
            cell(r.empirical),
            cell(r.stderr),
            cell(r.trials),
            cell(r.within_tolerance(tolerance)),
        ]);
    }
    t
}

pub fn synthetic_attributes(k: usize, d_a: usize, model: AttrModel, scale: f64, rng: &mut Rng) -> Matrix<f64> {
    let base: Matrix<f64> = rng.normal_matrix(k, d_a);
    match model {
        AttrModel::Gaussian => base.map(|v| scale * v),
        AttrModel::Lognormal => base.map(|v| scale * v.exp()),
    }
}

pub fn variance_lab(a: &VarianceLabArgs) -> Result<Output> {
    if !(a.tolerance > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", a.tolerance)));
    }
    let mut rng = Rng::seed_from(a.seed);
    let reports = match a.experiment {
        Experiment::Cosine => {
            let ds: Vec<usize> = parse_list("d-list", &a.d_list)?;
            let gammas: Vec<f64> = parse_list("gamma-list", &a.gamma_list)?;
            let mut all = Vec::new();
            for g in gammas {
                all.extend(synthetic_cosine_experiment(&ds, g, a.trials, &mut rng)?);
            }
            all
        }
        Experiment::Prelogit => {
            let attributes = match &a.attributes {
                Some(p) => AttributeFile::load(p)?.attributes,
                None => synthetic_attributes(a.classes, a.d_a, a.attr_model, a.attr_scale, &mut rng),
            };
            let setup = PrelogitSetup {
                embedder: EmbedderConfig {
                    d_a: attributes.cols(),
                    d_h: if a.layers == 0 { attributes.cols() } else { a.d_h },
                    d_z: a.d_z,
                    n_hidden_layers: a.layers,
                    class_norm: a.class_norm,
                    body_init: InitScheme::uniform(a.body_init),
                    output_init: InitScheme::uniform(a.output_init),
                    momentum: DEFAULT_MOMENTUM,
                },
                source: a.source,
                var_z: a.var_z,
            };
            vec![prelogit_variance_experiment(&setup, &attributes, a.trials, &mut rng)?]
        }
    };
    let checked: Vec<CheckedReport<'_>> = reports
        .iter()
        .map(|r| CheckedReport {
            report: r,
            relative_error: r.relative_error(),
            within_tolerance: r.within_tolerance(a.tolerance),
        })
        .collect();
    Output::new(
        &json!({ "seed": a.seed, "tolerance": a.tolerance, "reports": checked }),
        report_table(&reports, a.tolerance),
    )
}

#[derive(Args, Debug, Clone)]
pub struct AttrStatsArgs {
    /// Attribute CSV file
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub attributes: Option<PathBuf>,
    /// Data directory (its attribute file is used)
    #[arg(long)]
    pub data: Option<PathBuf>,
}

pub fn attr_stats(a: &AttrStatsArgs) -> Result<Output> {
    let path = match (&a.attributes, &a.data) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join(ATTRIBUTES_FILE),
        (None, None) => return Err(Error::Config("either --attributes or --data is required".into())),
    };
    let file = AttributeFile::load(&path)?;
    let d = attribute_diagnostics(&file.attributes)?;
    let mut table = Table::new(&["column", "k2", "p_value", "mean_abs_corr"]);
    for n in &d.normality {
        let corr = d
            .correlation
            .columns
            .iter()
            .position(|&c| c == n.column)
            .map(|i| d.correlation.mean_abs[i]);
        table.push(vec![cell(n.column), cell(n.k2), cell(n.p_value), opt_cell(corr)]);
    }
    Output::new(&d, table)
}

#[derive(Args, Debug, Clone)]
pub struct ProbeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Optimizer steps per model
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Probe every this many steps (and at initialization)
    #[arg(long, default_value_t = 50)]
    pub probe_every: usize,
    /// Probe batches per measurement
    #[arg(long, default_value_t = SmoothnessOptions::default().n_batches)]
    pub n_batches: usize,
    /// Probe batch size
    #[arg(long, default_value_t = SmoothnessOptions::default().batch_size)]
    pub probe_batch_size: usize,
    /// Also add N(0, I) noise to the attributes when probing
    #[arg(long)]
    pub perturb_attributes: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn probe_smoothness(a: &ProbeArgs) -> Result<Output> {
    let cfg = a.config.resolve(a.seed)?;
    let dir = DataDir::load(&a.data)?;
    let split = dir.require_split()?;
    let data = dir.pool.split_with(&split.seen, &split.unseen)?;
    let opts = SmoothnessOptions {
        n_batches: a.n_batches,
        batch_size: a.probe_batch_size,
        perturb_attributes: a.perturb_attributes,
    };
    let cmp = smoothness_comparison(&cfg.train, &data, a.steps, a.probe_every, &opts)?;
    let (plain, zsl, zsl_cn) = cmp.means();
    let mut table = Table::new(&["step", "plain", "zsl", "zsl_cn"]);
    for i in 0..cmp.steps.len() {
        table.push(vec![cell(cmp.steps[i]), cell(cmp.plain[i]), cell(cmp.zsl[i]), cell(cmp.zsl_cn[i])]);
    }
    Output::new(
        &json!({
            "config": cfg,
            "options": opts,
            "trace": cmp,
            "mean": { "plain": plain, "zsl": zsl, "zsl_cn": zsl_cn },
        }),
        table,
    )
}

#[derive(Args, Debug, Clone)]
pub struct CzslArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Select hyperparameters on this many leading tasks, then run the rest
    #[arg(long)]
    pub cv_tasks: Option<usize>,
    /// Grid axis for --cv-tasks, e.g. --grid lr=0.001,0.005 (repeatable)
    #[arg(long, value_name = "KEY=V1,V2,...")]
    pub grid: Vec<String>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn expand_grid(base: &ExperimentConfig, axes: &[String]) -> Result<Vec<ExperimentConfig>> {
    let mut grid = vec![base.clone()];
    for axis in axes {
        let (k, vs) = axis
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid axis '{axis}' is not key=v1,v2")))?;
        let mut next = Vec::new();
        for cfg in &grid {
            for v in vs.split(',') {
                let mut c = cfg.clone();
                c.set(k.trim(), v)?;
                c.validate()?;
                next.push(c);
            }
        }
        grid = next;
    }
    Ok(grid)
}

pub fn czsl(a: &CzslArgs) -> Result<Output> {
    let cfg = a.config.resolve(a.seed)?;
    if a.cv_tasks.is_none() && !a.grid.is_empty() {
        return Err(Error::Config("--grid requires --cv-tasks".into()));
    }
    let dir = DataDir::load(&a.data)?;
    let seq: TaskSequence = split_tasks(
        dir.pool.n_classes(),
        cfg.czsl_tasks,
        None,
        &mut Rng::substream(a.seed, TASK_SPLIT_STREAM),
    )?;
    let tasks: Vec<Vec<u32>> = seq
        .tasks
        .iter()
        .map(|t| t.iter().map(|&c| dir.ids[c]).collect())
        .collect();

    let (acc, metrics, cv) = match a.cv_tasks {
        Some(n_cv) => {
            let grid = expand_grid(&cfg, &a.grid)?;
            let czsl_grid: Vec<_> = grid.iter().map(|c| c.czsl()).collect();
            let cv = czsl_cross_validate(&czsl_grid, cfg.czsl_method, &seq, &dir.pool, n_cv)?;
            let cv_summary = json!({
                "n_cv_tasks": n_cv,
                "best_index": cv.best_index,
                "best": grid[cv.best_index],
                "scores": cv.scores,
            });
            (cv.result, cv.metrics, Some(cv_summary))
        }
        None => {
            let acc = run_sequence(cfg.czsl_method, &seq, &dir.pool, &cfg.czsl())?;
            let m = czsl_metrics(&acc)?;
            (acc, m, None)
        }
    };
    let forget = forgetting(&acc.task_accuracy).ok();
    let mut table = Table::new(&["timestep", "gzsl_s", "gzsl_u", "gzsl_h", "ausuc", "joint_accuracy"]);
    for r in &acc.records {
        table.push(vec![
            cell(r.timestep),
            cell(r.gzsl_s),
            opt_cell(r.gzsl_u),
            opt_cell(r.gzsl_h),
            opt_cell(r.ausuc),
            cell(r.joint_accuracy),
        ]);
    }
    Output::new(
        &json!({
            "config": cfg,
            "tasks": tasks,
            "accuracy": acc,
            "metrics": metrics,
            "forgetting": forget,
            "cross_validation": cv,
        }),
        table,
    )
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated seen-class logit multipliers
    #[arg(long, default_value_t = SEEN_SCALE_GRID.map(|v| v.to_string()).join(","))]
    pub grid: String,
}

pub fn sweep(a: &SweepArgs) -> Result<Output> {
    let grid: Vec<f64> = parse_list("grid", &a.grid)?;
    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let dir = DataDir::load(&a.data)?;
    let split = dir.require_split()?;
    let rows = sweep_seen_scale(&model, &dir.pool.split_with(&split.seen, &split.unseen)?, &grid)?;
    let best = rows
        .iter()
        .max_by(|x, y| x.gzsl_h.total_cmp(&y.gzsl_h))
        .map(|r| r.seen_scale);
    let mut table = Table::new(&["seen_scale", "gzsl_u", "gzsl_s", "gzsl_h"]);
    for r in &rows {
        table.push(vec![cell(r.seen_scale), cell(r.gzsl_u), cell(r.gzsl_s), cell(r.gzsl_h)]);
    }
    Output::new(&json!({ "rows": rows, "best_seen_scale": best }), table)
}
