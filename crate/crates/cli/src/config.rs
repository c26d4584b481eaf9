//! `key = value` experiment configuration.
//!
//! [`SCHEMA`] is the single list of accepted keys; defaults, `--help` text
//! and the shipped `configs/default.conf` are all derived from it.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use classnorm::czsl::{CzslConfig, Method};
use classnorm::zsl::TrainConfig;
use classnorm::{Error, Result};
use serde::{Deserialize, Serialize};

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const SCHEMA: &[Key] = &[
    Key { name: "batch_size", default: "128", help: "examples per optimizer step" },
    Key { name: "epochs", default: "50", help: "passes over the training set (per task for czsl)" },
    Key { name: "lr", default: "0.005", help: "learning rate" },
    Key { name: "hidden_dim", default: "1024", help: "width of the hidden layers" },
    Key { name: "n_hidden_layers", default: "2", help: "hidden layers of the attribute embedder (0 = linear)" },
    Key { name: "logit_mode", default: "normalize_scale", help: "dot | normalize_scale" },
    Key { name: "gamma", default: "5", help: "logit scale for normalize_scale" },
    Key { name: "entropy_weight", default: "0.001", help: "weight of the entropy regularizer" },
    Key { name: "attribute_preproc", default: "an", help: "an | standardize | none" },
    Key { name: "class_norm", default: "true", help: "standardize hidden class embeddings before the output layer" },
    Key { name: "body_init", default: "xavier_fan_in", help: "init of body layers: xavier | xavier_fan_in | xavier_fan_out | kaiming_fan_in | kaiming_fan_out | cn_output | linear_corrected" },
    Key { name: "output_init", default: "cn_output", help: "init of the output projection (same choices as body_init)" },
    Key { name: "init_distribution", default: "uniform", help: "uniform | normal" },
    Key { name: "optimizer", default: "adam", help: "adam | sgd" },
    Key { name: "momentum", default: "0.9", help: "SGD momentum (ignored by adam)" },
    Key { name: "clip", default: "none", help: "global gradient-norm clip, or none" },
    Key { name: "seen_scale", default: "1", help: "multiplier on seen-class logits at evaluation" },
    Key { name: "czsl_tasks", default: "10", help: "number of tasks in a czsl sequence" },
    Key { name: "czsl_method", default: "sequential", help: "sequential | multi_task" },
    Key { name: "czsl_lr_decay", default: "1", help: "learning-rate multiplier applied after each czsl task" },
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub seen_scale: f64,
    pub czsl_tasks: usize,
    pub czsl_method: Method,
    pub czsl_lr_decay: f64,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_enum<T: FromStr<Err = Error>>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e: Error| Error::Config(format!("{key}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{value}'"))),
    }
}

impl ExperimentConfig {
    fn blank() -> Self {
        Self {
            train: TrainConfig::default(),
            seen_scale: 1.0,
            czsl_tasks: 10,
            czsl_method: Method::Sequential,
            czsl_lr_decay: 1.0,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key {
            "batch_size" => t.batch_size = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "hidden_dim" => t.hidden_dim = parse(key, v)?,
            "n_hidden_layers" => t.n_hidden_layers = parse(key, v)?,
            "logit_mode" => t.logit_mode = parse_enum(key, v)?,
            "gamma" => t.gamma = parse(key, v)?,
            "entropy_weight" => t.entropy_weight = parse(key, v)?,
            "attribute_preproc" => t.attribute_preproc = parse_enum(key, v)?,
            "class_norm" => t.class_norm = parse_bool(key, v)?,
            "body_init" => t.body_init = parse_enum(key, v)?,
            "output_init" => t.output_init = parse_enum(key, v)?,
            "init_distribution" => t.init_distribution = parse_enum(key, v)?,
            "optimizer" => t.optimizer = parse_enum(key, v)?,
            "momentum" => t.momentum = parse(key, v)?,
            "clip" => t.clip = if v == "none" { None } else { Some(parse(key, v)?) },
            "seen_scale" => self.seen_scale = parse(key, v)?,
            "czsl_tasks" => self.czsl_tasks = parse(key, v)?,
            "czsl_method" => self.czsl_method = parse_enum(key, v)?,
            "czsl_lr_decay" => self.czsl_lr_decay = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines. `#` starts a comment; later keys win.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.seen_scale > 0.0 && self.seen_scale.is_finite()) {
            return Err(Error::Config(format!("seen_scale must be positive, got {}", self.seen_scale)));
        }
        if self.czsl_tasks < 1 {
            return Err(Error::Config("czsl_tasks must be at least 1".into()));
        }
        self.czsl().validate()
    }

    pub fn czsl(&self) -> CzslConfig {
        CzslConfig {
            train: self.train.clone(),
            lr_decay: self.czsl_lr_decay,
        }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = Self::blank();
        for k in SCHEMA {
            cfg.set(k.name, k.default).expect("schema default must parse");
        }
        cfg
    }
}

/// Key listing for `--help`.
pub fn schema_help() -> String {
    let width = SCHEMA.iter().map(|k| k.name.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (--config FILE or --set key=value), with defaults:\n");
    for k in SCHEMA {
        let _ = writeln!(s, "  {:width$} = {:<16} {}", k.name, k.default, k.help);
    }
    s
}

/// Contents of the shipped default config file.
pub fn default_config_file() -> String {
    let mut s = String::from("# Default experiment configuration.\n");
    for k in SCHEMA {
        let _ = writeln!(s, "\n# {}\n{} = {}", k.help, k.name, k.default);
    }
    s
}
