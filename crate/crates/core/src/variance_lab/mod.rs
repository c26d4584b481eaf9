//! Monte-Carlo checks of the logit variance predictions, training probes and
//! attribute diagnostics.

pub mod diagnostics;
pub mod experiments;
pub mod probe;
pub mod smoothness;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::McEstimate;

pub use diagnostics::{attribute_diagnostics, AttributeDiagnostics, CorrelationSummary, NormalitySummary};
pub use experiments::{prelogit_variance_experiment, synthetic_cosine_experiment, PrelogitSetup};
pub use probe::{LogitVarianceProbe, ProbeQuantity, ProbeTrace};
pub use smoothness::{
    smoothness_comparison, smoothness_probe, train_plain, PlainTarget, ProbeTarget, SmoothnessComparison,
    SmoothnessOptions, ZslTarget,
};

/// Predicted against measured variance for one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub setting: String,
    pub d: Option<usize>,
    pub gamma: Option<f64>,
    pub predicted: f64,
    /// Sample variance of the draws.
    pub empirical: f64,
    /// Standard error of `empirical`.
    pub stderr: f64,
    /// Sample mean of the draws.
    pub sample_mean: f64,
    pub trials: usize,
}

impl VarianceReport {
    pub fn from_estimate(
        setting: impl Into<String>,
        d: Option<usize>,
        gamma: Option<f64>,
        predicted: f64,
        est: &McEstimate,
    ) -> Result<Self> {
        if est.trials < 2 {
            return Err(Error::InsufficientData("a variance report needs at least 2 trials".into()));
        }
        Ok(Self {
            setting: setting.into(),
            d,
            gamma,
            predicted,
            empirical: est.variance,
            stderr: est.stderr_of_variance,
            sample_mean: est.mean,
            trials: est.trials,
        })
    }

    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.predicted).abs() / self.predicted.abs()
    }

    /// `|empirical − predicted| ≤ max(rel · predicted, 4 · stderr)`.
    pub fn within_tolerance(&self, rel: f64) -> bool {
        (self.empirical - self.predicted).abs() <= (rel * self.predicted.abs()).max(4.0 * self.stderr)
    }
}

pub const REPORT_CSV_HEADER: [&str; 7] = ["setting", "d", "gamma", "predicted", "empirical", "stderr", "trials"];

/// Writes reports as CSV with [`REPORT_CSV_HEADER`] columns.
pub fn write_reports_csv<W: Write>(reports: &[VarianceReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.setting.clone(),
            r.d.map(|d| d.to_string()).unwrap_or_default(),
            r.gamma.map(|g| g.to_string()).unwrap_or_default(),
            r.predicted.to_string(),
            r.empirical.to_string(),
            r.stderr.to_string(),
            r.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
