use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::summarize_draws;
use crate::zsl::{StepInfo, TrainConfig, TrainObserver};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeQuantity {
    /// Variance of all logits of the batch.
    #[default]
    LogitVariance,
    /// Global gradient norm before clipping.
    GradNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrace {
    pub quantity: ProbeQuantity,
    pub every_n: usize,
    pub iterations: Vec<usize>,
    pub values: Vec<f64>,
    pub config: TrainConfig,
}

/// Observer recording a batch statistic every `every_n` optimizer steps.
#[derive(Clone, Debug)]
pub struct LogitVarianceProbe {
    trace: ProbeTrace,
    attached: bool,
}

impl LogitVarianceProbe {
    pub fn new(every_n: usize, quantity: ProbeQuantity, config: &TrainConfig) -> Result<Self> {
        if every_n == 0 {
            return Err(Error::config("probe interval must be at least 1"));
        }
        Ok(Self {
            trace: ProbeTrace {
                quantity,
                every_n,
                iterations: Vec::new(),
                values: Vec::new(),
                config: config.clone(),
            },
            attached: false,
        })
    }

    pub fn is_attached(&self) -> bool {
        self.attached
    }

    pub fn trace(&self) -> Result<&ProbeTrace> {
        if !self.attached {
            return Err(Error::State("probe was never attached to a training run".into()));
        }
        Ok(&self.trace)
    }

    pub fn into_trace(self) -> Result<ProbeTrace> {
        self.trace()?;
        Ok(self.trace)
    }
}

impl<T: Scalar> TrainObserver<T> for LogitVarianceProbe {
    fn attach(&mut self) {
        self.attached = true;
    }

    fn on_step(&mut self, info: &StepInfo<'_, T>) {
        if info.step % self.trace.every_n != 0 {
            return;
        }
        let value = match self.trace.quantity {
            ProbeQuantity::LogitVariance => summarize_draws(
                &info.logits.as_slice().iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            )
            .variance,
            ProbeQuantity::GradNorm => info.grad_norm,
        };
        self.trace.iterations.push(info.step);
        self.trace.values.push(value);
    }
}
