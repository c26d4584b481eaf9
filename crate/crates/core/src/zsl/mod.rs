//! Zero-shot training and generalized evaluation.

pub mod cv;
pub mod dataset;
pub mod eval;
pub mod loss;
pub mod train;

pub use cv::{cross_validate, cross_validate_with, validation_split, CvResult, CvRow, HoldoutFractions};
pub use dataset::{LabeledFeatures, Pool, SplitSpec, ZslDataset};
pub use eval::{
    ausuc, curve_area, gzsl_eval, harmonic_mean, mean_class_accuracy, report_from_logits, sweep_seen_scale,
    Calibration, EvalReport, GzslPoint, SweepRow, TestLogits,
};
pub use loss::{loss, softmax_rows};
pub use train::{
    train, train_observed, AttributePreproc, EpochRecord, StepInfo, TrainConfig, TrainLog, TrainObserver, Trainer,
    ZslModel,
};
