//! Pretraining, transfer and evaluation pipelines.

mod experiment;
mod metrics;
mod split;
mod train;

pub use experiment::{
    build_datasets, run_experiment, run_experiment_on, split_for, write_history_csv, ArmReport, ArmRun, Case,
    DatasetHashes, ExperimentConfig, ExperimentData, ExperimentOutput, ExperimentReport, HistoryRow, Improvement,
    PretrainRun, ReferenceValues, SplitSummary, Timing,
};
pub use metrics::{evaluate, predict, Metrics};
pub use split::{case1_task, make_case1_split, make_case2_split, RecordRef, SplitData, SplitPlan};
pub use train::{fine_tune, pretrain, train_from_scratch, EpochStats, TrainSettings};
