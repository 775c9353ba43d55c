//! Confusion counts, power/error, ROC/AUC and the per-seed experiment runner.

mod experiment;
mod metrics;

use thiserror::Error;

use crate::baselines::BaselineError;
use crate::gotcha::GotchaError;

pub use experiment::{
    build_instances, evaluate, run_attack, run_experiment, seed_mean, write_records_csv,
    AttackConfig, AttackData, AttackKind, Decoders, Experiment, ExperimentRecord, FittedAttack,
    RunMeta, SeedRun, RECORD_HEADER,
};
pub use metrics::{confusion, power_error, roc_auc, Confusion, RocCurve, RocPoint};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("no instances")]
    Empty,
    #[error("both classes must be present")]
    SingleClass,
    #[error("score is NaN")]
    NanScore,
    #[error("no seeds given")]
    NoSeeds,
    #[error("instance {0:?} has no label")]
    Unlabeled(String),
    #[error("unknown attack {0:?}")]
    UnknownAttack(String),
    #[error(transparent)]
    Gotcha(#[from] GotchaError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
