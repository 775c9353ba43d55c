//! Wilcoxon tests, Bonferroni correction, Cohen's d, factorial ANOVA and
//! per-example feature comparisons.

mod anova;
mod effect;
mod rq3;
mod wilcoxon;

use thiserror::Error;

use crate::lm::LmError;

pub use anova::{anova, factorial_anova, AnovaRow, AnovaTable, Factor, Response};
pub use effect::{bonferroni, cohens_d, Magnitude};
pub use rq3::{
    compare_groups, edit_distance, extract_rq3_features, java_keywords, variable_count,
    write_comparison_csv, FeatureRow, GroupComparison, FEATURE_NAMES, JAVA_KEYWORDS,
};
pub use wilcoxon::{wilcoxon_rank_sum, wilcoxon_signed_rank, TestMethod, TestResult, EXACT_LIMIT};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("non-finite observation")]
    NonFinite,
    #[error("p-value {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("each group needs at least two observations")]
    TooFewObservations,
    #[error("zero variance")]
    ZeroVariance,
    #[error("bad factorial design: {0}")]
    BadDesign(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;
