//! Baseline attacks: classifiers over output/truth overlap features, and
//! threshold-free ranking by perplexity-style metrics.

mod classifiers;
mod features;
mod ranking;

use std::io::Write;

use thiserror::Error;

use crate::lm::LmError;

pub use classifiers::{
    train_feature_classifier, ClassifierConfig, ClassifierKind, DecisionTree, FeatureClassifier,
    GaussianNb, Knn, Mlp,
};
pub use features::{extract_features, ngram_precisions, smoothed_bleu, FeatureVector, MAX_NGRAM};
pub use ranking::{
    metric_score, rank_and_cutoff, ranks, zlib_entropy, zlib_entropy_tokens, Metric, Orientation,
    RankingScore, DEFAULT_CUTOFF, ZLIB_LEVEL,
};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("bad training data: {0}")]
    BadTrainingData(&'static str),
    #[error("unknown name {0:?}")]
    UnknownName(String),
    #[error("the ppl-ratio metric needs a surrogate model")]
    MissingSurrogate,
    #[error("{0} has a zero denominator")]
    ZeroDenominator(Metric),
    #[error("no scores to rank")]
    EmptyScores,
    #[error("cut-off fraction must lie strictly between 0 and 1, got {0}")]
    InvalidCutoff(f64),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = BaselineError> = std::result::Result<T, E>;

/// `instance_id,p1,p2,p3,p4,bleu,label`
pub fn write_feature_csv<W: Write>(out: W, rows: &[(String, FeatureVector, bool)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance_id", "p1", "p2", "p3", "p4", "bleu", "label"])?;
    for (id, f, label) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(f.as_array().iter().map(|v| v.to_string()));
        rec.push((*label as u8).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `instance_id,metric,value,rank,predicted,label`
pub fn write_ranking_csv<W: Write>(
    out: W,
    ids: &[String],
    scores: &[RankingScore],
    predicted: &[bool],
    labels: &[bool],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "instance_id",
        "metric",
        "value",
        "rank",
        "predicted",
        "label",
    ])?;
    for (i, rank) in ranks(scores).into_iter().enumerate() {
        w.write_record([
            ids[i].clone(),
            scores[i].metric.to_string(),
            scores[i].value.to_string(),
            rank.to_string(),
            (predicted[i] as u8).to_string(),
            (labels[i] as u8).to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
