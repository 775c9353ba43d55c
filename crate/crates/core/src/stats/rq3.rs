use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{cohens_d, effect::mean, wilcoxon_rank_sum, Magnitude, Result, StatsError};
use crate::baselines::smoothed_bleu;
use crate::corpus::{lex, TokenKind};
use crate::gotcha::AttackInstance;
use crate::lm::CompletionModel;

/// Java reserved words and literals.
pub const JAVA_KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
    "var",
    "record",
    "yield",
    "true",
    "false",
    "null",
];

pub fn java_keywords() -> HashSet<String> {
    JAVA_KEYWORDS.iter().map(|s| s.to_string()).collect()
}

/// Character-level Levenshtein distance.
pub fn edit_distance(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// Identifier occurrences in `text` that are not keywords.
pub fn variable_count(text: &str, keywords: &HashSet<String>) -> usize {
    lex(text)
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier && !keywords.contains(&t.text))
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub instance_id: String,
    pub input_length: usize,
    pub output_length: usize,
    /// Victim perplexity on the full example (not its logarithm).
    pub perplexity: f64,
    pub edit_distance: usize,
    pub bleu: f64,
    /// Counted over the input and ground truth.
    pub variable_count: usize,
    pub attack_success: bool,
}

pub fn extract_rq3_features(
    inst: &AttackInstance,
    victim: &dyn CompletionModel,
    keywords: &HashSet<String>,
    attack_success: bool,
) -> Result<FeatureRow> {
    let full = inst.input.concat(&inst.truth);
    let lp = victim.log_perplexity(&full)?;
    Ok(FeatureRow {
        instance_id: inst.id.clone(),
        input_length: inst.input.detokenize().split_whitespace().count(),
        output_length: inst.output.detokenize().split_whitespace().count(),
        perplexity: lp.exp(),
        edit_distance: edit_distance(&inst.output.detokenize(), &inst.truth.detokenize()),
        bleu: smoothed_bleu(&inst.output, &inst.truth),
        variable_count: variable_count(&full.detokenize(), keywords),
        attack_success,
    })
}

pub const FEATURE_NAMES: [&str; 6] = [
    "input_length",
    "output_length",
    "perplexity",
    "edit_distance",
    "bleu",
    "variable_count",
];

impl FeatureRow {
    pub fn values(&self) -> [f64; 6] {
        [
            self.input_length as f64,
            self.output_length as f64,
            self.perplexity,
            self.edit_distance as f64,
            self.bleu,
            self.variable_count as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub feature: String,
    pub mean_success: f64,
    pub mean_fail: f64,
    pub p_value: f64,
    /// Undefined when both groups are constant.
    pub cohens_d: Option<f64>,
    pub magnitude: Option<Magnitude>,
}

/// One row per feature comparing successfully and unsuccessfully attacked
/// examples.
pub fn compare_groups(success: &[FeatureRow], fail: &[FeatureRow]) -> Result<Vec<GroupComparison>> {
    if success.is_empty() || fail.is_empty() {
        return Err(StatsError::EmptySample);
    }
    FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let a: Vec<f64> = success.iter().map(|r| r.values()[j]).collect();
            let b: Vec<f64> = fail.iter().map(|r| r.values()[j]).collect();
            let test = wilcoxon_rank_sum(&a, &b)?;
            let (d, magnitude) = match cohens_d(&a, &b) {
                Ok((d, m)) => (Some(d), Some(m)),
                Err(StatsError::ZeroVariance | StatsError::TooFewObservations) => (None, None),
                Err(e) => return Err(e),
            };
            Ok(GroupComparison {
                feature: name.to_string(),
                mean_success: mean(&a),
                mean_fail: mean(&b),
                p_value: test.p_value,
                cohens_d: d,
                magnitude,
            })
        })
        .collect()
}

/// `feature,mean_success,mean_fail,p_value,cohens_d,magnitude`
pub fn write_comparison_csv<W: Write>(out: W, rows: &[GroupComparison]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "feature",
        "mean_success",
        "mean_fail",
        "p_value",
        "cohens_d",
        "magnitude",
    ])?;
    for r in rows {
        w.write_record([
            r.feature.clone(),
            r.mean_success.to_string(),
            r.mean_fail.to_string(),
            r.p_value.to_string(),
            r.cohens_d.map(|d| d.to_string()).unwrap_or_default(),
            r.magnitude.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
