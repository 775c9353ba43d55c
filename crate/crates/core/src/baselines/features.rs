use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;
use crate::gotcha::AttackInstance;

pub const MAX_NGRAM: usize = 4;

/// Overlap features between a model output and the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Modified 1- to 4-gram precisions.
    pub precisions: [f64; MAX_NGRAM],
    pub bleu: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 5] {
        let [p1, p2, p3, p4] = self.precisions;
        [p1, p2, p3, p4, self.bleu]
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

// (clipped matches, output n-gram count) for one n
fn clipped_matches(output: &TokenSeq, truth: &TokenSeq, n: usize) -> (usize, usize) {
    let out = ngram_counts(output.tokens(), n);
    let reference = ngram_counts(truth.tokens(), n);
    let matched = out
        .iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, output.len().saturating_sub(n - 1))
}

/// Clipped n-gram precision of `output` against `truth` for n = 1..=4.
/// An order with no output n-grams scores 0.
pub fn ngram_precisions(output: &TokenSeq, truth: &TokenSeq) -> [f64; MAX_NGRAM] {
    std::array::from_fn(|i| {
        let (m, total) = clipped_matches(output, truth, i + 1);
        if total == 0 {
            0.0
        } else {
            m as f64 / total as f64
        }
    })
}

/// Sentence-level BLEU with add-one smoothing on every n-gram order:
/// `BP · exp(¼ Σ ln((m_n + 1) / (t_n + 1)))`, where the brevity penalty is
/// `exp(1 − |truth| / |output|)` for outputs shorter than the truth.
/// An empty output scores 0.
pub fn smoothed_bleu(output: &TokenSeq, truth: &TokenSeq) -> f64 {
    if output.is_empty() {
        return 0.0;
    }
    let log_mean = (1..=MAX_NGRAM)
        .map(|n| {
            let (m, t) = clipped_matches(output, truth, n);
            ((m as f64 + 1.0) / (t as f64 + 1.0)).ln()
        })
        .sum::<f64>()
        / MAX_NGRAM as f64;
    let (c, r) = (output.len() as f64, truth.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * log_mean.exp()
}

pub fn extract_features(inst: &AttackInstance) -> FeatureVector {
    FeatureVector {
        precisions: ngram_precisions(&inst.output, &inst.truth),
        bleu: smoothed_bleu(&inst.output, &inst.truth),
    }
}
