use std::fmt;
use std::io::Write;
use std::str::FromStr;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::{BaselineError, Result};
use crate::corpus::split::round_half_up;
use crate::corpus::TokenSeq;
use crate::gotcha::AttackInstance;
use crate::lm::CompletionModel;

pub const ZLIB_LEVEL: u32 = 6;
pub const DEFAULT_CUTOFF: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Perplexity,
    PplRatio,
    ZlibRatio,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Perplexity, Metric::PplRatio, Metric::ZlibRatio];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Perplexity => "perplexity",
            Metric::PplRatio => "ppl-ratio",
            Metric::ZlibRatio => "zlib-ratio",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Metric::Perplexity | Metric::ZlibRatio => Orientation::AscendingIsMember,
            Metric::PplRatio => Orientation::DescendingIsMember,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| BaselineError::UnknownName(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    AscendingIsMember,
    DescendingIsMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingScore {
    pub metric: Metric,
    pub value: f64,
    pub orientation: Orientation,
}

impl RankingScore {
    /// The value oriented so that larger means "more likely a member".
    pub fn membership_score(&self) -> f64 {
        match self.orientation {
            Orientation::AscendingIsMember => -self.value,
            Orientation::DescendingIsMember => self.value,
        }
    }
}

/// Size in bits of the zlib stream (level 6) for `bytes`.
pub fn zlib_entropy(bytes: &[u8]) -> u64 {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::new(ZLIB_LEVEL));
    enc.write_all(bytes).expect("writing to a Vec cannot fail");
    let out = enc.finish().expect("writing to a Vec cannot fail");
    8 * out.len() as u64
}

/// Text handed to the compressor: tokens joined by single spaces.
pub fn zlib_entropy_tokens(tokens: &TokenSeq) -> u64 {
    zlib_entropy(tokens.tokens().join(" ").as_bytes())
}

pub fn metric_score(
    metric: Metric,
    victim: &dyn CompletionModel,
    surrogate: Option<&dyn CompletionModel>,
    inst: &AttackInstance,
) -> Result<RankingScore> {
    let seq = inst.input.concat(&inst.truth);
    let lp_v = victim.log_perplexity(&seq)?;
    let value = match metric {
        Metric::Perplexity => lp_v,
        Metric::PplRatio => {
            let surrogate = surrogate.ok_or(BaselineError::MissingSurrogate)?;
            let lp_s = surrogate.log_perplexity(&seq)?;
            if lp_s == 0.0 {
                return Err(BaselineError::ZeroDenominator(metric));
            }
            lp_v / lp_s
        }
        Metric::ZlibRatio => lp_v / zlib_entropy_tokens(&seq) as f64,
    };
    Ok(RankingScore {
        metric,
        value,
        orientation: metric.orientation(),
    })
}

/// Rank of each score (0 = most likely member). Ties keep input order.
pub fn ranks(scores: &[RankingScore]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .membership_score()
            .total_cmp(&scores[a].membership_score())
    });
    let mut rank = vec![0; scores.len()];
    for (r, i) in order.into_iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Labels the top `round(cutoff · N)` ranked instances as members.
pub fn rank_and_cutoff(scores: &[RankingScore], cutoff_fraction: f64) -> Result<Vec<bool>> {
    if scores.is_empty() {
        return Err(BaselineError::EmptyScores);
    }
    if !(cutoff_fraction > 0.0 && cutoff_fraction < 1.0) {
        return Err(BaselineError::InvalidCutoff(cutoff_fraction));
    }
    let take = round_half_up(cutoff_fraction * scores.len() as f64);
    Ok(ranks(scores).into_iter().map(|r| r < take).collect())
}
