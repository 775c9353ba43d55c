//! Completion models.
//!
//! Attacks only ever talk to a [`CompletionModel`]: something that can
//! complete a prefix and score a continuation. The crate ships an
//! interpolated absolute-discount [`NGramModel`] that stands in for a neural
//! victim or surrogate, plus a [`LookupModel`] that memorizes a fixed set of
//! examples verbatim.

mod decode;
mod lookup;
mod ngram;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;

pub use decode::decode;
pub use lookup::LookupModel;
pub use ngram::{NGramModel, Vocab, BOS, EOS, UNK};

pub const DEFAULT_DISCOUNT: f64 = 0.75;
pub const DEFAULT_MAX_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("order must be at least 1")]
    InvalidOrder,
    #[error("discount {0} must lie strictly between 0 and 1")]
    InvalidDiscount(f64),
    #[error("passes must be at least 1")]
    InvalidPasses,
    #[error("cannot score an empty sequence")]
    EmptySequence,
    #[error("invalid decoding config: {0}")]
    InvalidConfig(&'static str),
    #[error("malformed model document: {0}")]
    Format(String),
}

pub type Result<T, E = LmError> = std::result::Result<T, E>;

/// Token id within a model vocabulary.
pub type TokenId = u32;

/// A model that exposes its next-token distribution. Decoding strategies are
/// written against this trait.
pub trait NextTokenModel {
    fn vocab(&self) -> &Vocab;

    /// Natural-log probabilities over the whole vocabulary, indexed by id,
    /// for the token following `context`.
    fn next_log_probs(&self, context: &[TokenId]) -> Vec<f64>;
}

/// The black-box contract every attack is written against.
pub trait CompletionModel: Send + Sync {
    fn complete(&self, prefix: &TokenSeq, cfg: &DecodingConfig) -> Completion;

    /// `log p(continuation | prefix)` by the chain rule.
    fn score(&self, prefix: &TokenSeq, continuation: &TokenSeq) -> Result<f64>;

    /// Mean negative log-likelihood per token, scoring `tokens` from the
    /// start of a document.
    fn log_perplexity(&self, tokens: &TokenSeq) -> Result<f64> {
        if tokens.is_empty() {
            return Err(LmError::EmptySequence);
        }
        Ok(-self.score(&TokenSeq::empty(), tokens)? / tokens.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Greedy,
    Beam,
    TopK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingConfig {
    pub strategy: Strategy,
    pub beam_size: usize,
    pub topk_k: usize,
    pub temperature: f64,
    pub max_len: usize,
    pub rng_seed: u64,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            strategy: Strategy::Beam,
            beam_size: 4,
            topk_k: 50,
            temperature: 1.0,
            max_len: DEFAULT_MAX_LEN,
            rng_seed: 0,
        }
    }
}

impl DecodingConfig {
    pub fn greedy() -> Self {
        DecodingConfig {
            strategy: Strategy::Greedy,
            ..Default::default()
        }
    }

    pub fn beam(beam_size: usize) -> Self {
        DecodingConfig {
            strategy: Strategy::Beam,
            beam_size,
            ..Default::default()
        }
    }

    pub fn top_k(k: usize, temperature: f64, rng_seed: u64) -> Self {
        DecodingConfig {
            strategy: Strategy::TopK,
            topk_k: k,
            temperature,
            rng_seed,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.strategy {
            Strategy::Beam if self.beam_size == 0 => {
                Err(LmError::InvalidConfig("beam_size must be >= 1"))
            }
            Strategy::TopK if self.topk_k == 0 => {
                Err(LmError::InvalidConfig("topk_k must be >= 1"))
            }
            Strategy::TopK if !(self.temperature > 0.0 && self.temperature.is_finite()) => {
                Err(LmError::InvalidConfig("temperature must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// A generated continuation with its per-token log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub tokens: TokenSeq,
    pub step_logprobs: Vec<f64>,
    pub total_logprob: f64,
    /// Log-probability of the end-of-sequence symbol when generation stopped
    /// on it; `None` when it ran to `max_len`.
    pub end_logprob: Option<f64>,
}

impl Completion {
    pub fn new(tokens: TokenSeq, step_logprobs: Vec<f64>, end_logprob: Option<f64>) -> Self {
        debug_assert_eq!(tokens.len(), step_logprobs.len());
        let total_logprob = step_logprobs.iter().sum();
        Completion {
            tokens,
            step_logprobs,
            total_logprob,
            end_logprob,
        }
    }

    /// The quantity beam search maximizes: emitted tokens plus the stop
    /// symbol, if any.
    pub fn search_score(&self) -> f64 {
        self.total_logprob + self.end_logprob.unwrap_or(0.0)
    }
}

impl CompletionModel for NGramModel {
    fn complete(&self, prefix: &TokenSeq, cfg: &DecodingConfig) -> Completion {
        decode(self, prefix, cfg)
    }

    fn score(&self, prefix: &TokenSeq, continuation: &TokenSeq) -> Result<f64> {
        self.sequence_logprob(prefix, continuation)
    }
}
