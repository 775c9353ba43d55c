use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};

use super::{Completion, CompletionModel, DecodingConfig, LmError, Result};
use crate::corpus::{Example, TokenSeq};

/// A "perfect memorizer": completes every memorized input with its exact
/// target at probability one, and answers anything else with deterministic
/// noise drawn uniformly from a fixed noise vocabulary.
#[derive(Debug, Clone)]
pub struct LookupModel {
    targets: HashMap<TokenSeq, TokenSeq>,
    // every prefix of every memorized full sequence
    prefixes: HashSet<Vec<String>>,
    noise: Vec<String>,
}

impl LookupModel {
    pub fn new(members: &[Example], noise_vocab: usize) -> Self {
        let mut prefixes = HashSet::new();
        for ex in members {
            let full = ex.full().into_inner();
            for i in 1..=full.len() {
                prefixes.insert(full[..i].to_vec());
            }
        }
        LookupModel {
            targets: members
                .iter()
                .map(|e| (e.input.clone(), e.truth.clone()))
                .collect(),
            prefixes,
            noise: (0..noise_vocab.max(1))
                .map(|i| format!("noise{i}"))
                .collect(),
        }
    }

    fn noise_logprob(&self) -> f64 {
        -(self.noise.len() as f64).ln()
    }
}

impl CompletionModel for LookupModel {
    fn complete(&self, prefix: &TokenSeq, cfg: &DecodingConfig) -> Completion {
        if let Some(t) = self.targets.get(prefix) {
            return Completion::new(t.clone(), vec![0.0; t.len()], Some(0.0));
        }
        let mut h = std::collections::hash_map::DefaultHasher::new();
        prefix.hash(&mut h);
        cfg.rng_seed.hash(&mut h);
        let mut state = h.finish();
        let n = cfg.max_len.clamp(1, 8);
        let tokens = (0..n)
            .map(|_| {
                // xorshift64
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                self.noise[(state % self.noise.len() as u64) as usize].clone()
            })
            .collect();
        Completion::new(
            TokenSeq::new(tokens).expect("noise tokens are non-empty"),
            vec![self.noise_logprob(); n],
            None,
        )
    }

    fn score(&self, prefix: &TokenSeq, continuation: &TokenSeq) -> Result<f64> {
        if continuation.is_empty() {
            return Err(LmError::EmptySequence);
        }
        let full = prefix.concat(continuation).into_inner();
        if self.prefixes.contains(&full) {
            Ok(0.0)
        } else {
            Ok(self.noise_logprob() * continuation.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: &str, input: &[&str], truth: &[&str]) -> Example {
        Example {
            id: id.into(),
            input: TokenSeq::from_strs(input),
            truth: TokenSeq::from_strs(truth),
        }
    }

    #[test]
    fn memorized_examples_have_zero_perplexity() {
        let m = LookupModel::new(&[ex("a", &["int", "x"], &["=", "1"])], 50);
        let member = ex("a", &["int", "x"], &["=", "1"]);
        assert_eq!(m.log_perplexity(&member.full()).unwrap(), 0.0);
        let c = m.complete(&member.input, &DecodingConfig::default());
        assert_eq!(c.tokens, member.truth);
        let other = ex("b", &["int", "y"], &["=", "2"]);
        assert!((m.log_perplexity(&other.full()).unwrap() - 50f64.ln()).abs() < 1e-12);
        let noise = m.complete(&other.input, &DecodingConfig::default());
        assert!(noise.tokens.iter().all(|t| t.starts_with("noise")));
    }
}
