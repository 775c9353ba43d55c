use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Completion, DecodingConfig, NextTokenModel, Strategy, TokenId};
use crate::corpus::TokenSeq;

#[derive(Debug, Clone)]
struct Hypothesis {
    ids: Vec<TokenId>,
    step_logprobs: Vec<f64>,
    score: f64,
    end_logprob: Option<f64>,
}

// Tokens a model may emit: everything except BOS and UNK.
fn candidates<M: NextTokenModel + ?Sized>(model: &M, log_probs: &[f64]) -> Vec<(TokenId, f64)> {
    let v = model.vocab();
    log_probs
        .iter()
        .enumerate()
        .map(|(i, &lp)| (i as TokenId, lp))
        .filter(|&(id, lp)| id != v.bos() && id != v.unk() && lp > f64::NEG_INFINITY)
        .collect()
}

// Highest probability first; equal probabilities keep the lower id first.
fn by_logprob_desc(a: &(TokenId, f64), b: &(TokenId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

fn finish<M: NextTokenModel + ?Sized>(model: &M, h: Hypothesis) -> Completion {
    let v = model.vocab();
    let tokens = TokenSeq::new(h.ids.iter().map(|&id| v.token(id).to_owned()).collect())
        .expect("vocabulary tokens are non-empty");
    Completion::new(tokens, h.step_logprobs, h.end_logprob)
}

/// Generates a continuation of `prefix` under `cfg`.
///
/// Greedy decoding is beam search with a single beam. Beam search keeps the
/// `beam_size` best partial sequences by joint log-probability, retires a
/// sequence when it emits end-of-sequence, and returns the best sequence seen
/// (finished or still open at `max_len`). Top-k sampling restricts each step
/// to the `k` most probable tokens, divides their log-probabilities by the
/// temperature and samples from the renormalized result.
pub fn decode<M: NextTokenModel + ?Sized>(
    model: &M,
    prefix: &TokenSeq,
    cfg: &DecodingConfig,
) -> Completion {
    let context = model.vocab().encode(prefix);
    match cfg.strategy {
        Strategy::Greedy => beam_search(model, &context, 1, cfg.max_len),
        Strategy::Beam => beam_search(model, &context, cfg.beam_size.max(1), cfg.max_len),
        Strategy::TopK => top_k_sample(
            model,
            &context,
            cfg.topk_k.max(1),
            cfg.temperature,
            cfg.max_len,
            cfg.rng_seed,
        ),
    }
}

fn beam_search<M: NextTokenModel + ?Sized>(
    model: &M,
    context: &[TokenId],
    beam_size: usize,
    max_len: usize,
) -> Completion {
    let eos = model.vocab().eos();
    let mut beams = vec![Hypothesis {
        ids: Vec::new(),
        step_logprobs: Vec::new(),
        score: 0.0,
        end_logprob: None,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut ctx = context.to_vec();

    for _ in 0..max_len {
        // (beam index, token, logprob, new score)
        let mut expansions: Vec<(usize, TokenId, f64, f64)> = Vec::new();
        for (b, h) in beams.iter().enumerate() {
            ctx.truncate(context.len());
            ctx.extend_from_slice(&h.ids);
            let mut cands = candidates(model, &model.next_log_probs(&ctx));
            cands.sort_by(by_logprob_desc);
            cands.truncate(beam_size);
            expansions.extend(cands.into_iter().map(|(w, lp)| (b, w, lp, h.score + lp)));
        }
        expansions.sort_by(|a, b| b.3.total_cmp(&a.3).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        expansions.truncate(beam_size);

        let mut next = Vec::with_capacity(beam_size);
        for (b, w, lp, score) in expansions {
            let parent = &beams[b];
            if w == eos {
                finished.push(Hypothesis {
                    ids: parent.ids.clone(),
                    step_logprobs: parent.step_logprobs.clone(),
                    score,
                    end_logprob: Some(lp),
                });
            } else {
                let mut ids = parent.ids.clone();
                ids.push(w);
                let mut steps = parent.step_logprobs.clone();
                steps.push(lp);
                next.push(Hypothesis {
                    ids,
                    step_logprobs: steps,
                    score,
                    end_logprob: None,
                });
            }
        }
        // Scores only fall as sequences grow, so open beams that already
        // trail the best finished sequence can never overtake it.
        let best_done = finished
            .iter()
            .map(|h| h.score)
            .fold(f64::NEG_INFINITY, f64::max);
        next.retain(|h| h.score > best_done);
        beams = next;
        if beams.is_empty() {
            break;
        }
    }

    finished
        .into_iter()
        .chain(beams)
        .reduce(|best, h| if h.score > best.score { h } else { best })
        .map(|h| finish(model, h))
        .expect("beam search always holds at least one hypothesis")
}

fn top_k_sample<M: NextTokenModel + ?Sized>(
    model: &M,
    context: &[TokenId],
    k: usize,
    temperature: f64,
    max_len: usize,
    seed: u64,
) -> Completion {
    let eos = model.vocab().eos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctx = context.to_vec();
    let mut h = Hypothesis {
        ids: Vec::new(),
        step_logprobs: Vec::new(),
        score: 0.0,
        end_logprob: None,
    };
    for _ in 0..max_len {
        let mut cands = candidates(model, &model.next_log_probs(&ctx));
        cands.sort_by(by_logprob_desc);
        cands.truncate(k);
        let (w, lp) = sample_tempered(&cands, temperature, &mut rng);
        if w == eos {
            h.end_logprob = Some(lp);
            break;
        }
        h.ids.push(w);
        h.step_logprobs.push(lp);
        ctx.push(w);
    }
    finish(model, h)
}

// Softmax of logprob / temperature, shifted by the maximum so that tiny
// temperatures collapse onto the mode instead of overflowing.
fn sample_tempered(
    cands: &[(TokenId, f64)],
    temperature: f64,
    rng: &mut impl Rng,
) -> (TokenId, f64) {
    let top = cands[0].1;
    let weights: Vec<f64> = cands
        .iter()
        .map(|&(_, lp)| ((lp - top) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (c, w) in cands.iter().zip(&weights) {
        if u < *w {
            return *c;
        }
        u -= w;
    }
    // rounding left u at the very top of the range
    *cands
        .iter()
        .zip(&weights)
        .rev()
        .find(|(_, &w)| w > 0.0)
        .map(|(c, _)| c)
        .unwrap_or(&cands[0])
}
