use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{LmError, NextTokenModel, Result, TokenId};
use crate::corpus::{Example, TokenSeq};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: TokenId = 0;
const EOS_ID: TokenId = 1;
const UNK_ID: TokenId = 2;

// Joins context tokens in the serialized count tables.
const CONTEXT_SEP: char = '\u{1f}';

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    fn with_reserved() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [BOS, EOS, UNK] {
            v.insert(t);
        }
        v
    }

    fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab::with_reserved();
        for t in tokens {
            v.insert(t);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or the UNK id when out of vocabulary.
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn bos(&self) -> TokenId {
        BOS_ID
    }

    pub fn eos(&self) -> TokenId {
        EOS_ID
    }

    pub fn unk(&self) -> TokenId {
        UNK_ID
    }

    pub fn encode(&self, seq: &TokenSeq) -> Vec<TokenId> {
        seq.iter().map(|t| self.id(t)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

/// Interpolated absolute-discount n-gram model.
///
/// The order-`k` estimate for a seen context is
///
/// ```text
/// P_k(w | h) = max(c(h,w) − d, 0) / c(h)  +  d · N1+(h) / c(h) · P_{k−1}(w | h')
/// ```
///
/// with `h'` the context shortened by one token, and an unseen context
/// falling through to `P_{k−1}` directly. The recursion bottoms out in a
/// uniform distribution over every predictable token (all but BOS), so every
/// probability is strictly positive and out-of-vocabulary tokens score as
/// UNK. Raw counts are multiplied by `passes`, which sharpens the
/// maximum-likelihood part against the fixed discount without changing
/// count ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    discount: f64,
    passes: u32,
    vocab: Vocab,
    // tables[k] holds contexts of length k (predicting order k + 1)
    tables: Vec<HashMap<Vec<TokenId>, ContextCounts>>,
}

impl NGramModel {
    pub fn train(examples: &[Example], order: usize, discount: f64, passes: u32) -> Result<Self> {
        Self::train_sequences(examples.iter().map(Example::full), order, discount, passes)
    }

    /// Trains on raw token sequences, each treated as one document.
    pub fn train_sequences(
        docs: impl IntoIterator<Item = TokenSeq>,
        order: usize,
        discount: f64,
        passes: u32,
    ) -> Result<Self> {
        if order == 0 {
            return Err(LmError::InvalidOrder);
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(LmError::InvalidDiscount(discount));
        }
        if passes == 0 {
            return Err(LmError::InvalidPasses);
        }
        let mut vocab = Vocab::with_reserved();
        let mut tables: Vec<HashMap<Vec<TokenId>, ContextCounts>> = vec![HashMap::new(); order];
        let mut any = false;
        for doc in docs {
            any = true;
            let mut ids = vec![BOS_ID; order - 1];
            ids.extend(doc.iter().map(|t| vocab.insert(t)));
            ids.push(EOS_ID);
            for pos in order - 1..ids.len() {
                let w = ids[pos];
                for (k, table) in tables.iter_mut().enumerate() {
                    let ctx = ids[pos - k..pos].to_vec();
                    let entry = table.entry(ctx).or_default();
                    entry.total += 1;
                    *entry.next.entry(w).or_insert(0) += 1;
                }
            }
        }
        if !any {
            return Err(LmError::EmptyCorpus);
        }
        Ok(NGramModel {
            order,
            discount,
            passes,
            vocab,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn passes(&self) -> u32 {
        self.passes
    }

    /// Raw (unscaled) count of `token` following `context`, where `context`
    /// holds the preceding `k` tokens for an order-`k+1` count.
    pub fn count(&self, context: &[&str], token: &str) -> u64 {
        if context.len() >= self.order {
            return 0;
        }
        let ctx: Vec<TokenId> = context.iter().map(|t| self.vocab.id(t)).collect();
        self.tables[ctx.len()]
            .get(&ctx)
            .and_then(|c| c.next.get(&self.vocab.id(token)))
            .copied()
            .unwrap_or(0)
    }

    // Context of exactly order-1 ids, left-padded with BOS.
    fn padded_context(&self, context: &[TokenId]) -> Vec<TokenId> {
        let need = self.order - 1;
        let mut ctx = vec![BOS_ID; need.saturating_sub(context.len())];
        ctx.extend_from_slice(&context[context.len().saturating_sub(need)..]);
        ctx
    }

    /// Probabilities for the token after `context` (ids), indexed by id.
    pub fn next_probs(&self, context: &[TokenId]) -> Vec<f64> {
        let v = self.vocab.len();
        let predictable = (v - 1) as f64;
        let mut probs = vec![1.0 / predictable; v];
        probs[BOS_ID as usize] = 0.0;

        let ctx = self.padded_context(context);
        let scale = self.passes as f64;
        let d = self.discount;
        for k in 0..self.order {
            let h = &ctx[ctx.len() - k..];
            let Some(counts) = self.tables[k].get(h) else {
                // Unseen contexts only get longer from here.
                break;
            };
            let total = counts.total as f64 * scale;
            let backoff = d * counts.next.len() as f64 / total;
            for p in probs.iter_mut() {
                *p *= backoff;
            }
            for (&w, &c) in &counts.next {
                probs[w as usize] += (c as f64 * scale - d).max(0.0) / total;
            }
        }
        probs
    }

    /// The next-token distribution for a token context. Out-of-vocabulary
    /// context tokens are read as UNK.
    pub fn next_token_dist(&self, context: &TokenSeq) -> Vec<(String, f64)> {
        let probs = self.next_probs(&self.vocab.encode(context));
        self.vocab.tokens().iter().cloned().zip(probs).collect()
    }

    /// Probability of a single token following `context`.
    pub fn prob(&self, context: &TokenSeq, token: &str) -> f64 {
        self.next_probs(&self.vocab.encode(context))[self.vocab.id(token) as usize]
    }

    /// Chain-rule log-probability of `continuation` after `prefix`.
    pub fn sequence_logprob(&self, prefix: &TokenSeq, continuation: &TokenSeq) -> Result<f64> {
        if continuation.is_empty() {
            return Err(LmError::EmptySequence);
        }
        let mut ids = self.vocab.encode(prefix);
        let mut total = 0.0;
        for t in continuation {
            let w = self.vocab.id(t);
            total += self.next_probs(&ids)[w as usize].ln();
            ids.push(w);
        }
        Ok(total)
    }

    /// `−(1/N) Σ ln P(w_i | w_1..w_{i−1})` over `tokens`.
    pub fn log_perplexity(&self, tokens: &TokenSeq) -> Result<f64> {
        Ok(-self.sequence_logprob(&TokenSeq::empty(), tokens)? / tokens.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelDoc::from(self)).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(s).map_err(|e| LmError::Format(e.to_string()))?;
        doc.try_into()
    }
}

impl NextTokenModel for NGramModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_log_probs(&self, context: &[TokenId]) -> Vec<f64> {
        self.next_probs(context).into_iter().map(f64::ln).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    order: usize,
    discount: f64,
    passes: u32,
    vocab: Vec<String>,
    /// One map per context length: context (tokens joined by U+001F) to
    /// next-token counts.
    counts: Vec<BTreeMap<String, BTreeMap<String, u64>>>,
}

impl From<&NGramModel> for ModelDoc {
    fn from(m: &NGramModel) -> Self {
        let name = |id: &TokenId| m.vocab.token(*id).to_owned();
        let counts = m
            .tables
            .iter()
            .map(|table| {
                table
                    .iter()
                    .map(|(ctx, c)| {
                        let key = ctx
                            .iter()
                            .map(name)
                            .collect::<Vec<_>>()
                            .join(&CONTEXT_SEP.to_string());
                        (key, c.next.iter().map(|(w, n)| (name(w), *n)).collect())
                    })
                    .collect()
            })
            .collect();
        ModelDoc {
            order: m.order,
            discount: m.discount,
            passes: m.passes,
            vocab: m.vocab.tokens.clone(),
            counts,
        }
    }
}

impl TryFrom<ModelDoc> for NGramModel {
    type Error = LmError;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        let bad = |m: &str| LmError::Format(m.to_owned());
        if doc.order == 0 || doc.counts.len() != doc.order {
            return Err(bad("count tables do not match order"));
        }
        if doc.vocab.get(..3) != Some(&[BOS.to_owned(), EOS.to_owned(), UNK.to_owned()][..]) {
            return Err(bad("vocabulary must start with the reserved tokens"));
        }
        let mut vocab = Vocab::with_reserved();
        for t in &doc.vocab[3..] {
            vocab.insert(t);
        }
        if vocab.len() != doc.vocab.len() {
            return Err(bad("duplicate vocabulary entry"));
        }
        let lookup = |t: &str| {
            vocab
                .index
                .get(t)
                .copied()
                .ok_or_else(|| bad("token outside vocabulary"))
        };
        let mut tables = Vec::with_capacity(doc.order);
        for (k, map) in doc.counts.iter().enumerate() {
            let mut table = HashMap::with_capacity(map.len());
            for (key, next) in map {
                let ctx: Vec<TokenId> = if k == 0 {
                    Vec::new()
                } else {
                    key.split(CONTEXT_SEP).map(lookup).collect::<Result<_>>()?
                };
                if ctx.len() != k {
                    return Err(bad("context length does not match its table"));
                }
                let mut cc = ContextCounts::default();
                for (w, &n) in next {
                    cc.next.insert(lookup(w)?, n);
                    cc.total += n;
                }
                table.insert(ctx, cc);
            }
            tables.push(table);
        }
        let m = NGramModel {
            order: doc.order,
            discount: doc.discount,
            passes: doc.passes,
            vocab,
            tables,
        };
        if !(m.discount > 0.0 && m.discount < 1.0) {
            return Err(LmError::InvalidDiscount(m.discount));
        }
        if m.passes == 0 {
            return Err(LmError::InvalidPasses);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::from_strs(&s.split_whitespace().collect::<Vec<_>>())
    }

    fn abab(order: usize, passes: u32) -> NGramModel {
        NGramModel::train_sequences([seq("a b a b")], order, 0.75, passes).unwrap()
    }

    #[test]
    fn bigram_counts() {
        let m = abab(2, 1);
        assert_eq!(m.count(&["a"], "b"), 2);
        assert_eq!(m.count(&["b"], "a"), 1);
        assert_eq!(m.count(&["b"], EOS), 1);
        assert_eq!(m.count(&[BOS], "a"), 1);
        assert_eq!(m.count(&[], "a"), 2);
    }

    // Hand-evaluated discount formula for the "a b a b" bigram.
    // Stream: <s> a b a b </s>. Unigram counts a:2 b:2 </s>:1 (N=5, 3 types);
    // predictable vocabulary {</s>, <unk>, a, b} has size 4.
    fn abab_unigram(w: &str) -> f64 {
        let c = match w {
            "a" | "b" => 2.0,
            EOS => 1.0,
            _ => 0.0,
        };
        f64::max(c - 0.75, 0.0) / 5.0 + 0.75 * 3.0 / 5.0 * 0.25
    }

    #[test]
    fn bigram_discount_oracle() {
        let m = abab(2, 1);
        // context a: c(a)=2, only successor b (N1+ = 1)
        let p_b_a = (2.0 - 0.75) / 2.0 + 0.75 * 1.0 / 2.0 * abab_unigram("b");
        assert_abs_diff_eq!(m.prob(&seq("a"), "b"), p_b_a, epsilon = 1e-12);
        // context b: successors a:1, </s>:1
        let p_a_b = (1.0 - 0.75) / 2.0 + 0.75 * 2.0 / 2.0 * abab_unigram("a");
        assert_abs_diff_eq!(m.prob(&seq("b"), "a"), p_a_b, epsilon = 1e-12);
        let p_unk_b = 0.75 * 2.0 / 2.0 * abab_unigram(UNK);
        assert_abs_diff_eq!(m.prob(&seq("b"), "zzz"), p_unk_b, epsilon = 1e-12);
    }

    #[test]
    fn mode_after_a_is_b() {
        let m = abab(2, 1);
        let dist = m.next_token_dist(&seq("a"));
        let (best, _) = dist.iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
        assert_eq!(best, "b");
    }

    #[test]
    fn perplexity_oracle() {
        let m = abab(2, 1);
        // "a b" from document start: P(a|<s>) · P(b|a)
        let p_a_bos = (1.0 - 0.75) / 1.0 + 0.75 * 1.0 / 1.0 * abab_unigram("a");
        let p_b_a = (2.0 - 0.75) / 2.0 + 0.75 * 1.0 / 2.0 * abab_unigram("b");
        let expected = -(p_a_bos.ln() + p_b_a.ln()) / 2.0;
        assert_abs_diff_eq!(
            m.log_perplexity(&seq("a b")).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn symmetric_unigram() {
        let m = NGramModel::train_sequences([seq("a b")], 1, 0.75, 1).unwrap();
        let pa = m.prob(&TokenSeq::empty(), "a");
        let pb = m.prob(&seq("a"), "b");
        assert_abs_diff_eq!(pa, pb, epsilon = 1e-15);
        assert_abs_diff_eq!(pa / (pa + pb), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn passes_keep_count_ratios() {
        let one = abab(2, 1);
        let two = abab(2, 2);
        let ratio = |m: &NGramModel| m.count(&["b"], "a") as f64 / m.count(&["b"], EOS) as f64;
        assert_eq!(ratio(&one), ratio(&two));
        // More passes sharpen the estimate towards the MLE.
        assert!(two.prob(&seq("a"), "b") > one.prob(&seq("a"), "b"));
    }

    #[test]
    fn unseen_context_backs_off() {
        let m = NGramModel::train_sequences([seq("a b c a b d")], 3, 0.75, 1).unwrap();
        let m2 = NGramModel::train_sequences([seq("a b c a b d")], 2, 0.75, 1).unwrap();
        // "d c" never occurs, so the trigram falls back to the bigram on "c"
        let tri = m.next_token_dist(&seq("d c"));
        let bi = m2.next_token_dist(&seq("c"));
        for ((t1, p1), (t2, p2)) in tri.iter().zip(&bi) {
            assert_eq!(t1, t2);
            assert_abs_diff_eq!(p1, p2, epsilon = 1e-15);
        }
    }

    #[test]
    fn equal_counts_give_equal_steps() {
        let m = NGramModel::train_sequences([seq("a b c")], 1, 0.75, 1).unwrap();
        let p = m.prob(&TokenSeq::empty(), "a");
        assert_abs_diff_eq!(
            m.log_perplexity(&seq("a b c")).unwrap(),
            -p.ln(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            m.log_perplexity(&seq("c a")).unwrap(),
            -p.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn invalid_training_args() {
        assert!(matches!(
            NGramModel::train_sequences(Vec::<TokenSeq>::new(), 2, 0.75, 1),
            Err(LmError::EmptyCorpus)
        ));
        assert!(matches!(
            NGramModel::train_sequences([seq("a")], 2, 1.0, 1),
            Err(LmError::InvalidDiscount(_))
        ));
        assert!(matches!(
            NGramModel::train_sequences([seq("a")], 0, 0.5, 1),
            Err(LmError::InvalidOrder)
        ));
        assert!(matches!(
            NGramModel::train_sequences([seq("a")], 2, 0.5, 0),
            Err(LmError::InvalidPasses)
        ));
        assert!(matches!(
            abab(2, 1).log_perplexity(&TokenSeq::empty()),
            Err(LmError::EmptySequence)
        ));
    }

    #[test]
    fn chain_rule() {
        let m = abab(2, 1);
        let one = m.sequence_logprob(&seq("a"), &seq("b")).unwrap();
        assert_abs_diff_eq!(one, m.prob(&seq("a"), "b").ln(), epsilon = 1e-15);
        let two = m.sequence_logprob(&seq("a"), &seq("b a")).unwrap();
        assert_abs_diff_eq!(two, one + m.prob(&seq("a b"), "a").ln(), epsilon = 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let m = NGramModel::train_sequences([seq("int x = 1 ;"), seq("int y = x ;")], 3, 0.6, 2)
            .unwrap();
        let back = NGramModel::from_json(&m.to_json()).unwrap();
        let ctx = seq("int x");
        assert_eq!(m.next_token_dist(&ctx), back.next_token_dist(&ctx));
        assert_eq!(back.order(), 3);
        assert!(NGramModel::from_json("{\"order\":1}").is_err());
    }

    #[test]
    fn normalized_over_random_contexts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let words = ["a", "b", "c", "d", "e", "f"];
        let docs: Vec<TokenSeq> = (0..40)
            .map(|_| {
                let n = rng.gen_range(1..12);
                TokenSeq::from_strs(
                    &(0..n)
                        .map(|_| words[rng.gen_range(0..6)])
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let m = NGramModel::train_sequences(docs, 4, 0.75, 3).unwrap();
        let with_oov = ["a", "b", "c", "d", "e", "f", "zz"];
        for _ in 0..1000 {
            let n = rng.gen_range(0..6);
            let ctx = TokenSeq::from_strs(
                &(0..n)
                    .map(|_| with_oov[rng.gen_range(0..7)])
                    .collect::<Vec<_>>(),
            );
            let probs = m.next_probs(&m.vocab.encode(&ctx));
            let sum: f64 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "sum {sum}");
            assert!(probs.iter().skip(1).all(|&p| p > 0.0));
        }
    }

    proptest! {
        #[test]
        fn probabilities_positive_and_normalized(
            docs in prop::collection::vec(prop::collection::vec(0u8..5, 1..8), 1..10),
            ctx in prop::collection::vec(0u8..6, 0..5),
            order in 1usize..5,
            d in 0.05f64..0.95,
            passes in 1u32..6,
        ) {
            let docs: Vec<TokenSeq> = docs.iter()
                .map(|d| TokenSeq::new(d.iter().map(|x| format!("t{x}")).collect()).unwrap())
                .collect();
            let m = NGramModel::train_sequences(docs, order, d, passes).unwrap();
            let ctx = TokenSeq::new(ctx.iter().map(|x| format!("t{x}")).collect()).unwrap();
            let dist = m.next_token_dist(&ctx);
            let sum: f64 = dist.iter().map(|(_, p)| p).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(dist.iter().filter(|(t, _)| t != BOS).all(|(_, p)| *p > 0.0));
        }
    }
}
