//! The three-channel membership classifier.
//!
//! Each instance carries the prompt `x`, the ground truth `y` and a model's
//! completion `ŷ`. Every channel has its own trainable embedding table; a
//! channel is encoded as the mean of its token rows, the three encodings are
//! concatenated and fed to a `tanh` hidden layer and a sigmoid output unit.
//! Embeddings and classifier weights are trained jointly on binary
//! cross-entropy by mini-batch gradient descent.
//!
//! During training `ŷ` comes from the attacker's surrogate; at attack time
//! it comes from the victim.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;

#[derive(Debug, thiserror::Error)]
pub enum GotchaError {
    #[error("no training instances")]
    EmptyData,
    #[error("training instance {0:?} has no label")]
    Unlabeled(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("malformed classifier document: {0}")]
    Format(String),
}

pub type Result<T, E = GotchaError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Input,
    Truth,
    Output,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Input, Channel::Truth, Channel::Output];

    fn index(self) -> usize {
        self as usize
    }
}

/// Which channels feed the classifier. Disabled channels contribute a zero
/// vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelMask {
    pub input: bool,
    pub truth: bool,
    pub output: bool,
}

impl ChannelMask {
    pub const FULL: ChannelMask = ChannelMask {
        input: true,
        truth: true,
        output: true,
    };

    pub fn without(channel: Channel) -> Self {
        let mut m = ChannelMask::FULL;
        match channel {
            Channel::Input => m.input = false,
            Channel::Truth => m.truth = false,
            Channel::Output => m.output = false,
        }
        m
    }

    pub fn enabled(&self, channel: Channel) -> bool {
        match channel {
            Channel::Input => self.input,
            Channel::Truth => self.truth,
            Channel::Output => self.output,
        }
    }
}

impl Default for ChannelMask {
    fn default() -> Self {
        ChannelMask::FULL
    }
}

impl fmt::Display for ChannelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.input, self.truth, self.output) {
            (true, true, true) => f.write_str("gotcha"),
            (false, true, true) => f.write_str("gotcha-no-input"),
            (true, false, true) => f.write_str("gotcha-no-truth"),
            (true, true, false) => f.write_str("gotcha-no-output"),
            (i, t, o) => write!(f, "gotcha-mask-{}{}{}", i as u8, t as u8, o as u8),
        }
    }
}

/// `⟨x, y, ŷ⟩` with an optional membership label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackInstance {
    pub id: String,
    pub input: TokenSeq,
    pub truth: TokenSeq,
    pub output: TokenSeq,
    pub label: Option<bool>,
}

impl AttackInstance {
    fn channel(&self, c: Channel) -> &TokenSeq {
        match c {
            Channel::Input => &self.input,
            Channel::Truth => &self.truth,
            Channel::Output => &self.output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mask: ChannelMask,
    /// Tokens found in fewer training instances than this share the UNK row.
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embed_dim: 32,
            hidden: 64,
            learning_rate: 0.2,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            mask: ChannelMask::FULL,
            min_count: 2,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(GotchaError::InvalidConfig("dimensions must be at least 1"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(GotchaError::InvalidConfig(
                "epochs and batch size must be at least 1",
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(GotchaError::InvalidConfig(
                "learning rate must be non-negative",
            ));
        }
        Ok(())
    }
}

const UNK_ROW: usize = 0;
const INIT_SCALE: f64 = 0.1;

/// Token index shared by the three channels (each channel still has its own
/// table). Row 0 is UNK.
#[derive(Debug, Clone, PartialEq, Default)]
struct TokenIndex {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl TokenIndex {
    fn build(data: &[AttackInstance], min_count: usize) -> Self {
        // instance frequency, so tokens private to one instance stay UNK
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for inst in data {
            let distinct: HashSet<&str> = Channel::ALL
                .iter()
                .flat_map(|&c| inst.channel(c).iter().map(String::as_str))
                .collect();
            for t in distinct {
                *counts.entry(t).or_default() += 1;
            }
        }
        let mut kept: Vec<&str> = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_count.max(1))
            .map(|(t, _)| t)
            .collect();
        kept.sort_unstable();
        Self::from_tokens(
            std::iter::once("<unk>")
                .chain(kept)
                .map(str::to_owned)
                .collect(),
        )
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TokenIndex { tokens, ids }
    }

    fn len(&self) -> usize {
        self.tokens.len()
    }

    fn row(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK_ROW)
    }
}

/// All trainable parameters, also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Params {
    /// One `vocab × embed_dim` row-major table per channel.
    tables: [Vec<f64>; 3],
    /// `hidden × 3·embed_dim`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl Params {
    fn zeros(vocab: usize, d: usize, h: usize) -> Self {
        Params {
            tables: std::array::from_fn(|_| vec![0.0; vocab * d]),
            w1: vec![0.0; h * 3 * d],
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
        }
    }

    fn random(vocab: usize, d: usize, h: usize, rng: &mut impl Rng) -> Self {
        let mut p = Params::zeros(vocab, d, h);
        p.for_each_mut(|x| *x = rng.gen_range(-INIT_SCALE..=INIT_SCALE));
        p
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for t in &mut self.tables {
            t.iter_mut().for_each(&mut f);
        }
        self.w1.iter_mut().for_each(&mut f);
        self.b1.iter_mut().for_each(&mut f);
        self.w2.iter_mut().for_each(&mut f);
        f(&mut self.b2);
    }

    fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for t in &self.tables {
            v.extend_from_slice(t);
        }
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    fn len(&self) -> usize {
        self.tables.iter().map(Vec::len).sum::<usize>()
            + self.w1.len()
            + self.b1.len()
            + self.w2.len()
            + 1
    }

    fn assign(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        self.for_each_mut(|x| *x = it.next().expect("parameter vector too short"));
    }

    fn axpy(&mut self, alpha: f64, other: &Params) {
        let flat = other.flatten();
        let mut it = flat.into_iter();
        self.for_each_mut(|x| *x += alpha * it.next().unwrap());
    }
}

/// Intermediate values of one forward pass, kept for back-propagation.
struct Trace {
    rows: [Vec<usize>; 3],
    features: Vec<f64>,
    hidden: Vec<f64>,
    prob: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GotchaClassifier {
    config: TrainConfig,
    index: TokenIndex,
    params: Params,
}

impl GotchaClassifier {
    /// A classifier with every weight and bias set to zero.
    pub fn zeroed(config: TrainConfig, vocab: &[&str]) -> Self {
        let index = TokenIndex::from_tokens(
            std::iter::once("<unk>")
                .chain(vocab.iter().copied())
                .map(str::to_owned)
                .collect(),
        );
        let params = Params::zeros(index.len(), config.embed_dim, config.hidden);
        GotchaClassifier {
            config,
            index,
            params,
        }
    }

    /// A classifier with the seeded random initialization used by training.
    pub fn initialize(data: &[AttackInstance], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let index = TokenIndex::build(data, config.min_count);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = Params::random(index.len(), config.embed_dim, config.hidden, &mut rng);
        Ok(GotchaClassifier {
            config,
            index,
            params,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.index.len()
    }

    /// Mean of the channel's table rows for `tokens`; zero for an empty
    /// sequence or a disabled channel.
    pub fn embed_channel(&self, channel: Channel, tokens: &TokenSeq) -> Vec<f64> {
        let rows: Vec<usize> = tokens.iter().map(|t| self.index.row(t)).collect();
        let mut out = vec![0.0; self.config.embed_dim];
        if self.config.mask.enabled(channel) {
            self.pool(channel, &rows, &mut out);
        }
        out
    }

    fn pool(&self, channel: Channel, rows: &[usize], out: &mut [f64]) {
        if rows.is_empty() {
            return;
        }
        let d = self.config.embed_dim;
        let table = &self.params.tables[channel.index()];
        for &r in rows {
            for (o, v) in out.iter_mut().zip(&table[r * d..(r + 1) * d]) {
                *o += v;
            }
        }
        let n = rows.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }

    fn trace(&self, inst: &AttackInstance) -> Trace {
        let d = self.config.embed_dim;
        let h = self.config.hidden;
        let rows: [Vec<usize>; 3] =
            Channel::ALL.map(|c| inst.channel(c).iter().map(|t| self.index.row(t)).collect());
        let mut features = vec![0.0; 3 * d];
        for c in Channel::ALL {
            if self.config.mask.enabled(c) {
                self.pool(
                    c,
                    &rows[c.index()],
                    &mut features[c.index() * d..(c.index() + 1) * d],
                );
            }
        }
        let mut hidden = vec![0.0; h];
        for (j, out) in hidden.iter_mut().enumerate() {
            let row = &self.params.w1[j * 3 * d..(j + 1) * 3 * d];
            let z: f64 =
                row.iter().zip(&features).map(|(w, x)| w * x).sum::<f64>() + self.params.b1[j];
            *out = z.tanh();
        }
        let z: f64 = self
            .params
            .w2
            .iter()
            .zip(&hidden)
            .map(|(w, a)| w * a)
            .sum::<f64>()
            + self.params.b2;
        Trace {
            rows,
            features,
            hidden,
            prob: sigmoid(z),
        }
    }

    /// `σ(w2 · tanh(W1 · [e_x; e_y; e_ŷ] + b1) + b2)`.
    pub fn forward(&self, inst: &AttackInstance) -> f64 {
        self.trace(inst).prob
    }

    /// Score and predicted label; the label is 1 iff `score ≥ threshold`.
    pub fn infer(&self, inst: &AttackInstance, threshold: f64) -> (f64, bool) {
        let p = self.forward(inst);
        (p, p >= threshold)
    }

    // Accumulates ∂(BCE)/∂θ for one instance into `grad`, returns the loss.
    fn backprop(&self, inst: &AttackInstance, label: bool, grad: &mut Params) -> f64 {
        let d = self.config.embed_dim;
        let t = self.trace(inst);
        let y = if label { 1.0 } else { 0.0 };
        let p = t.prob.clamp(1e-15, 1.0 - 1e-15);
        let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());

        let dz = t.prob - y;
        grad.b2 += dz;
        let mut dfeat = vec![0.0; 3 * d];
        for j in 0..self.config.hidden {
            grad.w2[j] += dz * t.hidden[j];
            let da = dz * self.params.w2[j] * (1.0 - t.hidden[j] * t.hidden[j]);
            grad.b1[j] += da;
            let w_row = &self.params.w1[j * 3 * d..(j + 1) * 3 * d];
            let g_row = &mut grad.w1[j * 3 * d..(j + 1) * 3 * d];
            for k in 0..3 * d {
                g_row[k] += da * t.features[k];
                dfeat[k] += da * w_row[k];
            }
        }
        for c in Channel::ALL {
            let rows = &t.rows[c.index()];
            if !self.config.mask.enabled(c) || rows.is_empty() {
                continue;
            }
            let n = rows.len() as f64;
            let df = &dfeat[c.index() * d..(c.index() + 1) * d];
            let table = &mut grad.tables[c.index()];
            for &r in rows {
                for (g, v) in table[r * d..(r + 1) * d].iter_mut().zip(df) {
                    *g += v / n;
                }
            }
        }
        loss
    }

    fn labeled(data: &[AttackInstance]) -> Result<Vec<(&AttackInstance, bool)>> {
        data.iter()
            .map(|i| {
                i.label
                    .map(|l| (i, l))
                    .ok_or_else(|| GotchaError::Unlabeled(i.id.clone()))
            })
            .collect()
    }

    /// Mean binary cross-entropy over labeled `data`.
    pub fn loss(&self, data: &[AttackInstance]) -> Result<f64> {
        let (loss, _) = self.loss_and_gradient(data)?;
        Ok(loss)
    }

    /// Mean loss and its gradient, flattened in [`parameters`] order.
    ///
    /// [`parameters`]: GotchaClassifier::parameters
    pub fn loss_and_gradient(&self, data: &[AttackInstance]) -> Result<(f64, Vec<f64>)> {
        let items = Self::labeled(data)?;
        if items.is_empty() {
            return Err(GotchaError::EmptyData);
        }
        let (loss, grad) = self.batch_gradient(&items);
        Ok((loss, grad.flatten()))
    }

    fn batch_gradient(&self, batch: &[(&AttackInstance, bool)]) -> (f64, Params) {
        let mut grad = Params::zeros(self.index.len(), self.config.embed_dim, self.config.hidden);
        let mut loss = 0.0;
        for &(inst, label) in batch {
            loss += self.backprop(inst, label, &mut grad);
        }
        let n = batch.len() as f64;
        grad.for_each_mut(|g| *g /= n);
        (loss / n, grad)
    }

    /// Every parameter in a fixed order: the input, truth and output tables,
    /// then `W1`, `b1`, `w2`, `b2`.
    pub fn parameters(&self) -> Vec<f64> {
        self.params.flatten()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.params.len(), "parameter vector length");
        self.params.assign(flat);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ClassifierDoc {
            config: self.config,
            vocab: self.index.tokens.clone(),
            input_table: self.params.tables[0].clone(),
            truth_table: self.params.tables[1].clone(),
            output_table: self.params.tables[2].clone(),
            w1: self.params.w1.clone(),
            b1: self.params.b1.clone(),
            w2: self.params.w2.clone(),
            b2: self.params.b2,
        })
        .expect("classifier serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ClassifierDoc =
            serde_json::from_str(s).map_err(|e| GotchaError::Format(e.to_string()))?;
        let (v, d, h) = (doc.vocab.len(), doc.config.embed_dim, doc.config.hidden);
        let shapes_ok = [&doc.input_table, &doc.truth_table, &doc.output_table]
            .iter()
            .all(|t| t.len() == v * d)
            && doc.w1.len() == h * 3 * d
            && doc.b1.len() == h
            && doc.w2.len() == h
            && v >= 1;
        if !shapes_ok {
            return Err(GotchaError::Format(
                "parameter shapes do not match config".into(),
            ));
        }
        Ok(GotchaClassifier {
            config: doc.config,
            index: TokenIndex::from_tokens(doc.vocab),
            params: Params {
                tables: [doc.input_table, doc.truth_table, doc.output_table],
                w1: doc.w1,
                b1: doc.b1,
                w2: doc.w2,
                b2: doc.b2,
            },
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ClassifierDoc {
    config: TrainConfig,
    vocab: Vec<String>,
    input_table: Vec<f64>,
    truth_table: Vec<f64>,
    output_table: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// Trains a classifier on labeled instances.
///
/// Initialization and the per-epoch shuffle both derive from `config.seed`,
/// so two runs with the same seed produce bit-identical weights.
pub fn train_classifier(data: &[AttackInstance], config: TrainConfig) -> Result<GotchaClassifier> {
    if data.is_empty() {
        return Err(GotchaError::EmptyData);
    }
    let items = GotchaClassifier::labeled(data)?;
    let mut clf = GotchaClassifier::initialize(data, config)?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed_5eed_5eed);
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| items[i]).collect();
            let (_, grad) = clf.batch_gradient(&batch);
            clf.params.axpy(-config.learning_rate, &grad);
        }
    }
    Ok(clf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn inst(
        input: &[&str],
        truth: &[&str],
        output: &[&str],
        label: Option<bool>,
    ) -> AttackInstance {
        AttackInstance {
            id: format!("{input:?}{output:?}"),
            input: TokenSeq::from_strs(input),
            truth: TokenSeq::from_strs(truth),
            output: TokenSeq::from_strs(output),
            label,
        }
    }

    fn cfg(d: usize, h: usize) -> TrainConfig {
        TrainConfig {
            embed_dim: d,
            hidden: h,
            ..Default::default()
        }
    }

    #[test]
    fn mean_pooling() {
        let data = [inst(&["a", "a"], &["b", "b"], &["c", "c"], Some(true))];
        let clf = GotchaClassifier::initialize(&data, cfg(4, 3)).unwrap();
        let row_a = clf.embed_channel(Channel::Input, &TokenSeq::from_strs(&["a"]));
        let aa = clf.embed_channel(Channel::Input, &TokenSeq::from_strs(&["a", "a"]));
        assert_eq!(row_a, aa);
        assert_eq!(
            &row_a[..],
            &clf.params.tables[0][clf.index.row("a") * 4..][..4]
        );
        assert_eq!(
            clf.embed_channel(Channel::Output, &TokenSeq::empty()),
            vec![0.0; 4]
        );
        let ab = clf.embed_channel(Channel::Truth, &TokenSeq::from_strs(&["a", "b"]));
        let t = &clf.params.tables[1];
        let (ra, rb) = (clf.index.row("a") * 4, clf.index.row("b") * 4);
        for k in 0..4 {
            assert_abs_diff_eq!(ab[k], (t[ra + k] + t[rb + k]) / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn unknown_tokens_use_unk_row() {
        let data = [inst(&["a", "a"], &["a"], &["a"], Some(true))];
        let clf = GotchaClassifier::initialize(&data, cfg(3, 2)).unwrap();
        let unk = clf.embed_channel(Channel::Input, &TokenSeq::from_strs(&["never-seen"]));
        assert_eq!(&unk[..], &clf.params.tables[0][..3]);
    }

    #[test]
    fn zero_weights_give_one_half() {
        let clf = GotchaClassifier::zeroed(cfg(4, 3), &["a", "b"]);
        for i in [
            inst(&["a"], &["b"], &["a"], None),
            inst(&[], &[], &[], None),
            inst(&["zz"], &["a", "b"], &["b"], None),
        ] {
            assert_eq!(clf.forward(&i), 0.5);
            assert_eq!(clf.infer(&i, 0.5), (0.5, true));
        }
    }

    #[test]
    fn threshold_rule() {
        let mut clf = GotchaClassifier::zeroed(cfg(1, 1), &[]);
        let mut p = clf.parameters();
        let last = p.len() - 1;
        p[last] = (0.7f64 / 0.3).ln(); // b2 such that σ(b2) = 0.7
        clf.set_parameters(&p);
        let (s, l) = clf.infer(&inst(&[], &[], &[], None), 0.5);
        assert_abs_diff_eq!(s, 0.7, epsilon = 1e-12);
        assert!(l);
        assert!(!clf.infer(&inst(&[], &[], &[], None), 0.71).1);
    }

    // One token "t" (row 1), D = H = 1: hand evaluation of the closed form.
    #[test]
    fn closed_form_forward() {
        let mut clf = GotchaClassifier::zeroed(cfg(1, 1), &["t"]);
        // tables: [unk, t] per channel, then w1 (1×3), b1, w2, b2
        let (ex, ey, eo) = (0.5, -1.0, 2.0);
        let (w1, b1, w2, b2) = ([0.3, 0.2, -0.4], 0.1, 1.5, -0.2);
        clf.set_parameters(&[0.0, ex, 0.0, ey, 0.0, eo, w1[0], w1[1], w1[2], b1, w2, b2]);
        let a: f64 = (0.3 * 0.5 + -0.2 * 1.0 + -0.4 * 2.0 + 0.1f64).tanh();
        let expected = 1.0 / (1.0 + (-(1.5 * a - 0.2f64)).exp());
        let i = inst(&["t"], &["t", "t"], &["t"], None);
        assert_abs_diff_eq!(clf.forward(&i), expected, epsilon = 1e-15);
    }

    #[test]
    fn masked_channel_is_ignored() {
        let data = vec![
            inst(&["a"], &["b"], &["c"], Some(true)),
            inst(&["d"], &["e"], &["f"], Some(false)),
        ];
        let clf = train_classifier(
            &data,
            TrainConfig {
                mask: ChannelMask::without(Channel::Output),
                min_count: 1,
                ..cfg(4, 3)
            },
        )
        .unwrap();
        let base = clf.forward(&inst(&["a"], &["b"], &["c"], None));
        for out in [&["f"][..], &["a", "b", "q"], &[]] {
            assert_eq!(clf.forward(&inst(&["a"], &["b"], out, None)), base);
        }
        assert_eq!(
            clf.embed_channel(Channel::Output, &TokenSeq::from_strs(&["c"])),
            vec![0.0; 4]
        );
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let data = vec![
            inst(&["a"], &["b"], &["b"], Some(true)),
            inst(&["a"], &["b"], &["c"], Some(false)),
        ];
        let c = TrainConfig {
            learning_rate: 0.0,
            ..cfg(3, 2)
        };
        let trained = train_classifier(&data, c).unwrap();
        let init = GotchaClassifier::initialize(&data, c).unwrap();
        assert_eq!(trained.parameters(), init.parameters());
    }

    #[test]
    fn same_seed_same_weights() {
        let data: Vec<_> = (0..10)
            .map(|i| {
                inst(
                    &["x"],
                    &["y"],
                    &[if i % 2 == 0 { "y" } else { "z" }],
                    Some(i % 2 == 0),
                )
            })
            .collect();
        let a = train_classifier(
            &data,
            TrainConfig {
                seed: 4,
                ..cfg(4, 4)
            },
        )
        .unwrap();
        let b = train_classifier(
            &data,
            TrainConfig {
                seed: 4,
                ..cfg(4, 4)
            },
        )
        .unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = train_classifier(
            &data,
            TrainConfig {
                seed: 5,
                ..cfg(4, 4)
            },
        )
        .unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn rejects_bad_data() {
        assert!(matches!(
            train_classifier(&[], TrainConfig::default()),
            Err(GotchaError::EmptyData)
        ));
        let r = train_classifier(
            &[inst(&["a"], &["b"], &["c"], None)],
            TrainConfig::default(),
        );
        assert!(matches!(r, Err(GotchaError::Unlabeled(_))));
        let r = train_classifier(
            &[inst(&["a"], &["b"], &["c"], Some(true))],
            TrainConfig {
                embed_dim: 0,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(GotchaError::InvalidConfig(_))));
    }

    #[test]
    fn json_round_trip() {
        let data = vec![
            inst(&["a"], &["b"], &["b"], Some(true)),
            inst(&["a"], &["b"], &["c"], Some(false)),
        ];
        let clf = train_classifier(
            &data,
            TrainConfig {
                min_count: 1,
                ..cfg(3, 2)
            },
        )
        .unwrap();
        let back = GotchaClassifier::from_json(&clf.to_json()).unwrap();
        assert_eq!(back, clf);
        assert!(GotchaClassifier::from_json("{}").is_err());
    }

    #[test]
    fn permuting_a_channel_leaves_pooling_unchanged() {
        let data = [inst(&["a", "b", "c"], &["d"], &["e"], Some(true))];
        let clf = GotchaClassifier::initialize(
            &data,
            TrainConfig {
                min_count: 1,
                ..cfg(5, 2)
            },
        )
        .unwrap();
        let p1 = clf.forward(&inst(&["a", "b", "c"], &["d"], &["e"], None));
        let p2 = clf.forward(&inst(&["c", "a", "b"], &["d"], &["e"], None));
        assert_abs_diff_eq!(p1, p2, epsilon = 1e-15);
        let e1 = clf.embed_channel(Channel::Truth, &TokenSeq::from_strs(&["d"]));
        let e2 = clf.embed_channel(Channel::Input, &TokenSeq::from_strs(&["d"]));
        assert_ne!(e1, e2, "channels have independent tables");
    }
}
