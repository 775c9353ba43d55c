//! Small from-scratch classifiers for the feature-based attack.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    NaiveBayes,
    DecisionTree,
    Knn,
    Mlp,
    Dnn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::NaiveBayes,
        ClassifierKind::DecisionTree,
        ClassifierKind::Knn,
        ClassifierKind::Mlp,
        ClassifierKind::Dnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "naive-bayes",
            ClassifierKind::DecisionTree => "decision-tree",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Dnn => "dnn",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BaselineError::UnknownName(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub tree_max_depth: usize,
    pub knn_k: usize,
    pub hidden_units: usize,
    /// Hidden layers used by the "dnn" kind; "mlp" always has one.
    pub dnn_layers: usize,
    pub l2_alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub nb_var_floor: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            tree_max_depth: 5,
            knn_k: 5,
            hidden_units: 50,
            dnn_layers: 3,
            l2_alpha: 1e-4,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            nb_var_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureClassifier {
    NaiveBayes(GaussianNb),
    DecisionTree(DecisionTree),
    Knn(Knn),
    Mlp(Mlp),
}

impl FeatureClassifier {
    /// Estimated probability of membership.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            FeatureClassifier::NaiveBayes(m) => m.predict_proba(x),
            FeatureClassifier::DecisionTree(m) => m.predict_proba(x),
            FeatureClassifier::Knn(m) => m.predict_proba(x),
            FeatureClassifier::Mlp(m) => m.predict_proba(x),
        }
    }

    /// Member iff the probability is strictly above one half.
    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) > 0.5
    }
}

fn check_data(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(BaselineError::BadTrainingData(
            "need one label per non-empty row",
        ));
    }
    let dim = x[0].len();
    if dim == 0 || x.iter().any(|r| r.len() != dim) {
        return Err(BaselineError::BadTrainingData(
            "rows must share a non-zero width",
        ));
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(BaselineError::BadTrainingData(
            "both classes must be present",
        ));
    }
    Ok(dim)
}

pub fn train_feature_classifier(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[bool],
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<FeatureClassifier> {
    check_data(x, y)?;
    Ok(match kind {
        ClassifierKind::NaiveBayes => {
            FeatureClassifier::NaiveBayes(GaussianNb::fit(x, y, cfg.nb_var_floor))
        }
        ClassifierKind::DecisionTree => {
            FeatureClassifier::DecisionTree(DecisionTree::fit(x, y, cfg.tree_max_depth))
        }
        ClassifierKind::Knn => FeatureClassifier::Knn(Knn::fit(x, y, cfg.knn_k)),
        ClassifierKind::Mlp => {
            FeatureClassifier::Mlp(Mlp::fit(x, y, &[cfg.hidden_units], cfg, seed))
        }
        ClassifierKind::Dnn => {
            let layers = vec![cfg.hidden_units; cfg.dnn_layers.max(1)];
            FeatureClassifier::Mlp(Mlp::fit(x, y, &layers, cfg, seed))
        }
    })
}

/// Gaussian naive Bayes with class priors from the training frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNb {
    fn fit(x: &[Vec<f64>], y: &[bool], var_floor: f64) -> Self {
        let dim = x[0].len();
        let mut mean = [vec![0.0; dim], vec![0.0; dim]];
        let mut var = [vec![0.0; dim], vec![0.0; dim]];
        let mut n = [0.0f64; 2];
        for (r, &l) in x.iter().zip(y) {
            let c = l as usize;
            n[c] += 1.0;
            for (m, v) in mean[c].iter_mut().zip(r) {
                *m += v;
            }
        }
        for c in 0..2 {
            mean[c].iter_mut().for_each(|m| *m /= n[c]);
        }
        for (r, &l) in x.iter().zip(y) {
            let c = l as usize;
            for j in 0..dim {
                var[c][j] += (r[j] - mean[c][j]).powi(2);
            }
        }
        for c in 0..2 {
            var[c]
                .iter_mut()
                .for_each(|v| *v = (*v / n[c]).max(var_floor));
        }
        let total = n[0] + n[1];
        GaussianNb {
            prior: [n[0] / total, n[1] / total],
            mean,
            var,
        }
    }

    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        let ll: f64 = x
            .iter()
            .zip(&self.mean[c])
            .zip(&self.var[c])
            .map(|((v, m), s2)| {
                -0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m).powi(2) / s2)
            })
            .sum();
        self.prior[c].ln() + ll
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let (l0, l1) = (self.log_joint(0, x), self.log_joint(1, x));
        // σ(l1 − l0)
        let z = l1 - l0;
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        prob: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// CART tree grown greedily on GINI impurity. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    root: Node,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

impl DecisionTree {
    fn fit(x: &[Vec<f64>], y: &[bool], max_depth: usize) -> Self {
        let idx: Vec<usize> = (0..x.len()).collect();
        DecisionTree {
            root: Self::grow(x, y, &idx, max_depth),
        }
    }

    fn grow(x: &[Vec<f64>], y: &[bool], idx: &[usize], depth_left: usize) -> Node {
        let n = idx.len() as f64;
        let pos = idx.iter().filter(|&&i| y[i]).count() as f64;
        let leaf = Node::Leaf { prob: pos / n };
        if depth_left == 0 || pos == 0.0 || pos == n {
            return leaf;
        }
        let parent = gini(pos, n);
        // (weighted child impurity, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..x[0].len() {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
            let mut left_pos = 0.0;
            for k in 0..order.len() - 1 {
                left_pos += y[order[k]] as u8 as f64;
                let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
                if lo == hi {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let impurity = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / n;
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        match best {
            Some((impurity, feature, threshold)) if impurity < parent => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x[i][feature] <= threshold);
                Node::Split {
                    feature,
                    threshold,
                    left: Box::new(Self::grow(x, y, &l, depth_left - 1)),
                    right: Box::new(Self::grow(x, y, &r, depth_left - 1)),
                }
            }
            _ => leaf,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { prob } => return *prob,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

/// k-nearest neighbours under Euclidean distance (Minkowski, p = 2). Equal
/// distances keep training order.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    k: usize,
    x: Vec<Vec<f64>>,
    y: Vec<bool>,
}

impl Knn {
    fn fit(x: &[Vec<f64>], y: &[bool], k: usize) -> Self {
        Knn {
            k: k.max(1),
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    /// Fraction of members among the `k` nearest training rows.
    pub fn predict_proba(&self, q: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
                    i,
                )
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = self.k.min(d.len());
        d[..k].iter().filter(|&&(_, i)| self.y[i]).count() as f64 / k as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    // out × in, row-major
    w: Vec<f64>,
    b: Vec<f64>,
    inputs: usize,
}

impl Layer {
    fn outputs(&self) -> usize {
        self.b.len()
    }
}

/// Fully connected ReLU network with a sigmoid output, trained on binary
/// cross-entropy plus an L2 penalty `α/2 · Σ w²` by mini-batch gradient
/// descent.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    fn fit(
        x: &[Vec<f64>],
        y: &[bool],
        hidden: &[usize],
        cfg: &ClassifierConfig,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![x[0].len()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Layer {
                    w: (0..w[0] * w[1])
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                    b: vec![0.0; w[1]],
                    inputs: w[0],
                }
            })
            .collect();
        let mut net = Mlp { layers };
        let mut order: Vec<usize> = (0..x.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size.max(1)) {
                net.step(x, y, chunk, cfg);
            }
        }
        net
    }

    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (li, layer) in self.layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let last = li + 1 == self.layers.len();
            let out = (0..layer.outputs())
                .map(|o| {
                    let z = layer.w[o * layer.inputs..(o + 1) * layer.inputs]
                        .iter()
                        .zip(input)
                        .map(|(w, a)| w * a)
                        .sum::<f64>()
                        + layer.b[o];
                    if last {
                        1.0 / (1.0 + (-z).exp())
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    fn step(&mut self, x: &[Vec<f64>], y: &[bool], batch: &[usize], cfg: &ClassifierConfig) {
        let mut gw: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.b.len()]).collect();
        for &i in batch {
            let acts = self.activations(&x[i]);
            let p = acts.last().unwrap()[0];
            let mut delta = vec![p - y[i] as u8 as f64];
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                for o in 0..layer.outputs() {
                    gb[li][o] += delta[o];
                    for j in 0..layer.inputs {
                        gw[li][o * layer.inputs + j] += delta[o] * input[j];
                    }
                }
                if li > 0 {
                    delta = (0..layer.inputs)
                        .map(|j| {
                            let back: f64 = (0..layer.outputs())
                                .map(|o| layer.w[o * layer.inputs + j] * delta[o])
                                .sum();
                            if input[j] > 0.0 {
                                back
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        let n = batch.len() as f64;
        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.w.iter_mut().zip(&gw[li]) {
                *w -= cfg.learning_rate * (g / n + cfg.l2_alpha * *w);
            }
            for (b, g) in layer.b.iter_mut().zip(&gb[li]) {
                *b -= cfg.learning_rate * g / n;
            }
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.activations(x).last().unwrap()[0]
    }
}
