use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::metrics::{confusion, power_error, roc_auc, RocCurve};
use super::{EvalError, Result};
use crate::baselines::{
    extract_features, metric_score, rank_and_cutoff, train_feature_classifier, ClassifierConfig,
    ClassifierKind, FeatureClassifier, Metric, DEFAULT_CUTOFF,
};
use crate::corpus::{DatasetBundle, LabeledExample};
use crate::gotcha::{
    train_classifier, AttackInstance, Channel, ChannelMask, GotchaClassifier, TrainConfig,
};
use crate::lm::{CompletionModel, DecodingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    Gotcha(ChannelMask),
    Classifier(ClassifierKind),
    Ranking(Metric),
}

impl AttackKind {
    /// GOTCHA, the five feature classifiers and the three ranking metrics.
    pub fn standard() -> Vec<AttackKind> {
        let mut v = vec![AttackKind::Gotcha(ChannelMask::FULL)];
        v.extend(ClassifierKind::ALL.map(AttackKind::Classifier));
        v.extend(Metric::ALL.map(AttackKind::Ranking));
        v
    }

    pub fn ablations() -> Vec<AttackKind> {
        Channel::ALL
            .iter()
            .map(|&c| AttackKind::Gotcha(ChannelMask::without(c)))
            .collect()
    }

    pub fn is_gotcha(&self) -> bool {
        matches!(self, AttackKind::Gotcha(_))
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackKind::Gotcha(m) => m.fmt(f),
            AttackKind::Classifier(k) => k.fmt(f),
            AttackKind::Ranking(m) => m.fmt(f),
        }
    }
}

impl FromStr for AttackKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(k) = s.parse() {
            return Ok(AttackKind::Classifier(k));
        }
        if let Ok(m) = s.parse() {
            return Ok(AttackKind::Ranking(m));
        }
        std::iter::once(ChannelMask::FULL)
            .chain(Channel::ALL.map(ChannelMask::without))
            .find(|m| m.to_string() == s)
            .map(AttackKind::Gotcha)
            .ok_or_else(|| EvalError::UnknownAttack(s.to_owned()))
    }
}

impl Serialize for AttackKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttackKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub gotcha: TrainConfig,
    pub classifier: ClassifierConfig,
    /// Fraction of ranked instances called members.
    pub cutoff: f64,
    /// GOTCHA decision threshold.
    pub threshold: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            gotcha: TrainConfig::default(),
            classifier: ClassifierConfig::default(),
            cutoff: DEFAULT_CUTOFF,
            threshold: 0.5,
        }
    }
}

/// Factor levels identifying one cell of an experiment grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMeta {
    pub victim_id: String,
    pub surrogate_id: String,
    pub epochs: usize,
    pub known_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub victim_id: String,
    pub surrogate_id: String,
    pub epochs: usize,
    pub known_ratio: f64,
    pub attack: AttackKind,
    /// `None` on the seed-mean row.
    pub seed: Option<u64>,
    pub power: f64,
    pub error: f64,
    pub auc: f64,
}

pub const RECORD_HEADER: [&str; 9] = [
    "victim_id",
    "surrogate_id",
    "epochs",
    "known_ratio",
    "attack",
    "seed",
    "power",
    "error",
    "auc",
];

impl ExperimentRecord {
    pub fn csv_row(&self) -> [String; 9] {
        [
            self.victim_id.clone(),
            self.surrogate_id.clone(),
            self.epochs.to_string(),
            self.known_ratio.to_string(),
            self.attack.to_string(),
            self.seed.map_or_else(|| "mean".into(), |s| s.to_string()),
            self.power.to_string(),
            self.error.to_string(),
            self.auc.to_string(),
        ]
    }
}

pub fn write_records_csv<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Arithmetic mean over the per-seed records of one attack.
pub fn seed_mean(records: &[ExperimentRecord]) -> Result<ExperimentRecord> {
    let first = records.first().ok_or(EvalError::NoSeeds)?;
    let n = records.len() as f64;
    let mean = |f: fn(&ExperimentRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    Ok(ExperimentRecord {
        seed: None,
        power: mean(|r| r.power),
        error: mean(|r| r.error),
        auc: mean(|r| r.auc),
        ..first.clone()
    })
}

/// Outcome of one attack run under one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub power: f64,
    pub error: f64,
    pub auc: f64,
    pub roc: RocCurve,
    /// Membership score per evaluation instance; larger means member.
    pub scores: Vec<f64>,
    pub predicted: Vec<bool>,
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Queries `model` on every example's input. Sampling decoders get a
/// per-instance seed derived from the configured one, so results do not
/// depend on thread scheduling.
pub fn build_instances(
    examples: &[LabeledExample],
    model: &dyn CompletionModel,
    decoding: &DecodingConfig,
) -> Vec<AttackInstance> {
    examples
        .par_iter()
        .enumerate()
        .map(|(i, le)| {
            let cfg = decoding.with_seed(mix(decoding.rng_seed ^ mix(i as u64)));
            let completion = model.complete(&le.example.input, &cfg);
            AttackInstance {
                id: le.example.id.clone(),
                input: le.example.input.clone(),
                truth: le.example.truth.clone(),
                output: completion.tokens,
                label: Some(le.member),
            }
        })
        .collect()
}

/// Attack inputs: training instances carry surrogate outputs, evaluation
/// instances carry victim outputs.
#[derive(Clone, Copy)]
pub struct AttackData<'a> {
    pub train: &'a [AttackInstance],
    pub eval: &'a [AttackInstance],
    pub victim: &'a dyn CompletionModel,
    pub surrogate: Option<&'a dyn CompletionModel>,
}

fn labels(insts: &[AttackInstance]) -> Result<Vec<bool>> {
    insts
        .iter()
        .map(|i| i.label.ok_or_else(|| EvalError::Unlabeled(i.id.clone())))
        .collect()
}

/// An attack fitted on training instances, ready to score evaluation sets.
pub enum FittedAttack {
    Gotcha(GotchaClassifier, f64),
    Classifier(FeatureClassifier),
    Ranking(Metric, f64),
}

impl FittedAttack {
    pub fn fit(
        kind: AttackKind,
        train: &[AttackInstance],
        cfg: &AttackConfig,
        seed: u64,
    ) -> Result<Self> {
        Ok(match kind {
            AttackKind::Gotcha(mask) => {
                let tc = TrainConfig {
                    seed,
                    mask,
                    ..cfg.gotcha
                };
                FittedAttack::Gotcha(train_classifier(train, tc)?, cfg.threshold)
            }
            AttackKind::Classifier(k) => {
                let x: Vec<Vec<f64>> = train
                    .iter()
                    .map(|i| extract_features(i).as_array().to_vec())
                    .collect();
                let y = labels(train)?;
                FittedAttack::Classifier(train_feature_classifier(
                    k,
                    &x,
                    &y,
                    &cfg.classifier,
                    seed,
                )?)
            }
            AttackKind::Ranking(m) => FittedAttack::Ranking(m, cfg.cutoff),
        })
    }

    /// Membership scores (larger means member) and predicted labels.
    pub fn score(
        &self,
        eval: &[AttackInstance],
        victim: &dyn CompletionModel,
        surrogate: Option<&dyn CompletionModel>,
    ) -> Result<(Vec<f64>, Vec<bool>)> {
        Ok(match self {
            FittedAttack::Gotcha(clf, threshold) => {
                eval.iter().map(|i| clf.infer(i, *threshold)).unzip()
            }
            FittedAttack::Classifier(clf) => eval
                .iter()
                .map(|i| {
                    let f = extract_features(i).as_array();
                    (clf.predict_proba(&f), clf.predict(&f))
                })
                .unzip(),
            FittedAttack::Ranking(m, cutoff) => {
                let ranked = eval
                    .iter()
                    .map(|i| metric_score(*m, victim, surrogate, i))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let predicted = rank_and_cutoff(&ranked, *cutoff)?;
                (
                    ranked.iter().map(|r| r.membership_score()).collect(),
                    predicted,
                )
            }
        })
    }

    pub fn evaluate(
        &self,
        seed: u64,
        eval: &[AttackInstance],
        victim: &dyn CompletionModel,
        surrogate: Option<&dyn CompletionModel>,
    ) -> Result<SeedRun> {
        let truth = labels(eval)?;
        let (scores, predicted) = self.score(eval, victim, surrogate)?;
        let (power, error) = power_error(confusion(&truth, &predicted)?)?;
        let (roc, auc) = roc_auc(&scores, &truth)?;
        Ok(SeedRun {
            seed,
            power,
            error,
            auc,
            roc,
            scores,
            predicted,
        })
    }
}

pub fn run_attack(
    kind: AttackKind,
    data: AttackData<'_>,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<SeedRun> {
    FittedAttack::fit(kind, data.train, cfg, seed)?.evaluate(
        seed,
        data.eval,
        data.victim,
        data.surrogate,
    )
}

#[derive(Debug, Clone)]
pub struct Experiment {
    /// One record per seed followed by the seed-mean record.
    pub records: Vec<ExperimentRecord>,
    pub runs: Vec<SeedRun>,
}

pub fn evaluate(
    kind: AttackKind,
    data: AttackData<'_>,
    cfg: &AttackConfig,
    seeds: &[u64],
    meta: &RunMeta,
) -> Result<Experiment> {
    if seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let runs = seeds
        .iter()
        .map(|&s| run_attack(kind, data, cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<ExperimentRecord> = runs
        .iter()
        .map(|r| ExperimentRecord {
            victim_id: meta.victim_id.clone(),
            surrogate_id: meta.surrogate_id.clone(),
            epochs: meta.epochs,
            known_ratio: meta.known_ratio,
            attack: kind,
            seed: Some(r.seed),
            power: r.power,
            error: r.error,
            auc: r.auc,
        })
        .collect();
    records.push(seed_mean(&records)?);
    Ok(Experiment { records, runs })
}

/// Which decoder each model uses when producing `ŷ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Decoders {
    pub victim: DecodingConfig,
    pub surrogate: DecodingConfig,
}

/// Generates both sets of outputs, then evaluates `kind` under every seed.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    bundle: &DatasetBundle,
    victim: &dyn CompletionModel,
    surrogate: &dyn CompletionModel,
    kind: AttackKind,
    cfg: &AttackConfig,
    decoders: &Decoders,
    seeds: &[u64],
    meta: &RunMeta,
) -> Result<Experiment> {
    let train = build_instances(&bundle.mia_train, surrogate, &decoders.surrogate);
    let eval = build_instances(&bundle.mia_eval, victim, &decoders.victim);
    let data = AttackData {
        train: &train,
        eval: &eval,
        victim,
        surrogate: Some(surrogate),
    };
    evaluate(kind, data, cfg, seeds, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Example, TokenSeq};
    use crate::lm::LookupModel;

    #[test]
    fn attack_names_round_trip() {
        let all: Vec<AttackKind> = AttackKind::standard()
            .into_iter()
            .chain(AttackKind::ablations())
            .collect();
        assert_eq!(all.len(), 12);
        for k in &all {
            assert_eq!(k.to_string().parse::<AttackKind>().unwrap(), *k);
        }
        assert!(matches!(
            "svm".parse::<AttackKind>(),
            Err(EvalError::UnknownAttack(_))
        ));
        assert_eq!(serde_json::to_string(&all[0]).unwrap(), "\"gotcha\"");
    }

    fn record(seed: u64, power: f64) -> ExperimentRecord {
        ExperimentRecord {
            victim_id: "v".into(),
            surrogate_id: "s".into(),
            epochs: 1,
            known_ratio: 0.1,
            attack: AttackKind::Ranking(Metric::Perplexity),
            seed: Some(seed),
            power,
            error: 0.0,
            auc: 0.5,
        }
    }

    #[test]
    fn mean_record() {
        let m = seed_mean(&[record(1, 0.5), record(2, 0.6), record(3, 1.0)]).unwrap();
        assert_eq!(m.seed, None);
        assert!((m.power - 0.7).abs() < 1e-12);
        assert_eq!(m.csv_row()[5], "mean");
    }

    fn bundle() -> DatasetBundle {
        let ex = |i: usize, tag: &str| Example {
            id: format!("{tag}{i}"),
            input: TokenSeq::from_strs(&[tag, &i.to_string()]),
            truth: TokenSeq::from_strs(&["v", &(i % 3).to_string()]),
        };
        let le = |i, tag, member| LabeledExample {
            example: ex(i, tag),
            member,
        };
        let mut mia_train: Vec<_> = (0..6).map(|i| le(i, "a", true)).collect();
        mia_train.extend((0..6).map(|i| le(i, "b", false)));
        let mut mia_eval: Vec<_> = (6..12).map(|i| le(i, "a", true)).collect();
        mia_eval.extend((6..12).map(|i| le(i, "b", false)));
        let victim_train: Vec<Example> = (0..12).map(|i| ex(i, "a")).collect();
        DatasetBundle {
            surrogate_train: victim_train[..6].to_vec(),
            victim_train,
            mia_train,
            mia_eval,
        }
    }

    #[test]
    fn experiment_emits_one_record_per_seed_plus_mean() {
        let b = bundle();
        let victim = LookupModel::new(&b.victim_train, 20);
        let surrogate = LookupModel::new(&b.surrogate_train, 20);
        let meta = RunMeta {
            victim_id: "lookup".into(),
            surrogate_id: "lookup".into(),
            epochs: 1,
            known_ratio: 0.5,
        };
        let exp = run_experiment(
            &b,
            &victim,
            &surrogate,
            AttackKind::Ranking(Metric::Perplexity),
            &AttackConfig::default(),
            &Decoders::default(),
            &[1, 2, 3],
            &meta,
        )
        .unwrap();
        assert_eq!(exp.records.len(), 4);
        assert_eq!(exp.runs.len(), 3);
        let mean = exp.records.last().unwrap();
        assert_eq!(mean.seed, None);
        assert_eq!((mean.power, mean.error, mean.auc), (1.0, 0.0, 1.0));
    }

    #[test]
    fn gotcha_separates_memorized_outputs() {
        let b = bundle();
        let victim = LookupModel::new(&b.victim_train, 20);
        let surrogate = LookupModel::new(&b.surrogate_train, 20);
        let cfg = AttackConfig {
            gotcha: TrainConfig {
                epochs: 200,
                batch_size: 4,
                learning_rate: 0.5,
                min_count: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let exp = run_experiment(
            &b,
            &victim,
            &surrogate,
            AttackKind::Gotcha(ChannelMask::FULL),
            &cfg,
            &Decoders::default(),
            &[7],
            &RunMeta::default(),
        )
        .unwrap();
        assert!(exp.records[0].auc >= 0.9, "{:?}", exp.records[0]);
    }

    #[test]
    fn no_seeds_is_an_error() {
        let b = bundle();
        let m = LookupModel::new(&b.victim_train, 5);
        let r = run_experiment(
            &b,
            &m,
            &m,
            AttackKind::Ranking(Metric::Perplexity),
            &AttackConfig::default(),
            &Decoders::default(),
            &[],
            &RunMeta::default(),
        );
        assert!(matches!(r, Err(EvalError::NoSeeds)));
    }
}
