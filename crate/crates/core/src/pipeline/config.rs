use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{PipelineError, Result};
use crate::corpus::{CorpusFormat, ExampleOptions, DEFAULT_TARGET_LEN};
use crate::eval::{AttackConfig, AttackKind, Decoders};
use crate::gotcha::ChannelMask;
use crate::lm::{DecodingConfig, DEFAULT_DISCOUNT};
use crate::stats::Response;

pub const OUT_ENV: &str = "MIA_LAB_OUT";

/// Where examples come from. Without paths the bundled toy corpus is used.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Pool the victim trains on; members are drawn from it.
    pub train: Option<PathBuf>,
    /// Held-out pool; non-members are drawn from it.
    pub test: Option<PathBuf>,
    pub format: CorpusFormat,
    pub examples: ExampleOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub known_ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            known_ratio: 0.3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    pub order: usize,
    pub discount: f64,
    /// Training epochs; raw counts are multiplied by this.
    pub passes: u32,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            id: "ngram4".into(),
            order: 4,
            discount: DEFAULT_DISCOUNT,
            passes: 5,
        }
    }
}

impl ModelSpec {
    pub fn ngram(order: usize, passes: u32) -> Self {
        ModelSpec {
            id: format!("ngram{order}"),
            order,
            passes,
            ..Default::default()
        }
    }
}

/// Factor levels for the full-factorial study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub victims: Vec<ModelSpec>,
    /// Victim training epochs; overrides each victim's `passes`.
    pub epochs: Vec<u32>,
    pub surrogates: Vec<ModelSpec>,
    pub ratios: Vec<f64>,
    pub attack: AttackKind,
    pub response: Response,
    pub max_interaction: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            victims: vec![ModelSpec::ngram(3, 1), ModelSpec::ngram(4, 1)],
            epochs: vec![1, 5],
            surrogates: vec![ModelSpec::ngram(2, 5), ModelSpec::ngram(4, 5)],
            ratios: vec![0.1, 0.2],
            attack: AttackKind::Gotcha(ChannelMask::FULL),
            response: Response::Power,
            max_interaction: 3,
        }
    }
}

/// The decoding sweep for the defense study. Each group is swept with the
/// other parameter held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub temperatures: Vec<f64>,
    pub fixed_k: usize,
    pub ks: Vec<usize>,
    pub fixed_temperature: f64,
    pub include_beam: bool,
    pub attack: AttackKind,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            temperatures: vec![0.1, 0.5, 1.0, 2.0],
            fixed_k: 50,
            ks: vec![10, 50, 100],
            fixed_temperature: 1.0,
            include_beam: true,
            attack: AttackKind::Gotcha(ChannelMask::FULL),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub attack: AttackKind,
    /// Which seed's predictions to analyse; the first configured seed when
    /// absent.
    pub seed: Option<u64>,
    /// Words never counted as variables; Java keywords when absent.
    pub keywords: Option<Vec<String>>,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            attack: AttackKind::Gotcha(ChannelMask::FULL),
            seed: None,
            keywords: None,
        }
    }
}

fn default_decoders() -> Decoders {
    let d = DecodingConfig {
        max_len: DEFAULT_TARGET_LEN,
        ..DecodingConfig::beam(4)
    };
    Decoders {
        victim: d,
        surrogate: d,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub split: SplitConfig,
    pub victim: ModelSpec,
    pub surrogate: ModelSpec,
    pub decoding: Decoders,
    pub attacks: Vec<AttackKind>,
    /// Also run GOTCHA with each channel removed.
    pub ablations: bool,
    pub attack: AttackConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
    pub grid: GridConfig,
    pub defense: DefenseConfig,
    pub features: FeaturesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: CorpusConfig::default(),
            split: SplitConfig::default(),
            victim: ModelSpec::default(),
            surrogate: ModelSpec::default(),
            decoding: default_decoders(),
            attacks: AttackKind::standard(),
            ablations: false,
            attack: AttackConfig::default(),
            seeds: vec![1, 2, 3],
            out_dir: PathBuf::from("mia-lab-out"),
            workers: None,
            grid: GridConfig::default(),
            defense: DefenseConfig::default(),
            features: FeaturesConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads `path` (or starts from defaults), applies `key.path=value`
    /// overrides, then lets `MIA_LAB_OUT` redirect the output directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(RunConfig::default())?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| PipelineError::Config(e.to_string()))?;
        if let Some(out) = std::env::var_os(OUT_ENV) {
            cfg.out_dir = PathBuf::from(out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        for p in [&self.corpus.train, &self.corpus.test]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return bad(format!("corpus path {} does not exist", p.display()));
            }
        }
        if self.corpus.train.is_some() != self.corpus.test.is_some() {
            return bad("corpus.train and corpus.test must be given together".into());
        }
        if !(self.split.known_ratio > 0.0 && self.split.known_ratio < 1.0) {
            return bad(format!(
                "known_ratio {} must lie in (0, 1)",
                self.split.known_ratio
            ));
        }
        if self.attacks.is_empty() && !self.ablations {
            return bad("no attacks selected".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        self.decoding.victim.validate()?;
        self.decoding.surrogate.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Attacks run by `attack`: the selection plus the ablations, without
    /// duplicates.
    pub fn attack_list(&self) -> Vec<AttackKind> {
        let mut v: Vec<AttackKind> = Vec::new();
        let extra = if self.ablations {
            AttackKind::ablations()
        } else {
            Vec::new()
        };
        for k in self.attacks.iter().copied().chain(extra) {
            if !v.contains(&k) {
                v.push(k);
            }
        }
        v
    }
}

/// `a.b.c=value`, where `value` is parsed as JSON and falls back to a plain
/// string.
fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| PipelineError::Config(format!("override {spec:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            PipelineError::Config(format!("{key}: {part} is not inside an object"))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    Ok(())
}
