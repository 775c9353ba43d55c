//! End-to-end commands: split, attack, grid, defend, features and report.
//!
//! Every command reads a [`RunConfig`], writes into `out_dir` under fixed
//! file names, and starts each CSV with a `# config_sha256=...` line so
//! outputs can be traced back to the configuration that produced them.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    extract_features, metric_score, rank_and_cutoff, smoothed_bleu, write_feature_csv,
    write_ranking_csv, BaselineError,
};
use crate::corpus::toy::toy_corpus;
use crate::corpus::{
    load_corpus, materialize, plan_splits, write_examples_jsonl, CorpusError, DatasetBundle,
    Example, LabeledExample, SplitPlan,
};
use crate::eval::{
    build_instances, evaluate, seed_mean, write_records_csv, AttackData, AttackKind, EvalError,
    ExperimentRecord, FittedAttack, RunMeta, RECORD_HEADER,
};
use crate::gotcha::AttackInstance;
use crate::lm::{DecodingConfig, LmError, NGramModel};
use crate::stats::{
    bonferroni, compare_groups, extract_rq3_features, factorial_anova, java_keywords,
    wilcoxon_signed_rank, write_comparison_csv, Factor, FeatureRow, StatsError,
};

pub use config::{
    CorpusConfig, DefenseConfig, FeaturesConfig, GridConfig, ModelSpec, RunConfig, SplitConfig,
    OUT_ENV,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing artifact {0}; run the producing command first")]
    MissingArtifact(PathBuf),
    #[error("{0} no longer matches the configuration; rerun `split`")]
    StaleSplit(PathBuf),
    #[error("no {0} instances to compare")]
    EmptyGroup(&'static str),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl PipelineError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

pub const PLAN_FILE: &str = "plan.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const ANOVA_FILE: &str = "anova.csv";
pub const DEFENSE_FILE: &str = "defense.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const FEATURE_ROWS_FILE: &str = "feature_rows.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const WILCOXON_FILE: &str = "wilcoxon.csv";
pub const SPLIT_FILES: [&str; 4] = [
    "victim_train.jsonl",
    "surrogate_train.jsonl",
    "mia_train.jsonl",
    "mia_eval.jsonl",
];

pub fn roc_file(attack: AttackKind, seed: u64) -> String {
    format!("roc_{attack}_{seed}.csv")
}

pub fn scores_file(attack: AttackKind, seed: u64) -> String {
    format!("scores_{attack}_{seed}.csv")
}

/// A validated configuration bound to its output directory.
pub struct Run {
    pub config: RunConfig,
    hash: String,
}

impl Run {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Run { config, hash })
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out_dir
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(self.out_dir()).map_err(|e| PipelineError::io(self.out_dir(), e))
    }

    /// Writes a CSV whose body comes from `body`, behind the hash line.
    fn write_csv<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = format!("# config_sha256={}\n", self.hash).into_bytes();
        body(&mut buf)?;
        let path = self.path(name);
        fs::write(&path, buf).map_err(|e| PipelineError::io(&path, e))?;
        Ok(path)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.config.workers {
            b = b.num_threads(n);
        }
        Ok(b.build()?)
    }

    /// Victim training pool and held-out pool as examples.
    pub fn load_examples(&self) -> Result<(Vec<Example>, Vec<Example>)> {
        let c = &self.config.corpus;
        let (train, test) = match (&c.train, &c.test) {
            (Some(a), Some(b)) => (load_corpus(a, c.format)?, load_corpus(b, c.format)?),
            _ => toy_corpus(),
        };
        Ok((train.examples(&c.examples)?, test.examples(&c.examples)?))
    }

    fn plan(&self, train: &[Example], test: &[Example], ratio: f64) -> Result<SplitPlan> {
        Ok(plan_splits(
            train.len(),
            test.len(),
            ratio,
            self.config.split.seed,
        )?)
    }

    /// The split for this configuration. An existing `plan.json` must agree
    /// with it.
    pub fn bundle(&self) -> Result<(SplitPlan, DatasetBundle)> {
        let (train, test) = self.load_examples()?;
        let plan = self.plan(&train, &test, self.config.split.known_ratio)?;
        let on_disk = self.path(PLAN_FILE);
        if on_disk.exists() {
            let text = fs::read_to_string(&on_disk).map_err(|e| PipelineError::io(&on_disk, e))?;
            if SplitPlan::from_json(&text)? != plan {
                return Err(PipelineError::StaleSplit(on_disk));
            }
        }
        let bundle = materialize(&plan, &train, &test)?;
        Ok((plan, bundle))
    }
}

fn train_model(spec: &ModelSpec, data: &[Example], passes: u32) -> Result<NGramModel> {
    Ok(NGramModel::train(data, spec.order, spec.discount, passes)?)
}

#[derive(Serialize, Deserialize)]
struct LabeledRecord {
    id: String,
    input: String,
    target: String,
    member: bool,
}

fn labeled_jsonl(rows: &[LabeledExample]) -> String {
    rows.iter()
        .map(|l| {
            let r = LabeledRecord {
                id: l.example.id.clone(),
                input: l.example.input.detokenize(),
                target: l.example.truth.detokenize(),
                member: l.member,
            };
            serde_json::to_string(&r).expect("record serializes") + "\n"
        })
        .collect()
}

/// Writes `plan.json` and the four materialized example sets.
pub fn cmd_split(run: &Run) -> Result<Vec<PathBuf>> {
    let (train, test) = run.load_examples()?;
    let plan = run.plan(&train, &test, run.config.split.known_ratio)?;
    let bundle = materialize(&plan, &train, &test)?;
    run.ensure_out_dir()?;
    let mut written = Vec::new();
    let plan_path = run.path(PLAN_FILE);
    fs::write(&plan_path, plan.to_json() + "\n").map_err(|e| PipelineError::io(&plan_path, e))?;
    written.push(plan_path);
    for (name, examples) in SPLIT_FILES[..2]
        .iter()
        .zip([&bundle.victim_train, &bundle.surrogate_train])
    {
        let p = run.path(name);
        write_examples_jsonl(&p, examples).map_err(|e| PipelineError::io(&p, e))?;
        written.push(p);
    }
    for (name, rows) in SPLIT_FILES[2..]
        .iter()
        .zip([&bundle.mia_train, &bundle.mia_eval])
    {
        let p = run.path(name);
        fs::write(&p, labeled_jsonl(rows)).map_err(|e| PipelineError::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

/// Trained models plus attack instances for one configuration.
pub struct Prepared {
    pub bundle: DatasetBundle,
    pub victim: NGramModel,
    pub surrogate: NGramModel,
    /// MIA-training instances carrying surrogate outputs.
    pub train: Vec<AttackInstance>,
    /// MIA-evaluation instances carrying victim outputs.
    pub eval: Vec<AttackInstance>,
}

impl Prepared {
    pub fn data(&self) -> AttackData<'_> {
        AttackData {
            train: &self.train,
            eval: &self.eval,
            victim: &self.victim,
            surrogate: Some(&self.surrogate),
        }
    }

    pub fn meta(&self, run: &Run) -> RunMeta {
        RunMeta {
            victim_id: run.config.victim.id.clone(),
            surrogate_id: run.config.surrogate.id.clone(),
            epochs: run.config.victim.passes as usize,
            known_ratio: run.config.split.known_ratio,
        }
    }
}

pub fn prepare(run: &Run) -> Result<Prepared> {
    let c = &run.config;
    let (_, bundle) = run.bundle()?;
    let victim = train_model(&c.victim, &bundle.victim_train, c.victim.passes)?;
    let surrogate = train_model(&c.surrogate, &bundle.surrogate_train, c.surrogate.passes)?;
    let train = build_instances(&bundle.mia_train, &surrogate, &c.decoding.surrogate);
    let eval = build_instances(&bundle.mia_eval, &victim, &c.decoding.victim);
    Ok(Prepared {
        bundle,
        victim,
        surrogate,
        train,
        eval,
    })
}

fn write_summary(run: &Run, name: &str, records: &[ExperimentRecord]) -> Result<PathBuf> {
    run.write_csv(name, |buf| Ok(write_records_csv(buf, records)?))
}

/// Runs every selected attack under every seed. Writes per-seed records to
/// `results.csv`, seed means to `summary.csv`, plus ROC curves and
/// per-instance scores for each (attack, seed).
pub fn cmd_attack(run: &Run) -> Result<Vec<PathBuf>> {
    let prep = run.pool()?.install(|| prepare(run))?;
    run.ensure_out_dir()?;
    let attacks = run.config.attack_list();
    let meta = prep.meta(run);
    let experiments = run.pool()?.install(|| {
        attacks
            .par_iter()
            .map(|&k| evaluate(k, prep.data(), &run.config.attack, &run.config.seeds, &meta))
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;

    let mut written = Vec::new();
    let mut per_seed = Vec::new();
    let mut means = Vec::new();
    for (kind, exp) in attacks.iter().zip(&experiments) {
        let (last, seeds) = exp.records.split_last().expect("at least one seed");
        per_seed.extend_from_slice(seeds);
        means.push(last.clone());
        for r in &exp.runs {
            written.push(run.write_csv(&roc_file(*kind, r.seed), |buf| Ok(r.roc.write_csv(buf)?))?);
            written.push(run.write_csv(&scores_file(*kind, r.seed), |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record(["instance_id", "score", "predicted", "label"])?;
                for ((inst, s), p) in prep.eval.iter().zip(&r.scores).zip(&r.predicted) {
                    let label = inst.label.unwrap_or(false);
                    w.write_record([
                        inst.id.clone(),
                        s.to_string(),
                        (*p as u8).to_string(),
                        (label as u8).to_string(),
                    ])?;
                }
                w.flush().map_err(csv::Error::from)?;
                Ok(())
            })?);
        }
    }
    written.push(write_summary(run, RESULTS_FILE, &per_seed)?);
    written.push(write_summary(run, SUMMARY_FILE, &means)?);

    written.push(run.write_csv("attack_features.csv", |buf| {
        let rows: Vec<_> = prep
            .eval
            .iter()
            .map(|i| (i.id.clone(), extract_features(i), i.label.unwrap_or(false)))
            .collect();
        Ok(write_feature_csv(buf, &rows)?)
    })?);
    for kind in &attacks {
        if let AttackKind::Ranking(metric) = kind {
            let scores = prep
                .eval
                .iter()
                .map(|i| metric_score(*metric, &prep.victim, Some(&prep.surrogate), i))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let predicted = rank_and_cutoff(&scores, run.config.attack.cutoff)?;
            let ids: Vec<String> = prep.eval.iter().map(|i| i.id.clone()).collect();
            let labels: Vec<bool> = prep.eval.iter().map(|i| i.label.unwrap_or(false)).collect();
            written.push(run.write_csv(&format!("ranking_{metric}.csv"), |buf| {
                Ok(write_ranking_csv(buf, &ids, &scores, &predicted, &labels)?)
            })?);
        }
    }
    Ok(written)
}

/// One cell of the factorial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub victim: ModelSpec,
    pub epochs: u32,
    pub surrogate: ModelSpec,
    pub ratio: f64,
}

/// Cells in victim, epochs, surrogate, ratio order.
pub fn grid_cells(grid: &GridConfig) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for v in &grid.victims {
        for &e in &grid.epochs {
            for s in &grid.surrogates {
                for &r in &grid.ratios {
                    cells.push(GridCell {
                        victim: v.clone(),
                        epochs: e,
                        surrogate: s.clone(),
                        ratio: r,
                    });
                }
            }
        }
    }
    cells
}

fn run_cell(
    run: &Run,
    cell: &GridCell,
    train: &[Example],
    test: &[Example],
) -> Result<Vec<ExperimentRecord>> {
    let c = &run.config;
    let plan = run.plan(train, test, cell.ratio)?;
    let bundle = materialize(&plan, train, test)?;
    let victim = train_model(&cell.victim, &bundle.victim_train, cell.epochs)?;
    let surrogate = train_model(
        &cell.surrogate,
        &bundle.surrogate_train,
        cell.surrogate.passes,
    )?;
    let train_i = build_instances(&bundle.mia_train, &surrogate, &c.decoding.surrogate);
    let eval_i = build_instances(&bundle.mia_eval, &victim, &c.decoding.victim);
    let data = AttackData {
        train: &train_i,
        eval: &eval_i,
        victim: &victim,
        surrogate: Some(&surrogate),
    };
    let meta = RunMeta {
        victim_id: cell.victim.id.clone(),
        surrogate_id: cell.surrogate.id.clone(),
        epochs: cell.epochs as usize,
        known_ratio: cell.ratio,
    };
    let mut exp = evaluate(c.grid.attack, data, &c.attack, &c.seeds, &meta)?;
    exp.records.pop();
    Ok(exp.records)
}

/// Runs the full-factorial grid and its ANOVA.
pub fn cmd_grid(run: &Run) -> Result<Vec<PathBuf>> {
    let g = &run.config.grid;
    let cells = grid_cells(g);
    if cells.is_empty() {
        return Err(PipelineError::Config("grid has no cells".into()));
    }
    let (train, test) = run.load_examples()?;
    let per_cell = run.pool()?.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell(run, cell, &train, &test))
            .collect::<Result<Vec<_>>>()
    })?;
    let records: Vec<ExperimentRecord> = per_cell.into_iter().flatten().collect();
    run.ensure_out_dir()?;
    let mut written = vec![write_summary(run, RESULTS_FILE, &records)?];

    let varying: Vec<Factor> = [
        (Factor::Victim, g.victims.len()),
        (Factor::Epochs, g.epochs.len()),
        (Factor::Surrogate, g.surrogates.len()),
        (Factor::Ratio, g.ratios.len()),
    ]
    .into_iter()
    .filter(|&(_, n)| n > 1)
    .map(|(f, _)| f)
    .collect();
    if !varying.is_empty() {
        let table = factorial_anova(&records, g.response, &varying, g.max_interaction)?;
        written.push(run.write_csv(ANOVA_FILE, |buf| Ok(table.write_csv(buf)?))?);
    }
    Ok(written)
}

/// One row of the defense sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseRow {
    /// `beam`, `vary-temp` or `vary-k`.
    pub variation: String,
    pub k: Option<usize>,
    pub temperature: Option<f64>,
    /// Mean smoothed BLEU of victim outputs against the ground truth.
    pub bleu: f64,
    pub power: f64,
    pub error: f64,
    pub auc: f64,
}

/// Victim decoders swept by `defend`, labelled by variation.
pub fn defense_decoders(run: &Run) -> Vec<(String, DecodingConfig)> {
    let d = &run.config.defense;
    let base = run.config.decoding.victim;
    let topk = |k: usize, t: f64| DecodingConfig {
        strategy: crate::lm::Strategy::TopK,
        topk_k: k,
        temperature: t,
        ..base
    };
    let mut out = Vec::new();
    if d.include_beam {
        let beam = DecodingConfig {
            strategy: crate::lm::Strategy::Beam,
            ..base
        };
        out.push(("beam".to_owned(), beam));
    }
    let mut group = |label: &str, pairs: Vec<(usize, f64)>| {
        let mut seen: Vec<(usize, f64)> = Vec::new();
        for (k, t) in pairs {
            if !seen.contains(&(k, t)) {
                seen.push((k, t));
                out.push((label.to_owned(), topk(k, t)));
            }
        }
    };
    group(
        "vary-temp",
        d.temperatures.iter().map(|&t| (d.fixed_k, t)).collect(),
    );
    group(
        "vary-k",
        d.ks.iter().map(|&k| (k, d.fixed_temperature)).collect(),
    );
    out
}

/// Sweeps the victim's decoding strategy and measures both the victim's
/// utility and the attack's success.
pub fn cmd_defend(run: &Run) -> Result<Vec<PathBuf>> {
    let c = &run.config;
    let pool = run.pool()?;
    let (_, bundle) = run.bundle()?;
    let victim = train_model(&c.victim, &bundle.victim_train, c.victim.passes)?;
    let surrogate = train_model(&c.surrogate, &bundle.surrogate_train, c.surrogate.passes)?;
    let train_i =
        pool.install(|| build_instances(&bundle.mia_train, &surrogate, &c.decoding.surrogate));
    let fitted = pool.install(|| {
        c.seeds
            .par_iter()
            .map(|&s| FittedAttack::fit(c.defense.attack, &train_i, &c.attack, s))
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;
    let mut rows = Vec::new();
    for (variation, dec) in defense_decoders(run) {
        let eval_i = pool.install(|| build_instances(&bundle.mia_eval, &victim, &dec));
        let bleu = eval_i
            .iter()
            .map(|i| smoothed_bleu(&i.output, &i.truth))
            .sum::<f64>()
            / eval_i.len() as f64;
        let meta = RunMeta::default();
        let records = fitted
            .iter()
            .zip(&c.seeds)
            .map(|(f, &s)| {
                let r = f.evaluate(s, &eval_i, &victim, Some(&surrogate))?;
                Ok(ExperimentRecord {
                    victim_id: meta.victim_id.clone(),
                    surrogate_id: meta.surrogate_id.clone(),
                    epochs: 0,
                    known_ratio: 0.0,
                    attack: c.defense.attack,
                    seed: Some(s),
                    power: r.power,
                    error: r.error,
                    auc: r.auc,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = seed_mean(&records)?;
        let is_beam = variation == "beam";
        rows.push(DefenseRow {
            variation,
            k: (!is_beam).then_some(dec.topk_k),
            temperature: (!is_beam).then_some(dec.temperature),
            bleu,
            power: m.power,
            error: m.error,
            auc: m.auc,
        });
    }
    run.ensure_out_dir()?;
    let path = run.write_csv(DEFENSE_FILE, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["variation", "k", "temp", "bleu", "power", "error", "auc"])?;
        for r in &rows {
            w.write_record([
                r.variation.clone(),
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                r.temperature.map(|t| t.to_string()).unwrap_or_default(),
                r.bleu.to_string(),
                r.power.to_string(),
                r.error.to_string(),
                r.auc.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    })?;
    Ok(vec![path])
}

fn read_csv_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.to_owned()));
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    Ok(r.records().collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Compares victim-side features of evaluation members the attack caught
/// against those it missed.
pub fn cmd_features(run: &Run) -> Result<Vec<PathBuf>> {
    let c = &run.config;
    let seed = c.features.seed.unwrap_or(c.seeds[0]);
    let scores = read_csv_rows(&run.path(&scores_file(c.features.attack, seed)))?;
    let predicted: BTreeMap<String, bool> = scores
        .iter()
        .map(|r| (r[0].to_owned(), &r[2] == "1"))
        .collect();
    let prep = run.pool()?.install(|| prepare(run))?;
    let keywords = match &c.features.keywords {
        Some(k) => k.iter().cloned().collect(),
        None => java_keywords(),
    };
    let rows = prep
        .eval
        .iter()
        .filter(|i| i.label == Some(true))
        .map(|i| {
            let hit = *predicted.get(&i.id).ok_or_else(|| {
                PipelineError::StaleSplit(run.path(&scores_file(c.features.attack, seed)))
            })?;
            Ok(extract_rq3_features(i, &prep.victim, &keywords, hit)?)
        })
        .collect::<Result<Vec<FeatureRow>>>()?;
    let (success, fail): (Vec<FeatureRow>, Vec<FeatureRow>) =
        rows.iter().cloned().partition(|r| r.attack_success);
    if success.is_empty() {
        return Err(PipelineError::EmptyGroup("successfully attacked"));
    }
    if fail.is_empty() {
        return Err(PipelineError::EmptyGroup("unsuccessfully attacked"));
    }
    let report = compare_groups(&success, &fail)?;
    let mut written =
        vec![run.write_csv(FEATURES_FILE, |buf| Ok(write_comparison_csv(buf, &report)?))?];
    written.push(run.write_csv(FEATURE_ROWS_FILE, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "instance_id",
            "input_length",
            "output_length",
            "perplexity",
            "edit_distance",
            "bleu",
            "variable_count",
            "attack_success",
        ])?;
        for r in &rows {
            w.write_record([
                r.instance_id.clone(),
                r.input_length.to_string(),
                r.output_length.to_string(),
                r.perplexity.to_string(),
                r.edit_distance.to_string(),
                r.bleu.to_string(),
                r.variable_count.to_string(),
                (r.attack_success as u8).to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    })?);
    Ok(written)
}

fn parse_record(r: &csv::StringRecord) -> Result<ExperimentRecord> {
    let bad = |what: &str| PipelineError::Config(format!("results row has a bad {what}: {r:?}"));
    if r.len() != RECORD_HEADER.len() {
        return Err(bad("width"));
    }
    let num = |i: usize, what: &str| r[i].parse::<f64>().map_err(|_| bad(what));
    Ok(ExperimentRecord {
        victim_id: r[0].to_owned(),
        surrogate_id: r[1].to_owned(),
        epochs: r[2].parse().map_err(|_| bad("epochs"))?,
        known_ratio: num(3, "known_ratio")?,
        attack: r[4].parse()?,
        seed: match &r[5] {
            "mean" => None,
            s => Some(s.parse().map_err(|_| bad("seed"))?),
        },
        power: num(6, "power")?,
        error: num(7, "error")?,
        auc: num(8, "auc")?,
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

fn factor_level(r: &ExperimentRecord, f: Factor) -> String {
    match f {
        Factor::Victim => r.victim_id.clone(),
        Factor::Surrogate => r.surrogate_id.clone(),
        Factor::Epochs => r.epochs.to_string(),
        Factor::Ratio => r.known_ratio.to_string(),
    }
}

/// Summarizes `results.csv`: seed means and standard deviations per
/// configuration, and paired Wilcoxon signed-rank tests on power between
/// every two levels of each factor, Bonferroni-adjusted.
pub fn cmd_report(run: &Run) -> Result<Vec<PathBuf>> {
    let records = read_csv_rows(&run.path(RESULTS_FILE))?
        .iter()
        .map(parse_record)
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<ExperimentRecord> = records.into_iter().filter(|r| r.seed.is_some()).collect();

    let mut groups: BTreeMap<(String, String, usize, String, String), Vec<&ExperimentRecord>> =
        BTreeMap::new();
    for r in &records {
        let key = (
            r.victim_id.clone(),
            r.surrogate_id.clone(),
            r.epochs,
            r.known_ratio.to_string(),
            r.attack.to_string(),
        );
        groups.entry(key).or_default().push(r);
    }
    let mut written = vec![run.write_csv(REPORT_FILE, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "victim_id",
            "surrogate_id",
            "epochs",
            "known_ratio",
            "attack",
            "runs",
            "power_mean",
            "power_sd",
            "error_mean",
            "error_sd",
            "auc_mean",
            "auc_sd",
        ])?;
        for ((v, s, e, k, a), rs) in &groups {
            let stat = |f: fn(&ExperimentRecord) -> f64| {
                mean_sd(&rs.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let (pm, ps) = stat(|r| r.power);
            let (em, es) = stat(|r| r.error);
            let (am, as_) = stat(|r| r.auc);
            w.write_record([
                v.clone(),
                s.clone(),
                e.to_string(),
                k.clone(),
                a.clone(),
                rs.len().to_string(),
                pm.to_string(),
                ps.to_string(),
                em.to_string(),
                es.to_string(),
                am.to_string(),
                as_.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    })?];

    // (factor, level a, level b, n pairs, W+, p, exact)
    let mut tests: Vec<(Factor, String, String, usize, f64, f64, bool)> = Vec::new();
    for f in Factor::ALL {
        let mut levels: Vec<String> = records.iter().map(|r| factor_level(r, f)).collect();
        levels.sort();
        levels.dedup();
        for (i, la) in levels.iter().enumerate() {
            for lb in &levels[i + 1..] {
                // pair runs that agree on every other factor, the attack and the seed
                let key = |r: &ExperimentRecord| {
                    let mut k: Vec<String> = Factor::ALL
                        .iter()
                        .filter(|&&g| g != f)
                        .map(|&g| factor_level(r, g))
                        .collect();
                    k.push(r.attack.to_string());
                    k.push(r.seed.map(|s| s.to_string()).unwrap_or_default());
                    k
                };
                let side = |l: &String| -> BTreeMap<Vec<String>, f64> {
                    records
                        .iter()
                        .filter(|r| &factor_level(r, f) == l)
                        .map(|r| (key(r), r.power))
                        .collect()
                };
                let (a, b) = (side(la), side(lb));
                let (xs, ys): (Vec<f64>, Vec<f64>) = a
                    .iter()
                    .filter_map(|(k, &x)| b.get(k).map(|&y| (x, y)))
                    .unzip();
                if xs.is_empty() {
                    continue;
                }
                match wilcoxon_signed_rank(&xs, &ys) {
                    Ok(t) => tests.push((
                        f,
                        la.clone(),
                        lb.clone(),
                        xs.len(),
                        t.statistic,
                        t.p_value,
                        t.exact,
                    )),
                    Err(StatsError::AllZeroDifferences) => {
                        tests.push((f, la.clone(), lb.clone(), xs.len(), 0.0, 1.0, true))
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    let adjusted = bonferroni(&tests.iter().map(|t| t.5).collect::<Vec<_>>())?;
    written.push(run.write_csv(WILCOXON_FILE, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "factor",
            "level_a",
            "level_b",
            "pairs",
            "statistic",
            "p_value",
            "p_adjusted",
            "exact",
        ])?;
        for (t, adj) in tests.iter().zip(&adjusted) {
            w.write_record([
                t.0.to_string(),
                t.1.clone(),
                t.2.clone(),
                t.3.to_string(),
                t.4.to_string(),
                t.5.to_string(),
                adj.to_string(),
                t.6.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    })?);
    Ok(written)
}
