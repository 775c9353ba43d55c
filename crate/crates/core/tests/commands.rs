use std::fs;
use std::path::Path;

use mia_lab::eval::AttackKind;
use mia_lab::pipeline::{self, PipelineError, Run, RunConfig};

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    r.records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

fn fast(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        out_dir: dir.to_owned(),
        seeds: vec![1, 2],
        ..Default::default()
    };
    cfg.attack.gotcha.epochs = 20;
    cfg
}

#[test]
fn attack_writes_one_row_per_variant_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        ablations: true,
        ..fast(dir.path())
    };
    let run = Run::new(cfg).unwrap();
    pipeline::cmd_attack(&run).unwrap();
    let results = rows(&dir.path().join(pipeline::RESULTS_FILE));
    assert_eq!(results.len(), (9 + 3) * 2);
    assert!(results.iter().all(|r| r[5] != "mean"));
    assert_eq!(rows(&dir.path().join(pipeline::SUMMARY_FILE)).len(), 12);
    for kind in AttackKind::standard() {
        assert!(
            dir.path().join(pipeline::roc_file(kind, 2)).exists(),
            "{kind}"
        );
    }
    let first = fs::read_to_string(dir.path().join(pipeline::RESULTS_FILE)).unwrap();
    assert!(first.starts_with(&format!("# config_sha256={}\n", run.config_hash())));
}

#[test]
fn grid_and_anova_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fast(dir.path());
    cfg.attack.gotcha.epochs = 5;
    let run = Run::new(cfg).unwrap();
    pipeline::cmd_grid(&run).unwrap();
    assert_eq!(rows(&dir.path().join(pipeline::RESULTS_FILE)).len(), 16 * 2);
    let anova = rows(&dir.path().join(pipeline::ANOVA_FILE));
    // 4 main effects, 6 two-way and 4 three-way terms, residual, total
    assert_eq!(anova.len(), 4 + 6 + 4 + 2);
    assert_eq!(anova[anova.len() - 1][0], "total");

    pipeline::cmd_report(&run).unwrap();
    let report = rows(&dir.path().join(pipeline::REPORT_FILE));
    assert_eq!(report.len(), 16);
    assert!(report.iter().all(|r| r[5] == "2"));
    let tests = rows(&dir.path().join(pipeline::WILCOXON_FILE));
    assert_eq!(tests.len(), 4);
    assert!(tests.iter().all(|r| r[3] == "16"));
}

#[test]
fn defense_rows_follow_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(fast(dir.path())).unwrap();
    pipeline::cmd_defend(&run).unwrap();
    let out = rows(&dir.path().join(pipeline::DEFENSE_FILE));
    assert_eq!(out.len(), 8);
    assert_eq!(out[0][..3], ["beam", "", ""]);
    assert!(out[1..]
        .iter()
        .all(|r| !r[1].is_empty() && !r[2].is_empty()));
    for r in &out {
        let bleu: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&bleu));
    }
}

#[test]
fn features_report_six_rows_and_reject_degenerate_groups() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(fast(dir.path())).unwrap();
    assert!(matches!(
        pipeline::cmd_features(&run),
        Err(PipelineError::MissingArtifact(_))
    ));
    pipeline::cmd_attack(&run).unwrap();
    pipeline::cmd_features(&run).unwrap();
    let report = rows(&dir.path().join(pipeline::FEATURES_FILE));
    assert_eq!(report.len(), 6);
    let first = fs::read(dir.path().join(pipeline::FEATURES_FILE)).unwrap();
    pipeline::cmd_features(&run).unwrap();
    assert_eq!(
        fs::read(dir.path().join(pipeline::FEATURES_FILE)).unwrap(),
        first
    );

    let other = tempfile::tempdir().unwrap();
    let mut cfg = fast(other.path());
    cfg.attack.threshold = 0.0;
    let all_hit = Run::new(cfg).unwrap();
    pipeline::cmd_attack(&all_hit).unwrap();
    assert!(matches!(
        pipeline::cmd_features(&all_hit),
        Err(PipelineError::EmptyGroup(_))
    ));
}

#[test]
fn missing_corpus_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = fast(&out);
    cfg.corpus.train = Some(dir.path().join("nope.jsonl"));
    cfg.corpus.test = Some(dir.path().join("nope.jsonl"));
    assert!(matches!(Run::new(cfg), Err(PipelineError::Config(_))));
    assert!(!out.exists());
}
