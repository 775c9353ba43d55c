use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mia_lab::eval::AttackKind;
use mia_lab::pipeline::{self, Run, RunConfig};

/// Membership inference experiments against code completion models.
#[derive(Parser)]
#[command(name = "mia-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file. Missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Overrides the config and MIA_LAB_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set split.known_ratio=0.2`. The value is
    /// parsed as JSON, falling back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', global = true)]
    seeds: Vec<u64>,
    /// Comma-separated attacks, e.g. `gotcha,perplexity,knn`.
    #[arg(long, value_delimiter = ',', value_parser = parse_attack, global = true)]
    attacks: Vec<AttackKind>,
    /// Also run the three single-channel GOTCHA ablations.
    #[arg(long, global = true)]
    ablations: bool,
    /// Worker threads. Defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the split plan and the four example sets.
    Split,
    /// Train victim and surrogate, then run the selected attacks.
    Attack,
    /// Run the factorial grid and its ANOVA.
    Grid,
    /// Sweep the victim's decoding strategy.
    Defend,
    /// Compare features of caught and missed members.
    Features,
    /// Summarize results.csv with seed statistics and Wilcoxon tests.
    Report,
}

fn parse_attack(s: &str) -> Result<AttackKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if !cli.seeds.is_empty() {
        cfg.seeds = cli.seeds.clone();
    }
    if !cli.attacks.is_empty() {
        cfg.attacks = cli.attacks.clone();
    }
    if cli.ablations {
        cfg.ablations = true;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<Vec<PathBuf>> {
    let run = Run::new(config(cli)?).context("invalid configuration")?;
    let written = match cli.command {
        Command::Split => pipeline::cmd_split(&run),
        Command::Attack => pipeline::cmd_attack(&run),
        Command::Grid => pipeline::cmd_grid(&run),
        Command::Defend => pipeline::cmd_defend(&run),
        Command::Features => pipeline::cmd_features(&run),
        Command::Report => pipeline::cmd_report(&run),
    }?;
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
