//! `vasekit`: batch front end for the caption reward and evaluation engine.
//!
//! Exit codes: 0 success, 1 data errors (bad records are reported and
//! skipped), 2 usage or configuration errors.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{read_env_url, AppConfig, ProviderKind};
use crate::io::UsageError;

#[derive(Parser)]
#[command(
    name = "vasekit",
    version,
    about = "Caption rewards, advantages, evaluation and curation replay for vase datasets"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Print the resolved config as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Worker threads for per-record work.
    #[arg(long, global = true, default_value_t = 1, value_parser = commands::positive)]
    jobs: usize,
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    /// Embedding service base URL (overrides the environment).
    #[arg(long, global = true, value_name = "URL")]
    scorer_url: Option<String>,
    /// Bucket count of the built-in embedding.
    #[arg(long, global = true, value_parser = commands::positive)]
    embedding_dim: Option<usize>,
    /// Extraction lexicon JSON replacing the built-in one.
    #[arg(long, global = true, value_name = "PATH")]
    lexicon: Option<PathBuf>,
}

impl GlobalArgs {
    fn apply(&self, cfg: &mut AppConfig) {
        if let Some(p) = self.provider {
            cfg.provider = p;
        }
        if let Some(u) = &self.scorer_url {
            cfg.scorer.base_url = u.clone();
        }
        if let Some(d) = self.embedding_dim {
            cfg.embedding_dimension = d;
        }
        if let Some(l) = &self.lexicon {
            cfg.lexicon = Some(l.clone());
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score rollouts against ground-truth manifest entries.
    Reward(commands::reward::RewardArgs),
    /// Group-normalize rewards into advantages.
    Advantage(commands::advantage::AdvantageArgs),
    /// Compute retrieval, lexical and per-dimension metrics for predictions.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Replay curation stages over per-image scores.
    Filter(commands::filter::FilterArgs),
    /// Assign manifest entries to train/val/test.
    Split(commands::split::SplitArgs),
    /// Check a manifest and print its findings and counts.
    Validate(commands::validate::ValidateArgs),
    /// Average an expert rating table and rank the methods.
    HumanEval(commands::human_eval::HumanEvalArgs),
    /// Generate a deterministic score corpus with the published stage counts.
    SynthScores(commands::synth::SynthArgs),
}

fn resolve(cli: &Cli) -> anyhow::Result<AppConfig> {
    let mut cfg = AppConfig::load(cli.global.config.as_deref(), read_env_url())?;
    cli.global.apply(&mut cfg);
    match &cli.command {
        Command::Reward(a) => a.apply(&mut cfg),
        Command::Advantage(a) => a.apply(&mut cfg),
        Command::Filter(a) => a.apply(&mut cfg),
        Command::Split(a) => a.apply(&mut cfg),
        Command::Evaluate(_) | Command::Validate(_) | Command::HumanEval(_) | Command::SynthScores(_) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<usize> {
    let cfg = resolve(&cli)?;
    if cli.global.print_config {
        println!("{}", cfg.to_pretty_json());
        return Ok(0);
    }
    let jobs = cli.global.jobs;
    match cli.command {
        Command::Reward(a) => commands::reward::run(&a, &cfg, jobs),
        Command::Advantage(a) => commands::advantage::run(&a, &cfg),
        Command::Evaluate(a) => commands::evaluate::run(&a, &cfg),
        Command::Filter(a) => commands::filter::run(&a, &cfg),
        Command::Split(a) => commands::split::run(&a, &cfg),
        Command::Validate(a) => commands::validate::run(&a),
        Command::HumanEval(a) => commands::human_eval::run(&a),
        Command::SynthScores(a) => commands::synth::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
