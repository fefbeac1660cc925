use std::fs::File;
use std::path::PathBuf;

use clap::Args;
use vasekit_core::human_eval::read_ratings;

use crate::io::{check_distinct, pretty_json, require_input, required, write_atomic};

#[derive(Args)]
pub struct HumanEvalArgs {
    /// CSV with a header row; first column is the method, the rest one score per expert.
    #[arg(long, value_name = "PATH")]
    ratings: Option<PathBuf>,
    /// Means and ranks as JSON.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

pub fn run(args: &HumanEvalArgs) -> anyhow::Result<usize> {
    let path = required(&args.ratings, "--ratings")?;
    require_input(path)?;
    if let Some(out) = &args.out {
        check_distinct(&[path], &[out])?;
    }
    let methods = read_ratings(File::open(path)?)?;
    let width = methods.iter().map(|m| m.method.len()).max().unwrap_or(0).max("Method".len());
    println!("{:>4}  {:<width$}  {:>4}  {:>7}", "Rank", "Method", "Mean", "Experts");
    for m in &methods {
        println!("{:>4}  {:<width$}  {:>4}  {:>7}", m.rank, m.method, m.mean_display(), m.scores.len());
    }
    if let Some(out) = &args.out {
        write_atomic(out, &pretty_json(&methods)?)?;
    }
    Ok(0)
}
