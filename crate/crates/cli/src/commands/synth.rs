use std::path::PathBuf;

use clap::Args;
use vasekit_core::filter::synthetic::{generate, CorpusShape};

use crate::io::{check_distinct, jsonl, required, write_atomic};

#[derive(Args)]
pub struct SynthArgs {
    /// Score records JSONL.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Generation outcomes JSONL.
    #[arg(long, value_name = "PATH")]
    generation_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(args: &SynthArgs) -> anyhow::Result<usize> {
    let out = required(&args.out, "--out")?;
    let gen_out = required(&args.generation_out, "--generation-out")?;
    check_distinct(&[], &[out, gen_out])?;
    let corpus = generate(&CorpusShape::published(), args.seed).map_err(anyhow::Error::msg)?;
    write_atomic(out, &jsonl(&corpus.records)?)?;
    write_atomic(gen_out, &jsonl(&corpus.generation)?)?;
    eprintln!("synth-scores: {} records, {} vases", corpus.records.len(), corpus.generation.len());
    Ok(0)
}
