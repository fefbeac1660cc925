use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use vasekit_core::filter::{
    pipeline_stats, run_pipeline, FilterConfig, GenerationOutcome, RetentionTable, ScoreRecord, StageKind,
};

use super::{finite, summary, unit_interval};
use crate::config::AppConfig;
use crate::io::{check_distinct, jsonl, pretty_json, read_jsonl, required, usage, write_atomic, ErrorLog, RecordError};

#[derive(Args)]
pub struct FilterArgs {
    /// Per-image scores JSONL.
    #[arg(long, value_name = "PATH")]
    scores: Option<PathBuf>,
    /// Comma-separated stages, applied in order.
    #[arg(long, default_value = "quality,fragment,view")]
    stages: String,
    /// Generation outcomes JSONL ({"vase_id", "success"}), needed by the generation stage.
    #[arg(long, value_name = "PATH")]
    generation: Option<PathBuf>,
    /// Retention report JSON.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Records surviving the last stage, as JSONL.
    #[arg(long, value_name = "PATH")]
    survivors: Option<PathBuf>,
    #[arg(long, value_parser = unit_interval)]
    quality_threshold: Option<f64>,
    #[arg(long, value_parser = finite, allow_hyphen_values = true)]
    fragment_margin: Option<f64>,
}

impl FilterArgs {
    pub fn apply(&self, cfg: &mut AppConfig) {
        if let Some(q) = self.quality_threshold {
            cfg.filter.quality_threshold = q;
        }
        if let Some(m) = self.fragment_margin {
            cfg.filter.fragment_margin = m;
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    config: &'a FilterConfig,
    #[serde(flatten)]
    table: &'a RetentionTable,
}

fn parse_stages(s: &str) -> anyhow::Result<Vec<StageKind>> {
    let stages = s
        .split(',')
        .map(|p| p.trim().parse::<StageKind>().map_err(|e| usage(format!("--stages: {e}"))))
        .collect::<anyhow::Result<Vec<_>>>()?;
    for (i, s) in stages.iter().enumerate() {
        if stages[..i].contains(s) {
            return Err(usage(format!("--stages: {} listed twice", s.label())));
        }
    }
    Ok(stages)
}

pub fn run(args: &FilterArgs, cfg: &AppConfig) -> anyhow::Result<usize> {
    let scores_path = required(&args.scores, "--scores")?;
    let out = required(&args.out, "--out")?;
    let stages = parse_stages(&args.stages)?;
    let needs_generation = stages.contains(&StageKind::Generation);
    if needs_generation && args.generation.is_none() {
        return Err(usage("the generation stage needs --generation"));
    }
    let mut inputs: Vec<&Path> = vec![scores_path];
    inputs.extend(args.generation.as_deref());
    let mut outputs: Vec<&Path> = vec![out];
    outputs.extend(args.survivors.as_deref());
    check_distinct(&inputs, &outputs)?;

    let source = scores_path.display().to_string();
    let (records, mut errors) = read_jsonl::<ScoreRecord>(scores_path)?;
    let total = records.len() + errors.len();
    let mut valid = Vec::with_capacity(records.len());
    for (line, r) in records {
        match r.validate() {
            Ok(()) => valid.push(r),
            Err(e) => errors.push(RecordError { source: source.clone(), line, message: e.to_string() }),
        }
    }
    let generation = match &args.generation {
        Some(p) if needs_generation => {
            let (outcomes, bad) = read_jsonl::<GenerationOutcome>(p)?;
            errors.extend(bad);
            Some(outcomes.into_iter().map(|(_, o)| o).collect::<Vec<_>>())
        }
        _ => None,
    };
    let mut log = ErrorLog::default();
    for e in &errors {
        log.report(e);
    }

    let outcomes = run_pipeline(&valid, &stages, &cfg.filter, generation.as_deref())?;
    let table = pipeline_stats(&outcomes)?;
    write_atomic(out, &pretty_json(&Report { config: &cfg.filter, table: &table })?)?;
    if let Some(path) = &args.survivors {
        let last = outcomes.last().map(|o| o.kept.as_slice()).unwrap_or_default();
        write_atomic(path, &jsonl(last)?)?;
    }
    print!("{}", table.render());
    summary("filter", valid.len(), total, "score records", log.count);
    Ok(log.count)
}
