use std::collections::HashSet;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use vasekit_core::manifest::load_manifest;
use vasekit_core::metrics::{evaluate_run, EvalReport, Prediction};
use vasekit_core::ENGINE_VERSION;

use super::{build_provider, finite, summary};
use crate::config::AppConfig;
use crate::io::{
    check_distinct, pretty_json, read_jsonl, require_input, required, write_atomic, ErrorLog, RecordError,
};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Predictions JSONL: {"vase_id", "caption", "answers": {question_type: answer}}.
    #[arg(long, value_name = "PATH")]
    predictions: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    targets: Option<PathBuf>,
    /// Report JSON.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Externally computed FID, copied into the report.
    #[arg(long, value_parser = finite)]
    fid: Option<f64>,
    /// Externally computed CLIP score, copied into the report.
    #[arg(long, value_parser = finite)]
    clip_score: Option<f64>,
}

#[derive(Serialize)]
struct Report<'a> {
    engine_version: &'a str,
    config_hash: String,
    provider: &'a str,
    #[serde(flatten)]
    metrics: EvalReport,
}

pub fn run(args: &EvaluateArgs, cfg: &AppConfig) -> anyhow::Result<usize> {
    let preds_path = required(&args.predictions, "--predictions")?;
    let targets_path = required(&args.targets, "--targets")?;
    let out = required(&args.out, "--out")?;
    require_input(preds_path)?;
    require_input(targets_path)?;
    check_distinct(&[preds_path, targets_path], &[out])?;

    let manifest = load_manifest(targets_path)?;
    let provider = build_provider(cfg)?;
    let (preds, mut errors) = read_jsonl::<Prediction>(preds_path)?;
    let total = preds.len() + errors.len();
    let source = preds_path.display().to_string();

    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(preds.len());
    for (line, p) in preds {
        let problem = if manifest.get(&p.vase_id).is_none() {
            Some(format!("unknown vase_id {:?}", p.vase_id))
        } else if !seen.insert(p.vase_id.clone()) {
            Some(format!("second prediction for {:?}", p.vase_id))
        } else {
            None
        };
        match problem {
            Some(message) => errors.push(RecordError { source: source.clone(), line, message }),
            None => kept.push(p),
        }
    }
    let mut log = ErrorLog::default();
    errors.sort_by_key(|e| e.line);
    for e in &errors {
        log.report(e);
    }

    let mut metrics = evaluate_run(&kept, &manifest, &provider)?;
    metrics.fid = args.fid;
    metrics.clip_score = args.clip_score;
    let report = Report { engine_version: ENGINE_VERSION, config_hash: cfg.hash(), provider: provider.tag(), metrics };
    write_atomic(out, &pretty_json(&report)?)?;
    let m = &report.metrics;
    println!(
        "n={} R@1={:.4} R@5={:.4} R@10={:.4} lexical={:.4}",
        m.n_items, m.recall_at[&1], m.recall_at[&5], m.recall_at[&10], m.lexical_similarity
    );
    summary("evaluate", kept.len(), total, "predictions", log.count);
    Ok(log.count)
}
