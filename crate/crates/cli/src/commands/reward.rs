use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vasekit_core::dimension::DimensionSlots;
use vasekit_core::extract::target_slots_from_qa;
use vasekit_core::manifest::load_manifest;
use vasekit_core::reward::{DimensionWeights, RewardEngine, RewardResult};

use super::{build_provider, fixed_list, non_negative, positive, summary, unit_interval};
use crate::config::{load_lexicon, AppConfig};
use crate::io::{check_distinct, jsonl, read_jsonl, require_input, required, write_atomic, ErrorLog, RecordError};

#[derive(Args)]
pub struct RewardArgs {
    /// Rollouts JSONL: {"group_id", "vase_id", "generated"} per line.
    #[arg(long, value_name = "PATH")]
    rollouts: Option<PathBuf>,
    /// Manifest JSONL holding the ground truth.
    #[arg(long, value_name = "PATH")]
    targets: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_parser = unit_interval)]
    tau: Option<f64>,
    /// Six dimension weights: fabric,technique,shape,dating,decoration,attribution.
    #[arg(long, value_parser = fixed_list::<6>, allow_hyphen_values = true)]
    weights: Option<[f64; 6]>,
    #[arg(long, value_parser = non_negative)]
    alpha_length: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    alpha_repetition: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    alpha_irrelevant: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    beta: Option<f64>,
    #[arg(long, value_parser = positive)]
    min_tokens: Option<usize>,
    #[arg(long, value_parser = positive)]
    max_tokens: Option<usize>,
    #[arg(long, value_parser = unit_interval)]
    irrelevance_threshold: Option<f64>,
}

impl RewardArgs {
    pub fn apply(&self, cfg: &mut AppConfig) {
        let r = &mut cfg.reward;
        if let Some(w) = self.weights {
            r.weights = DimensionWeights::from_array(w);
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { r.$field = v; } )* };
        }
        set!(
            tau,
            alpha_length,
            alpha_repetition,
            alpha_irrelevant,
            beta,
            min_tokens,
            max_tokens,
            irrelevance_threshold
        );
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Rollout {
    group_id: String,
    vase_id: String,
    generated: String,
}

#[derive(Serialize)]
struct Scored<'a> {
    group_id: &'a str,
    vase_id: &'a str,
    generated: &'a str,
    #[serde(flatten)]
    result: RewardResult,
}

pub fn run(args: &RewardArgs, cfg: &AppConfig, jobs: usize) -> anyhow::Result<usize> {
    let rollouts_path = required(&args.rollouts, "--rollouts")?;
    let targets_path = required(&args.targets, "--targets")?;
    let out = required(&args.out, "--out")?;
    require_input(rollouts_path)?;
    require_input(targets_path)?;
    check_distinct(&[rollouts_path, targets_path], &[out])?;

    let manifest = load_manifest(targets_path)?;
    let engine = RewardEngine::new(cfg.reward, load_lexicon(cfg)?, build_provider(cfg)?)?;
    let (rollouts, bad) = read_jsonl::<Rollout>(rollouts_path)?;
    let source = rollouts_path.display().to_string();

    let mut targets: HashMap<&str, Result<(DimensionSlots, &str), String>> = HashMap::new();
    for r in &rollouts {
        let id = r.1.vase_id.as_str();
        if targets.contains_key(id) {
            continue;
        }
        let t = match manifest.get(id) {
            None => Err(format!("unknown vase_id {id:?}")),
            Some(e) => target_slots_from_qa(e).map(|s| (s, e.caption.as_str())).map_err(|e| e.to_string()),
        };
        targets.insert(id, t);
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("starting worker pool")?;
    let scored: Vec<Result<Scored, RecordError>> = pool.install(|| {
        rollouts
            .par_iter()
            .map(|(line, r)| {
                let fail = |message: String| RecordError { source: source.clone(), line: *line, message };
                let (slots, caption) = targets[r.vase_id.as_str()].as_ref().map_err(|e| fail(e.clone()))?;
                let result = engine.score(&r.generated, slots, caption).map_err(|e| fail(e.to_string()))?;
                Ok(Scored { group_id: &r.group_id, vase_id: &r.vase_id, generated: &r.generated, result })
            })
            .collect()
    });

    let mut log = ErrorLog::default();
    let mut errors: Vec<RecordError> = bad;
    let mut good = Vec::with_capacity(scored.len());
    for s in scored {
        match s {
            Ok(v) => good.push(v),
            Err(e) => errors.push(e),
        }
    }
    errors.sort_by_key(|e| e.line);
    for e in &errors {
        log.report(e);
    }
    write_atomic(out, &jsonl(&good)?)?;
    summary("reward", good.len(), good.len() + log.count, "rollouts", log.count);
    Ok(log.count)
}
