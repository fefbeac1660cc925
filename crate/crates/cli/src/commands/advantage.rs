use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use serde_json::{Map, Value};
use vasekit_core::advantage::group_advantages;

use super::{non_negative, positive, summary};
use crate::config::AppConfig;
use crate::io::{check_distinct, jsonl, read_jsonl, required, write_atomic, ErrorLog, RecordError};

#[derive(Args)]
pub struct AdvantageArgs {
    /// JSONL with at least "group_id" and "reward" per line, e.g. `reward` output.
    #[arg(long, value_name = "PATH")]
    rewards: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Reject groups that do not have exactly this many rollouts.
    #[arg(long, value_parser = positive)]
    group_size: Option<usize>,
    /// Groups with reward std at or below this get zero advantages.
    #[arg(long, value_parser = non_negative)]
    epsilon: Option<f64>,
}

impl AdvantageArgs {
    pub fn apply(&self, cfg: &mut AppConfig) {
        if let Some(e) = self.epsilon {
            cfg.advantage.epsilon = e;
        }
    }
}

struct Row {
    line: usize,
    group: String,
    reward: f64,
    record: Map<String, Value>,
}

fn parse_row(line: usize, record: Map<String, Value>) -> Result<Row, String> {
    let group = match record.get("group_id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err("missing string \"group_id\"".into()),
    };
    let reward =
        record.get("reward").and_then(Value::as_f64).filter(|r| r.is_finite()).ok_or("missing numeric \"reward\"")?;
    Ok(Row { line, group, reward, record })
}

pub fn run(args: &AdvantageArgs, cfg: &AppConfig) -> anyhow::Result<usize> {
    let input = required(&args.rewards, "--rewards")?;
    let out = required(&args.out, "--out")?;
    check_distinct(&[input], &[out])?;
    let source = input.display().to_string();
    let (records, bad) = read_jsonl::<Map<String, Value>>(input)?;
    let total = records.len() + bad.len();

    let mut errors = bad;
    let mut rows = Vec::with_capacity(records.len());
    for (line, rec) in records {
        match parse_row(line, rec) {
            Ok(r) => rows.push(r),
            Err(message) => errors.push(RecordError { source: source.clone(), line, message }),
        }
    }

    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.group.as_str()).or_default().push(i);
    }
    let mut advantage: Vec<Option<(f64, f64, f64)>> = vec![None; rows.len()];
    for (group, members) in &groups {
        if let Some(want) = args.group_size {
            if members.len() != want {
                for &m in members {
                    errors.push(RecordError {
                        source: source.clone(),
                        line: rows[m].line,
                        message: format!("group {group:?} has {} rollouts, expected {want}", members.len()),
                    });
                }
                continue;
            }
        }
        let rewards: Vec<f64> = members.iter().map(|&m| rows[m].reward).collect();
        let result = group_advantages(&rewards, cfg.advantage.epsilon)?;
        for (k, &m) in members.iter().enumerate() {
            advantage[m] = Some((result.advantages[k], result.mean, result.std));
        }
    }

    let output: Vec<Map<String, Value>> = rows
        .into_iter()
        .zip(advantage)
        .filter_map(|(mut row, adv)| {
            let (a, mean, std) = adv?;
            row.record.insert("advantage".into(), a.into());
            row.record.insert("group_mean".into(), mean.into());
            row.record.insert("group_std".into(), std.into());
            Some(row.record)
        })
        .collect();

    let mut log = ErrorLog::default();
    errors.sort_by_key(|e| e.line);
    for e in &errors {
        log.report(e);
    }
    write_atomic(out, &jsonl(&output)?)?;
    summary("advantage", output.len(), total, "records", log.count);
    Ok(log.count)
}
