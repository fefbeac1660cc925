//! Three-stage image curation replayed over precomputed scores, plus the
//! retention table summarizing it.
//!
//! Stages are pure partitions of their input: every record lands in exactly
//! one of `kept` / `rejected`, and both keep the input order.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod synthetic;

pub const DEFAULT_QUALITY_THRESHOLD: f64 = 0.5;
pub const DEFAULT_FRAGMENT_MARGIN: f64 = 0.1;
/// Slack on the inclusive fragment margin so 0.3 - 0.2 counts as 0.1.
pub const MARGIN_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("view group is empty")]
    EmptyGroup,
    #[error("view group mixes vases {0:?} and {1:?}")]
    MixedGroup(String, String),
    #[error("stage {stage} does not consume the output of {previous}")]
    ChainMismatch { stage: String, previous: String },
    #[error("generation outcome for unknown vase {0:?}")]
    UnknownGenerationVase(String),
    #[error("stage {0} listed twice")]
    DuplicateStage(StageKind),
    #[error("no stages to summarize")]
    NoStages,
    #[error("generation stage requested without generation outcomes")]
    MissingGenerationOutcomes,
    #[error("record {image_id}: {reason}")]
    InvalidRecord { image_id: String, reason: String },
}

/// Externally computed scores for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub image_id: String,
    pub vase_id: String,
    /// Quality classifier confidence that the image is usable.
    pub quality_prob: f64,
    /// Similarity to a complete-vase prompt.
    pub sim_complete: f64,
    /// Similarity to a fragment prompt.
    pub sim_fragment: f64,
    /// Similarity to the descriptive view prompt.
    pub sim_descriptive: f64,
}

impl ScoreRecord {
    pub fn validate(&self) -> Result<(), FilterError> {
        let bad = |reason: String| FilterError::InvalidRecord { image_id: self.image_id.clone(), reason };
        for (name, v) in [
            ("quality_prob", self.quality_prob),
            ("sim_complete", self.sim_complete),
            ("sim_fragment", self.sim_fragment),
            ("sim_descriptive", self.sim_descriptive),
        ] {
            if !v.is_finite() {
                return Err(bad(format!("{name} is not finite")));
            }
        }
        if !(0.0..=1.0).contains(&self.quality_prob) {
            return Err(bad(format!("quality_prob {} outside [0, 1]", self.quality_prob)));
        }
        Ok(())
    }
}

/// Whether a vase's chosen view was turned into a 3D model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationOutcome {
    pub vase_id: String,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Quality,
    Fragment,
    View,
    Generation,
}

impl StageKind {
    pub fn label(self) -> &'static str {
        match self {
            StageKind::Quality => "Quality Filtering",
            StageKind::Fragment => "Fragment Filtering",
            StageKind::View => "View Selection",
            StageKind::Generation => "3D Generation",
        }
    }

    /// Stages after which the survivors' mean descriptive similarity is reported.
    pub fn reports_quality(self) -> bool {
        matches!(self, StageKind::Fragment | StageKind::View)
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageKind::Quality => "quality",
            StageKind::Fragment => "fragment",
            StageKind::View => "view",
            StageKind::Generation => "generation",
        })
    }
}

impl FromStr for StageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "quality" => Ok(StageKind::Quality),
            "fragment" => Ok(StageKind::Fragment),
            "view" => Ok(StageKind::View),
            "generation" => Ok(StageKind::Generation),
            other => Err(format!("unknown stage {other:?} (expected quality, fragment, view or generation)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub quality_threshold: f64,
    pub fragment_margin: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { quality_threshold: DEFAULT_QUALITY_THRESHOLD, fragment_margin: DEFAULT_FRAGMENT_MARGIN }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.quality_threshold) {
            return Err(format!("quality_threshold must be in [0, 1], got {}", self.quality_threshold));
        }
        if !self.fragment_margin.is_finite() {
            return Err("fragment_margin must be finite".into());
        }
        Ok(())
    }
}

pub type Partition = (Vec<ScoreRecord>, Vec<ScoreRecord>);

/// Keeps records whose quality probability reaches `threshold`.
pub fn quality_gate(records: &[ScoreRecord], threshold: f64) -> Partition {
    records.iter().cloned().partition(|r| r.quality_prob >= threshold)
}

/// Keeps records that look more like a complete vase than a fragment by at least `margin`.
pub fn fragment_filter(records: &[ScoreRecord], margin: f64) -> Partition {
    records.iter().cloned().partition(|r| r.sim_complete - r.sim_fragment >= margin - MARGIN_SLACK)
}

/// Image id of the view with the highest descriptive similarity; ties go to
/// the lexicographically smallest image id.
pub fn select_best_view(group: &[ScoreRecord]) -> Result<&str, FilterError> {
    let first = group.first().ok_or(FilterError::EmptyGroup)?;
    if let Some(other) = group.iter().find(|r| r.vase_id != first.vase_id) {
        return Err(FilterError::MixedGroup(first.vase_id.clone(), other.vase_id.clone()));
    }
    let best = group
        .iter()
        .reduce(|best, r| {
            let better = r.sim_descriptive > best.sim_descriptive
                || (r.sim_descriptive == best.sim_descriptive && r.image_id < best.image_id);
            if better {
                r
            } else {
                best
            }
        })
        .expect("group is non-empty");
    Ok(&best.image_id)
}

/// Keeps one view per vase, in input order.
pub fn view_selection(records: &[ScoreRecord]) -> Result<Partition, FilterError> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<ScoreRecord>> = HashMap::new();
    for r in records {
        let g = groups.entry(r.vase_id.as_str()).or_insert_with(|| {
            order.push(r.vase_id.as_str());
            Vec::new()
        });
        g.push(r.clone());
    }
    let mut winners: HashSet<&str> = HashSet::with_capacity(order.len());
    for vase in &order {
        let id = select_best_view(&groups[vase])?;
        let winner =
            records.iter().find(|r| r.vase_id == *vase && r.image_id == id).expect("winner comes from the group");
        winners.insert(winner.image_id.as_str());
    }
    Ok(records.iter().cloned().partition(|r| winners.contains(r.image_id.as_str())))
}

/// Keeps records whose vase has a successful generation outcome. Vases with
/// no outcome count as failures.
pub fn generation_filter(records: &[ScoreRecord], outcomes: &[GenerationOutcome]) -> Result<Partition, FilterError> {
    let present: HashSet<&str> = records.iter().map(|r| r.vase_id.as_str()).collect();
    let mut succeeded = HashSet::new();
    for o in outcomes {
        if !present.contains(o.vase_id.as_str()) {
            return Err(FilterError::UnknownGenerationVase(o.vase_id.clone()));
        }
        if o.success {
            succeeded.insert(o.vase_id.as_str());
        }
    }
    Ok(records.iter().cloned().partition(|r| succeeded.contains(r.vase_id.as_str())))
}

/// The record flow through one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub kind: StageKind,
    pub input_ids: Vec<String>,
    pub kept: Vec<ScoreRecord>,
    pub rejected: Vec<ScoreRecord>,
}

impl StageOutcome {
    pub fn new(kind: StageKind, input: &[ScoreRecord], (kept, rejected): Partition) -> Self {
        Self { kind, input_ids: input.iter().map(|r| r.image_id.clone()).collect(), kept, rejected }
    }
}

/// Runs `stages` in order, each on the previous stage's survivors.
pub fn run_pipeline(
    records: &[ScoreRecord],
    stages: &[StageKind],
    cfg: &FilterConfig,
    generation: Option<&[GenerationOutcome]>,
) -> Result<Vec<StageOutcome>, FilterError> {
    let mut seen = HashSet::new();
    for &s in stages {
        if !seen.insert(s) {
            return Err(FilterError::DuplicateStage(s));
        }
    }
    for r in records {
        r.validate()?;
    }
    let mut current = records.to_vec();
    let mut out = Vec::with_capacity(stages.len());
    for &kind in stages {
        let partition = match kind {
            StageKind::Quality => quality_gate(&current, cfg.quality_threshold),
            StageKind::Fragment => fragment_filter(&current, cfg.fragment_margin),
            StageKind::View => view_selection(&current)?,
            StageKind::Generation => {
                generation_filter(&current, generation.ok_or(FilterError::MissingGenerationOutcomes)?)?
            }
        };
        let outcome = StageOutcome::new(kind, &current, partition);
        current = outcome.kept.clone();
        out.push(outcome);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub stage: String,
    pub input: usize,
    pub output: usize,
    /// output / input, as a fraction.
    pub retention_rate: f64,
    /// Mean descriptive similarity of the survivors, where the stage reports one.
    pub quality_score: Option<f64>,
}

impl RetentionRow {
    fn new(stage: impl Into<String>, input: usize, output: usize, quality_score: Option<f64>) -> Self {
        let retention_rate = if input == 0 { 0.0 } else { output as f64 / input as f64 };
        Self { stage: stage.into(), input, output, retention_rate, quality_score }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionTable {
    pub stages: Vec<RetentionRow>,
    pub overall: RetentionRow,
}

pub fn mean_descriptive(records: &[ScoreRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    Some(records.iter().map(|r| r.sim_descriptive).sum::<f64>() / records.len() as f64)
}

/// Summarizes chained stage outcomes.
pub fn pipeline_stats(stages: &[StageOutcome]) -> Result<RetentionTable, FilterError> {
    let first = stages.first().ok_or(FilterError::NoStages)?;
    for pair in stages.windows(2) {
        let prev_ids: Vec<&str> = pair[0].kept.iter().map(|r| r.image_id.as_str()).collect();
        let next_ids: Vec<&str> = pair[1].input_ids.iter().map(String::as_str).collect();
        if prev_ids != next_ids {
            return Err(FilterError::ChainMismatch {
                stage: pair[1].kind.to_string(),
                previous: pair[0].kind.to_string(),
            });
        }
    }
    for s in stages {
        if s.kept.len() + s.rejected.len() != s.input_ids.len() {
            return Err(FilterError::ChainMismatch { stage: s.kind.to_string(), previous: s.kind.to_string() });
        }
    }

    let rows: Vec<RetentionRow> = stages
        .iter()
        .map(|s| {
            let quality = if s.kind.reports_quality() { mean_descriptive(&s.kept) } else { None };
            RetentionRow::new(s.kind.label(), s.input_ids.len(), s.kept.len(), quality)
        })
        .collect();
    let last = stages.last().expect("non-empty");
    let overall_quality = rows.iter().rev().find_map(|r| r.quality_score);
    let overall = RetentionRow::new("Overall Pipeline", first.input_ids.len(), last.kept.len(), overall_quality);
    Ok(RetentionTable { stages: rows, overall })
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

impl RetentionTable {
    /// Aligned plain-text rendering.
    pub fn render(&self) -> String {
        let header = ["Filtering Stage", "Input Images", "Output Images", "Retention Rate", "Quality Score"];
        let cells = |r: &RetentionRow| {
            [
                r.stage.clone(),
                thousands(r.input),
                thousands(r.output),
                format!("{:.1}%", r.retention_rate * 100.0),
                r.quality_score.map_or_else(|| "-".to_string(), |q| format!("{q:.3}")),
            ]
        };
        let body: Vec<[String; 5]> = self.stages.iter().map(cells).collect();
        let overall = cells(&self.overall);
        let mut widths = header.map(str::len);
        for row in body.iter().chain(std::iter::once(&overall)) {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cols: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cols.iter().zip(widths).enumerate() {
                if i == 0 {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "  {c:>w$}");
                }
            }
            s.trim_end().to_string()
        };
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
        let mut out = String::new();
        out.push_str(&line(&header.map(String::from)));
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for row in &body {
            out.push_str(&line(row));
            out.push('\n');
        }
        out.push_str(&rule);
        out.push('\n');
        out.push_str(&line(&overall));
        out.push('\n');
        out
    }
}
