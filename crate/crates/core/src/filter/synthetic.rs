//! Deterministic score corpora with prescribed per-stage survivor counts.
//!
//! Scores are drawn on a micro-unit grid (multiples of 1e-6) so that stage
//! decisions never depend on rounding in the serialized form.

use serde::{Deserialize, Serialize};

use super::{GenerationOutcome, ScoreRecord};
use crate::split::SplitMix64;

/// Target shape of a synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusShape {
    pub total: usize,
    pub after_quality: usize,
    pub after_fragment: usize,
    /// Distinct vases among fragment-stage survivors, i.e. view-stage output.
    pub vases: usize,
    pub generated: usize,
    /// Mean descriptive similarity of fragment-stage survivors.
    pub fragment_mean: f64,
    /// Mean descriptive similarity of the selected best views.
    pub view_mean: f64,
}

impl CorpusShape {
    /// Counts and survivor means of the published curation run.
    pub fn published() -> Self {
        Self {
            total: 30_000,
            after_quality: 13_599,
            after_fragment: 6_330,
            vases: 3_880,
            generated: 664,
            fragment_mean: 0.156,
            view_mean: 0.234,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let chain = [self.total, self.after_quality, self.after_fragment, self.vases, self.generated];
        if chain.windows(2).any(|w| w[1] > w[0]) {
            return Err(format!("stage counts must be non-increasing: {chain:?}"));
        }
        if self.vases == 0 {
            return Err("need at least one vase".into());
        }
        if self.after_fragment > self.vases {
            let others = (self.fragment_mean * self.after_fragment as f64 - self.view_mean * self.vases as f64)
                / (self.after_fragment - self.vases) as f64;
            if !(SPREAD_OTHER..self.view_mean - SPREAD_BEST - SPREAD_OTHER).contains(&others) {
                return Err(format!(
                    "survivor means imply a non-best view mean of {others:.4}, which cannot sit below every best view"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub records: Vec<ScoreRecord>,
    pub generation: Vec<GenerationOutcome>,
}

const MICRO: f64 = 1e6;
const SPREAD_BEST: f64 = 0.05;
const SPREAD_OTHER: f64 = 0.02;

fn micro(v: i64) -> f64 {
    v as f64 / MICRO
}

fn uniform_micro(rng: &mut SplitMix64, lo: i64, hi: i64) -> i64 {
    lo + rng.below((hi - lo + 1) as usize) as i64
}

/// Values averaging exactly `mean` on the micro grid, spread by at most `spread`.
fn centered(rng: &mut SplitMix64, n: usize, mean: f64, spread: f64) -> Vec<i64> {
    let center = (mean * MICRO).round() as i64;
    let spread = (spread * MICRO) as i64;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let d = uniform_micro(rng, 0, spread);
        out.push(center + d);
        out.push(center - d);
    }
    if n % 2 == 1 {
        out.push(center);
    }
    out
}

/// Builds a corpus that survives quality, fragment, view and generation
/// stages with exactly the counts in `shape` under thresholds 0.5 / 0.1.
pub fn generate(shape: &CorpusShape, seed: u64) -> Result<SyntheticCorpus, String> {
    shape.validate()?;
    let mut rng = SplitMix64::new(seed);
    let vase_id = |v: usize| format!("vase-{v:05}");

    // (vase index, quality, complete, fragment, descriptive) in micro units
    let mut rows: Vec<(usize, i64, i64, i64, i64)> = Vec::with_capacity(shape.total);

    let best = centered(&mut rng, shape.vases, shape.view_mean, SPREAD_BEST);
    let n_other = shape.after_fragment - shape.vases;
    let other_mean = if n_other == 0 {
        0.0
    } else {
        (shape.fragment_mean * shape.after_fragment as f64 - shape.view_mean * shape.vases as f64) / n_other as f64
    };
    let others = centered(&mut rng, n_other, other_mean, SPREAD_OTHER);

    let mut passing_fragment = |rng: &mut SplitMix64, vase: usize, descriptive: i64, boundary: bool| {
        let quality = if boundary { 500_000 } else { uniform_micro(rng, 500_000, 1_000_000) };
        let fragment = uniform_micro(rng, 50_000, 300_000);
        let diff = if boundary { 100_000 } else { uniform_micro(rng, 100_000, 400_000) };
        rows.push((vase, quality, fragment + diff, fragment, descriptive));
    };
    for (v, &d) in best.iter().enumerate() {
        passing_fragment(&mut rng, v, d, v % 97 == 0);
    }
    for &d in &others {
        let v = rng.below(shape.vases);
        passing_fragment(&mut rng, v, d, false);
    }

    // Quality passes, fragment fails. Some belong to surviving vases, some to
    // vases that are fragments only.
    for k in 0..shape.after_quality - shape.after_fragment {
        let v = if k % 3 == 0 { shape.vases + k } else { rng.below(shape.vases) };
        let quality = uniform_micro(&mut rng, 500_000, 1_000_000);
        let fragment = uniform_micro(&mut rng, 100_000, 350_000);
        let diff = if k % 101 == 0 { 99_999 } else { uniform_micro(&mut rng, -200_000, 99_000) };
        let descriptive = uniform_micro(&mut rng, 0, 200_000);
        rows.push((v, quality, fragment + diff, fragment, descriptive));
    }

    // Quality fails.
    for k in 0..shape.total - shape.after_quality {
        let v = rng.below(shape.vases + shape.total);
        let quality = if k % 113 == 0 { 499_999 } else { uniform_micro(&mut rng, 0, 499_999) };
        let fragment = uniform_micro(&mut rng, 0, 350_000);
        let complete = uniform_micro(&mut rng, 0, 450_000);
        let descriptive = uniform_micro(&mut rng, 0, 250_000);
        rows.push((v, quality, complete, fragment, descriptive));
    }

    rng.shuffle(&mut rows);
    let records = rows
        .into_iter()
        .enumerate()
        .map(|(i, (v, q, c, f, d))| ScoreRecord {
            image_id: format!("img-{i:06}"),
            vase_id: vase_id(v),
            quality_prob: micro(q),
            sim_complete: micro(c),
            sim_fragment: micro(f),
            sim_descriptive: micro(d),
        })
        .collect();

    let mut order: Vec<usize> = (0..shape.vases).collect();
    rng.shuffle(&mut order);
    let mut success = vec![false; shape.vases];
    for &v in &order[..shape.generated] {
        success[v] = true;
    }
    let generation = success
        .into_iter()
        .enumerate()
        .map(|(v, success)| GenerationOutcome { vase_id: vase_id(v), success })
        .collect();

    Ok(SyntheticCorpus { records, generation })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn small_shape_hits_counts() {
        let shape = CorpusShape {
            total: 500,
            after_quality: 300,
            after_fragment: 150,
            vases: 90,
            generated: 20,
            fragment_mean: 0.15,
            view_mean: 0.23,
        };
        let corpus = generate(&shape, 9).unwrap();
        let stages = run_pipeline(
            &corpus.records,
            &[StageKind::Quality, StageKind::Fragment, StageKind::View, StageKind::Generation],
            &FilterConfig::default(),
            Some(&corpus.generation),
        )
        .unwrap();
        let counts: Vec<usize> = stages.iter().map(|s| s.kept.len()).collect();
        assert_eq!(counts, [300, 150, 90, 20]);
        let t = pipeline_stats(&stages).unwrap();
        assert!((t.stages[1].quality_score.unwrap() - 0.15).abs() < 1e-6);
        assert!((t.stages[2].quality_score.unwrap() - 0.23).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        let shape = CorpusShape {
            total: 200,
            after_quality: 100,
            after_fragment: 60,
            vases: 40,
            generated: 10,
            fragment_mean: 0.15,
            view_mean: 0.2,
        };
        assert_eq!(generate(&shape, 1).unwrap(), generate(&shape, 1).unwrap());
        assert_ne!(generate(&shape, 1).unwrap(), generate(&shape, 2).unwrap());
    }

    #[test]
    fn rejects_impossible_means() {
        let mut shape = CorpusShape::published();
        shape.fragment_mean = 0.3;
        assert!(generate(&shape, 0).is_err());
        let mut shape = CorpusShape::published();
        shape.generated = 5000;
        assert!(generate(&shape, 0).is_err());
    }
}
