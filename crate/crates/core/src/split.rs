//! Seeded train/val/test assignment.
//!
//! Entries are shuffled with a Fisher-Yates pass driven by SplitMix64, then cut
//! into `floor(r_train * N)`, `floor(r_val * N)` and the remainder. SplitMix64
//! and the bounded-index reduction are implemented here so that the output
//! depends on nothing but the inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{DatasetManifest, Split};

const RATIO_SUM_TOLERANCE: f64 = 1e-9;
// Absorbs products like 0.7 * 30 landing a hair under an integer.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("invalid split ratios {0:?}: each must be positive and they must sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("cannot split an empty manifest")]
    EmptyManifest,
}

/// SplitMix64 (Steele, Lea & Flood): a 64-bit counter passed through a mixing function.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish index in `0..bound` by multiply-shift (bias < bound / 2^64).
    pub fn below(&mut self, bound: usize) -> usize {
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// floor / floor / remainder sizing.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<SplitSizes, SplitError> {
    validate_ratios(ratios)?;
    let train = ((ratios[0] * n as f64) + FLOOR_SLACK).floor() as usize;
    let val = ((ratios[1] * n as f64) + FLOOR_SLACK).floor() as usize;
    let train = train.min(n);
    let val = val.min(n - train);
    Ok(SplitSizes { train, val, test: n - train - val })
}

pub fn validate_ratios(ratios: [f64; 3]) -> Result<(), SplitError> {
    let ok = ratios.iter().all(|r| r.is_finite() && *r > 0.0)
        && (ratios.iter().sum::<f64>() - 1.0).abs() <= RATIO_SUM_TOLERANCE;
    if ok {
        Ok(())
    } else {
        Err(SplitError::InvalidRatios(ratios))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub ratios: [f64; 3],
    pub seed: u64,
    pub assignment: BTreeMap<String, Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|&&s| s == split).count()
    }

    pub fn summary(&self) -> SplitSummary {
        SplitSummary {
            train: self.count(Split::Train),
            val: self.count(Split::Val),
            test: self.count(Split::Test),
            seed: self.seed,
        }
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.assignment.iter().filter(move |(_, &s)| s == split).map(|(id, _)| id.as_str())
    }

    /// Copy of `manifest` with each entry's `split` field set.
    pub fn apply(&self, manifest: &DatasetManifest) -> DatasetManifest {
        let mut out = manifest.clone();
        for e in &mut out.entries {
            e.split = self.assignment.get(&e.vase_id).copied();
        }
        out
    }
}

/// Assigns every entry of `manifest` to exactly one split.
///
/// Shuffling runs over the manifest's entry order, so reordering the manifest
/// changes the assignment while the split sizes stay fixed.
pub fn split_dataset(manifest: &DatasetManifest, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment, SplitError> {
    validate_ratios(ratios)?;
    if manifest.is_empty() {
        return Err(SplitError::EmptyManifest);
    }
    let sizes = split_sizes(manifest.len(), ratios)?;
    let mut ids: Vec<&str> = manifest.entries.iter().map(|e| e.vase_id.as_str()).collect();
    SplitMix64::new(seed).shuffle(&mut ids);

    let assignment = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let split = if i < sizes.train {
                Split::Train
            } else if i < sizes.train + sizes.val {
                Split::Val
            } else {
                Split::Test
            };
            (id.to_string(), split)
        })
        .collect();
    Ok(SplitAssignment { ratios, seed, assignment })
}
