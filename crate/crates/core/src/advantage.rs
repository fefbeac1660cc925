//! Group-relative advantages for rollout groups.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum AdvantageError {
    #[error("advantage group is empty")]
    EmptyGroup,
    #[error("reward at position {0} is not finite")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageResult {
    pub rewards: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub advantages: Vec<f64>,
}

/// Standardizes rewards within one group: `(r - mean) / std`.
///
/// Groups whose population std is at most `epsilon` get all-zero advantages.
pub fn group_advantages(rewards: &[f64], epsilon: f64) -> Result<AdvantageResult, AdvantageError> {
    if rewards.is_empty() {
        return Err(AdvantageError::EmptyGroup);
    }
    if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(AdvantageError::NonFinite(i));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let advantages =
        if std <= epsilon { vec![0.0; rewards.len()] } else { rewards.iter().map(|r| (r - mean) / std).collect() };
    Ok(AdvantageResult { rewards: rewards.to_vec(), mean, std, advantages })
}
