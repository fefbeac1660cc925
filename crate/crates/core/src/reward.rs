//! Verifiable caption reward.
//!
//! A generated caption is decomposed into dimension slots and each slot is
//! compared with the ground-truth slot:
//!
//! ```text
//! r_i = sim_i  if sim_i >= tau, else 0
//! P   = a_len * P_length + a_rep * P_repetition + a_irr * P_irrelevant
//! B   = beta * ratio(generated, reference caption)
//! R   = clamp(sum_i w_i * r_i - P + B, 0, 1)
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::{Dimension, DimensionSlots};
use crate::extract::{extract_slots, Lexicon};
use crate::similarity::{cosine, ProviderError, SimilarityProvider};
use crate::text::{sentences, tokenize};

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
    #[error("target has no populated dimension")]
    NoTargetContent,
    #[error("similarity provider failed: {0}")]
    Provider(#[from] ProviderError),
}

/// Per-dimension weights, in canonical dimension order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionWeights {
    pub fabric: f64,
    pub technique: f64,
    pub shape: f64,
    pub dating: f64,
    pub decoration: f64,
    pub attribution: f64,
}

impl Default for DimensionWeights {
    fn default() -> Self {
        Self { fabric: 0.20, technique: 0.20, shape: 0.15, dating: 0.15, decoration: 0.20, attribution: 0.10 }
    }
}

impl DimensionWeights {
    pub fn from_array(w: [f64; 6]) -> Self {
        Self { fabric: w[0], technique: w[1], shape: w[2], dating: w[3], decoration: w[4], attribution: w[5] }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.fabric, self.technique, self.shape, self.dating, self.decoration, self.attribution]
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        self.as_array()[dim.index()]
    }

    /// Compensated (Neumaier) sum, so decimal weights that add to one
    /// report exactly 1.0.
    pub fn sum(&self) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for w in self.as_array() {
            let t = sum + w;
            if sum.abs() >= w.abs() {
                comp += (sum - t) + w;
            } else {
                comp += (w - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub weights: DimensionWeights,
    /// Similarity threshold below which a dimension earns nothing.
    pub tau: f64,
    pub alpha_length: f64,
    pub alpha_repetition: f64,
    pub alpha_irrelevant: f64,
    /// Scale of the sequence-match bonus.
    pub beta: f64,
    /// Token band outside which the length penalty applies.
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// A sentence whose best similarity to any target slot falls below this is irrelevant.
    pub irrelevance_threshold: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: DimensionWeights::default(),
            tau: 0.7,
            alpha_length: 0.1,
            alpha_repetition: 0.1,
            alpha_irrelevant: 0.15,
            beta: 0.1,
            min_tokens: 15,
            max_tokens: 120,
            irrelevance_threshold: 0.2,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        let bad = |msg: String| Err(RewardError::InvalidConfig(msg));
        for (dim, w) in Dimension::ALL.iter().zip(self.weights.as_array()) {
            if !w.is_finite() || w < 0.0 {
                return bad(format!("weight for {dim} must be a non-negative number, got {w}"));
            }
        }
        let sum = self.weights.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("weights must sum to 1, got {sum}"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must be in [0, 1], got {}", self.tau));
        }
        for (name, a) in [
            ("alpha_length", self.alpha_length),
            ("alpha_repetition", self.alpha_repetition),
            ("alpha_irrelevant", self.alpha_irrelevant),
            ("beta", self.beta),
        ] {
            if !a.is_finite() || a < 0.0 {
                return bad(format!("{name} must be a non-negative number, got {a}"));
            }
        }
        if self.min_tokens >= self.max_tokens {
            return bad(format!("min_tokens ({}) must be below max_tokens ({})", self.min_tokens, self.max_tokens));
        }
        if !(0.0..=1.0).contains(&self.irrelevance_threshold) {
            return bad(format!("irrelevance_threshold must be in [0, 1], got {}", self.irrelevance_threshold));
        }
        Ok(())
    }

    pub fn max_penalty(&self) -> f64 {
        self.alpha_length + self.alpha_repetition + self.alpha_irrelevant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltyBreakdown {
    pub length: f64,
    pub repetition: f64,
    pub irrelevant: f64,
    pub total: f64,
}

impl PenaltyBreakdown {
    pub fn from_components(length: f64, repetition: f64, irrelevant: f64, cfg: &RewardConfig) -> Self {
        let total = cfg.alpha_length * length + cfg.alpha_repetition * repetition + cfg.alpha_irrelevant * irrelevant;
        Self { length, repetition, irrelevant, total }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub dimension: Dimension,
    pub generated: Option<String>,
    pub target: Option<String>,
    pub sim: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardResult {
    pub dimensions: Vec<DimensionScore>,
    pub penalty: PenaltyBreakdown,
    pub bonus: f64,
    /// Weighted dimension rewards minus penalty plus bonus, before clamping.
    pub raw: f64,
    pub reward: f64,
}

impl RewardResult {
    /// Assembles a result from per-dimension similarities and a penalty/bonus.
    pub fn from_parts(sims: [f64; 6], penalty: PenaltyBreakdown, bonus: f64, cfg: &RewardConfig) -> Self {
        let dimensions = Dimension::ALL
            .iter()
            .map(|&dim| {
                let sim = sims[dim.index()];
                DimensionScore {
                    dimension: dim,
                    generated: None,
                    target: None,
                    sim,
                    reward: dimensional_reward(sim, cfg.tau),
                }
            })
            .collect::<Vec<_>>();
        let weighted: f64 = dimensions.iter().map(|d| cfg.weights.get(d.dimension) * d.reward).sum();
        let raw = weighted - penalty.total + bonus;
        Self { dimensions, penalty, bonus, raw, reward: raw.clamp(0.0, 1.0) }
    }

    pub fn sims(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        for d in &self.dimensions {
            out[d.dimension.index()] = d.sim;
        }
        out
    }
}

/// Thresholded reward for one dimension. Negative similarities count as 0.
pub fn dimensional_reward(sim: f64, tau: f64) -> f64 {
    let sim = if sim.is_nan() { 0.0 } else { sim.max(0.0) };
    if sim >= tau {
        sim
    } else {
        0.0
    }
}

/// Length deviation from the `[min, max]` token band, relative to the nearest bound.
pub fn length_penalty(token_count: usize, cfg: &RewardConfig) -> f64 {
    let (lo, hi) = (cfg.min_tokens, cfg.max_tokens);
    if token_count == 0 {
        return 1.0;
    }
    let deviation = if token_count < lo {
        (lo - token_count) as f64 / lo as f64
    } else if token_count > hi {
        (token_count - hi) as f64 / hi as f64
    } else {
        0.0
    };
    deviation.min(1.0)
}

/// `1 - distinct / total` over token trigrams; 0 below three tokens.
pub fn repetition_penalty(tokens: &[String]) -> f64 {
    if tokens.len() < 3 {
        return 0.0;
    }
    let total = tokens.len() - 2;
    let distinct: HashSet<&[String]> = tokens.windows(3).collect();
    1.0 - distinct.len() as f64 / total as f64
}

/// Fraction of sentences whose best similarity to any populated target slot
/// is below the irrelevance threshold. A caption without sentences scores 1.
pub fn irrelevance_penalty<P: SimilarityProvider + ?Sized>(
    caption: &str,
    target: &DimensionSlots,
    cfg: &RewardConfig,
    provider: &P,
) -> Result<f64, RewardError> {
    let sents = sentences(caption);
    if sents.is_empty() {
        return Ok(1.0);
    }
    let slots: Vec<String> = target.populated().map(|(_, s)| s.to_string()).collect();
    if slots.is_empty() {
        return Ok(1.0);
    }
    let mut texts = sents.clone();
    texts.extend(slots.iter().cloned());
    let vectors = provider.embed_batch(&texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::new(format!(
            "provider returned {} vectors for {} texts",
            vectors.len(),
            texts.len()
        ))
        .into());
    }
    let (sent_vecs, slot_vecs) = vectors.split_at(sents.len());
    let mut irrelevant = 0usize;
    for s in sent_vecs {
        let mut best = f64::NEG_INFINITY;
        for t in slot_vecs {
            best = best.max(cosine(s, t).map_err(ProviderError::from)?);
        }
        if best < cfg.irrelevance_threshold {
            irrelevant += 1;
        }
    }
    Ok(irrelevant as f64 / sents.len() as f64)
}

pub fn compute_penalty<P: SimilarityProvider + ?Sized>(
    caption: &str,
    target: &DimensionSlots,
    cfg: &RewardConfig,
    provider: &P,
) -> Result<PenaltyBreakdown, RewardError> {
    let tokens = tokenize(caption);
    if tokens.is_empty() {
        return Ok(PenaltyBreakdown::from_components(1.0, 0.0, 1.0, cfg));
    }
    let length = length_penalty(tokens.len(), cfg);
    let repetition = repetition_penalty(&tokens);
    let irrelevant = irrelevance_penalty(caption, target, cfg, provider)?;
    Ok(PenaltyBreakdown::from_components(length, repetition, irrelevant, cfg))
}

/// Per-dimension cosine between generated and target slots; absent on either
/// side gives 0.
pub fn slot_similarities<P: SimilarityProvider + ?Sized>(
    generated: &DimensionSlots,
    target: &DimensionSlots,
    provider: &P,
) -> Result<[f64; 6], RewardError> {
    let mut sims = [0.0; 6];
    let pairs: Vec<(Dimension, &str, &str)> =
        Dimension::ALL.iter().filter_map(|&d| Some((d, generated.get(d)?, target.get(d)?))).collect();
    if pairs.is_empty() {
        return Ok(sims);
    }
    let texts: Vec<String> = pairs.iter().flat_map(|(_, g, t)| [g.to_string(), t.to_string()]).collect();
    let vectors = provider.embed_batch(&texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::new(format!(
            "provider returned {} vectors for {} texts",
            vectors.len(),
            texts.len()
        ))
        .into());
    }
    for (k, (dim, _, _)) in pairs.iter().enumerate() {
        sims[dim.index()] = cosine(&vectors[2 * k], &vectors[2 * k + 1]).map_err(ProviderError::from)?;
    }
    Ok(sims)
}

/// Scores one generated caption against a vase's ground truth.
pub fn compute_reward<P: SimilarityProvider + ?Sized>(
    generated: &str,
    target: &DimensionSlots,
    target_caption: &str,
    cfg: &RewardConfig,
    lexicon: &Lexicon,
    provider: &P,
) -> Result<RewardResult, RewardError> {
    cfg.validate()?;
    if target.is_empty() {
        return Err(RewardError::NoTargetContent);
    }
    let gen_slots = extract_slots(generated, lexicon);
    let sims = slot_similarities(&gen_slots, target, provider)?;
    let penalty = compute_penalty(generated, target, cfg, provider)?;
    let bonus = cfg.beta * crate::similarity::sequence_match_ratio(generated, target_caption);

    let mut result = RewardResult::from_parts(sims, penalty, bonus, cfg);
    for d in &mut result.dimensions {
        d.generated = gen_slots.get(d.dimension).map(str::to_string);
        d.target = target.get(d.dimension).map(str::to_string);
    }
    Ok(result)
}

/// Bundles config, lexicon and provider for repeated scoring.
pub struct RewardEngine<P> {
    pub config: RewardConfig,
    pub lexicon: Lexicon,
    pub provider: P,
}

impl<P: SimilarityProvider> RewardEngine<P> {
    pub fn new(config: RewardConfig, lexicon: Lexicon, provider: P) -> Result<Self, RewardError> {
        config.validate()?;
        Ok(Self { config, lexicon, provider })
    }

    pub fn score(
        &self,
        generated: &str,
        target: &DimensionSlots,
        target_caption: &str,
    ) -> Result<RewardResult, RewardError> {
        compute_reward(generated, target, target_caption, &self.config, &self.lexicon, &self.provider)
    }
}
