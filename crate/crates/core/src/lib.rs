//! Deterministic scoring and evaluation engine for Greek vase captioning.
//!
//! * [`reward`]: multi-dimensional verifiable caption reward
//! * [`advantage`]: group-relative advantage normalization for rollouts
//! * [`filter`]: replay of quality / fragment / view curation decisions
//! * [`metrics`]: R@k retrieval, ROUGE-L and per-dimension QA accuracy
//! * [`manifest`] and [`split`]: dataset schema, validation and seeded splits

pub mod advantage;
pub mod dimension;
pub mod extract;
pub mod filter;
pub mod human_eval;
pub mod manifest;
pub mod metrics;
pub mod reward;
pub mod similarity;
pub mod split;
pub mod text;

pub use advantage::{group_advantages, AdvantageResult};
pub use dimension::{Dimension, DimensionSlots};
pub use extract::{extract_slots, target_slots_from_qa, Lexicon};
pub use manifest::{load_manifest, validate_manifest, DatasetManifest, QuestionType, VaseEntry};
pub use metrics::{evaluate_run, recall_at_k, rouge_l, EvalReport};
pub use reward::{compute_reward, RewardConfig, RewardResult};
pub use similarity::{cosine, sequence_match_ratio, HashedBow, SimilarityProvider};
pub use split::{split_dataset, SplitAssignment};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
