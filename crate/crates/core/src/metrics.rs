//! Caption retrieval and lexical metrics, and run-level evaluation.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::Dimension;
use crate::manifest::{DatasetManifest, QuestionType};
use crate::similarity::{cosine, ProviderError, SimilarityProvider};
use crate::text::{normalize, tokenize};

pub const RECALL_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("similarity matrix is {rows}x{cols}, retrieval needs a square matrix")]
    NonSquareMatrix { rows: usize, cols: usize },
    #[error("similarity matrix has a ragged row {0}")]
    RaggedRow(usize),
    #[error("similarity matrix value at ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("prediction refers to unknown vase {0:?}")]
    UnknownVaseId(String),
    #[error("vase {0:?} has more than one prediction")]
    DuplicatePrediction(String),
    #[error("no predictions to evaluate")]
    EmptyRun,
    #[error("similarity provider failed: {0}")]
    Provider(#[from] ProviderError),
}

/// Row `i` holds similarities of generated item `i` to every reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn new(row_ids: Vec<String>, col_ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        for (i, row) in values.iter().enumerate() {
            if row.len() != col_ids.len() {
                return Err(EvalError::RaggedRow(i));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(EvalError::NonFinite(i, j));
            }
        }
        if values.len() != row_ids.len() {
            return Err(EvalError::RaggedRow(values.len()));
        }
        Ok(Self { row_ids, col_ids, values })
    }

    /// Square matrix with positional ids, mostly for tests.
    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        let ids: Vec<String> = (0..values.len()).map(|i| i.to_string()).collect();
        let cols = values.first().map_or(0, Vec::len);
        let col_ids = (0..cols).map(|i| i.to_string()).collect();
        Self::new(ids, col_ids, values)
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.col_ids.len()
    }

    /// Zero-based rank of column `col` in row `row`. Higher similarity ranks
    /// first; equal similarities rank the lower column index first.
    pub fn rank_of(&self, row: usize, col: usize) -> usize {
        let r = &self.values[row];
        let target = r[col];
        r.iter().enumerate().filter(|&(j, &v)| v > target || (v == target && j < col)).count()
    }
}

/// Fraction of rows whose own column ranks within the top `k`.
pub fn recall_at_k(matrix: &SimilarityMatrix, k: usize) -> Result<f64, EvalError> {
    let n = matrix.rows();
    if n != matrix.cols() {
        return Err(EvalError::NonSquareMatrix { rows: n, cols: matrix.cols() });
    }
    if n == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = k.min(n);
    let hits = (0..n).filter(|&i| matrix.rank_of(i, i) < k).count();
    Ok(hits as f64 / n as f64)
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Token-level ROUGE-L F1.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference))
}

pub fn rouge_l_tokens<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// One model output for one vase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub vase_id: String,
    pub caption: String,
    #[serde(default)]
    pub answers: BTreeMap<QuestionType, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Keyed by k.
    pub recall_at: BTreeMap<usize, f64>,
    /// Mean ROUGE-L F1 of generated against reference captions.
    pub lexical_similarity: f64,
    pub per_dimension_accuracy: BTreeMap<Dimension, f64>,
    pub n_items: usize,
    /// Externally computed image-side scores, copied through when supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clip_score: Option<f64>,
}

/// Evaluates a prediction run against the manifest's references.
///
/// Predictions are put in vase-id order before building the retrieval
/// matrix so the report does not depend on input order.
pub fn evaluate_run<P: SimilarityProvider + ?Sized>(
    predictions: &[Prediction],
    manifest: &DatasetManifest,
    provider: &P,
) -> Result<EvalReport, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    let index = manifest.index();
    let mut seen = HashSet::new();
    for p in predictions {
        if !index.contains_key(p.vase_id.as_str()) {
            return Err(EvalError::UnknownVaseId(p.vase_id.clone()));
        }
        if !seen.insert(p.vase_id.as_str()) {
            return Err(EvalError::DuplicatePrediction(p.vase_id.clone()));
        }
    }
    let mut preds: Vec<&Prediction> = predictions.iter().collect();
    preds.sort_by(|a, b| a.vase_id.cmp(&b.vase_id));
    let refs: Vec<_> = preds.iter().map(|p| index[p.vase_id.as_str()]).collect();
    let n = preds.len();

    let mut texts: Vec<String> = preds.iter().map(|p| p.caption.clone()).collect();
    texts.extend(refs.iter().map(|e| e.caption.clone()));
    let vectors = provider.embed_batch(&texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::new(format!(
            "provider returned {} vectors for {} texts",
            vectors.len(),
            texts.len()
        ))
        .into());
    }
    let (gen_vecs, ref_vecs) = vectors.split_at(n);
    let values = gen_vecs
        .iter()
        .map(|g| ref_vecs.iter().map(|r| cosine(g, r).map_err(ProviderError::from)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<String> = preds.iter().map(|p| p.vase_id.clone()).collect();
    let matrix = SimilarityMatrix::new(ids.clone(), ids, values)?;

    let mut recall_at = BTreeMap::new();
    for k in RECALL_KS {
        recall_at.insert(k, recall_at_k(&matrix, k)?);
    }

    let lexical_similarity =
        preds.iter().zip(&refs).map(|(p, e)| rouge_l(&p.caption, &e.caption)).sum::<f64>() / n as f64;

    let mut tallies: BTreeMap<Dimension, (usize, usize)> = BTreeMap::new();
    for (p, e) in preds.iter().zip(&refs) {
        for qa in &e.qa_pairs {
            let Some(dim) = qa.question_type.dimension() else { continue };
            let tally = tallies.entry(dim).or_default();
            tally.1 += 1;
            let predicted = p.answers.get(&qa.question_type).map(|a| normalize(a)).unwrap_or_default();
            if !predicted.is_empty() && predicted == normalize(&qa.answer) {
                tally.0 += 1;
            }
        }
    }
    let per_dimension_accuracy = tallies.into_iter().map(|(d, (hit, total))| (d, hit as f64 / total as f64)).collect();

    Ok(EvalReport { recall_at, lexical_similarity, per_dimension_accuracy, n_items: n, fid: None, clip_score: None })
}
