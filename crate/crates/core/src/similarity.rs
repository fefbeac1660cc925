//! Similarity primitives: embedding providers, cosine, and the
//! Ratcliff-Obershelp sequence-match ratio.

use std::collections::HashMap;
use std::error::Error as StdError;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize, tokenize};

pub const DEFAULT_DIMENSION: usize = 1024;
pub const HASHED_BOW_TAG: &str = "hashed-bow";

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding contains a non-finite value at index {0}")]
    NonFinite(usize),
}

/// Failure inside a [`SimilarityProvider`], e.g. a remote scorer being down.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct ProviderError {
    message: String,
    #[source]
    source: Option<Box<dyn StdError + Send + Sync>>,
}

impl ProviderError {
    pub fn new(message: impl Into<String>) -> Self {
        Self { message: message.into(), source: None }
    }

    pub fn with_source(message: impl Into<String>, source: impl StdError + Send + Sync + 'static) -> Self {
        Self { message: message.into(), source: Some(Box::new(source)) }
    }
}

impl From<SimilarityError> for ProviderError {
    fn from(e: SimilarityError) -> Self {
        ProviderError::with_source("similarity computation failed", e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    provider: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, provider: impl Into<String>) -> Result<Self, SimilarityError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SimilarityError::NonFinite(i));
        }
        Ok(Self { values, provider: provider.into() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Maps text to fixed-dimension vectors.
///
/// Implementations must be callable from several threads at once.
pub trait SimilarityProvider: Send + Sync {
    fn tag(&self) -> &str;

    fn dimension(&self) -> usize;

    /// True when the same text always yields the same vector.
    fn is_deterministic(&self) -> bool;

    /// Embeds every text, preserving order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop().ok_or_else(|| ProviderError::new("provider returned no vector"))
    }

    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        let v = self.embed_batch(&[a.to_string(), b.to_string()])?;
        if v.len() != 2 {
            return Err(ProviderError::new(format!("provider returned {} vectors for 2 texts", v.len())));
        }
        Ok(cosine(&v[0], &v[1])?)
    }
}

impl<P: SimilarityProvider + ?Sized> SimilarityProvider for &P {
    fn tag(&self) -> &str {
        (**self).tag()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed_batch(texts)
    }
}

impl<P: SimilarityProvider + ?Sized> SimilarityProvider for Box<P> {
    fn tag(&self) -> &str {
        (**self).tag()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed_batch(texts)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Term-count vector with each normalized token hashed into a bucket.
pub fn embed_hashed_bow(text: &str, dimension: usize) -> EmbeddingVector {
    assert!(dimension >= 2, "hashed bag-of-words dimension must be at least 2");
    let mut values = vec![0.0; dimension];
    for token in tokenize(text) {
        values[(fnv1a64(token.as_bytes()) % dimension as u64) as usize] += 1.0;
    }
    EmbeddingVector { values, provider: HASHED_BOW_TAG.to_string() }
}

/// Built-in offline provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBow {
    dimension: usize,
}

impl HashedBow {
    pub fn new(dimension: usize) -> Result<Self, String> {
        if dimension < 2 {
            return Err(format!("hashed-bow dimension must be >= 2, got {dimension}"));
        }
        Ok(Self { dimension })
    }
}

impl Default for HashedBow {
    fn default() -> Self {
        Self { dimension: DEFAULT_DIMENSION }
    }
}

impl SimilarityProvider for HashedBow {
    fn tag(&self) -> &str {
        HASHED_BOW_TAG
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        Ok(texts.iter().map(|t| embed_hashed_bow(t, self.dimension)).collect())
    }
}

/// Cosine similarity; 0.0 when either vector has zero norm.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, SimilarityError> {
    cosine_slices(u.values(), v.values())
}

pub fn cosine_slices(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    // sqrt of the product keeps cosine(v, v) at exactly 1.
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

/// Ratcliff-Obershelp ratio `2M / (|a| + |b|)` over the characters of the
/// normalized strings, where `M` counts characters in the recursively found
/// longest common blocks. Two empty strings score 1.
///
/// Greedy block matching depends on argument order ("tide"/"diet" gives 1
/// matched character one way and 2 the other), so `M` is the larger of the
/// two directions. This makes the ratio symmetric.
pub fn sequence_match_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = normalize(a).chars().collect();
    let b: Vec<char> = normalize(b).chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    let forward = SequenceMatcher::new(&a, &b).matched_count();
    let backward = SequenceMatcher::new(&b, &a).matched_count();
    2.0 * forward.max(backward) as f64 / total as f64
}

/// Block matcher over two sequences without junk heuristics.
pub struct SequenceMatcher<'a, T> {
    a: &'a [T],
    b: &'a [T],
    b2j: HashMap<&'a T, Vec<usize>>,
}

impl<'a, T: Eq + std::hash::Hash> SequenceMatcher<'a, T> {
    pub fn new(a: &'a [T], b: &'a [T]) -> Self {
        let mut b2j: HashMap<&T, Vec<usize>> = HashMap::new();
        for (j, x) in b.iter().enumerate() {
            b2j.entry(x).or_default().push(j);
        }
        Self { a, b, b2j }
    }

    /// Longest block `(i, j, k)` with `a[i..i+k] == b[j..j+k]` inside the
    /// window; ties go to the smallest `i`, then the smallest `j`.
    pub fn find_longest_match(&self, alo: usize, ahi: usize, blo: usize, bhi: usize) -> (usize, usize, usize) {
        let (mut besti, mut bestj, mut bestk) = (alo, blo, 0);
        // prev[j + 1] = length of the run ending at (i - 1, j).
        let mut prev = vec![0usize; self.b.len() + 1];
        let mut cur = vec![0usize; self.b.len() + 1];
        let mut prev_touched: Vec<usize> = Vec::new();
        let mut cur_touched: Vec<usize> = Vec::new();
        for i in alo..ahi {
            if let Some(js) = self.b2j.get(&self.a[i]) {
                let from = js.partition_point(|&j| j < blo);
                for &j in js[from..].iter().take_while(|&&j| j < bhi) {
                    let k = prev[j] + 1;
                    cur[j + 1] = k;
                    cur_touched.push(j + 1);
                    if k > bestk {
                        besti = i + 1 - k;
                        bestj = j + 1 - k;
                        bestk = k;
                    }
                }
            }
            for &t in &prev_touched {
                prev[t] = 0;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut prev_touched, &mut cur_touched);
            cur_touched.clear();
        }
        (besti, bestj, bestk)
    }

    pub fn matched_count(&self) -> usize {
        self.matching_blocks().iter().map(|m| m.2).sum()
    }

    /// Non-overlapping matching blocks in increasing order (no sentinel).
    pub fn matching_blocks(&self) -> Vec<(usize, usize, usize)> {
        let mut queue = vec![(0, self.a.len(), 0, self.b.len())];
        let mut blocks = Vec::new();
        while let Some((alo, ahi, blo, bhi)) = queue.pop() {
            let (i, j, k) = self.find_longest_match(alo, ahi, blo, bhi);
            if k == 0 {
                continue;
            }
            blocks.push((i, j, k));
            if alo < i && blo < j {
                queue.push((alo, i, blo, j));
            }
            if i + k < ahi && j + k < bhi {
                queue.push((i + k, ahi, j + k, bhi));
            }
        }
        blocks.sort_unstable();
        blocks
    }
}

impl fmt::Display for EmbeddingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.provider, self.values.len())
    }
}
