//! Lexicon-driven decomposition of text into dimension slots.
//!
//! Generated captions are matched against per-dimension phrase lists (plus
//! date patterns for [`Dimension::Dating`]); ground-truth slots come straight
//! from a vase's attribute QA answers.

use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::{Dimension, DimensionSlots};
use crate::manifest::VaseEntry;
use crate::text::{is_edge_punct, normalize};

const DEFAULT_LEXICON: &str = include_str!("../data/default_lexicon.json");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed lexicon: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("lexicon has no rules for {0}")]
    NoRules(Dimension),
    #[error("{dimension} rule {rule:?} is not a lowercase normalized phrase")]
    BadPhrase { dimension: Dimension, rule: String },
    #[error("dating pattern {pattern:?}: {reason}")]
    BadPattern { pattern: String, reason: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SlotError {
    #[error("entry {vase_id} has more than one {dimension} question")]
    DuplicateAttribute { vase_id: String, dimension: Dimension },
}

/// On-disk lexicon layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconFile {
    pub fabric: Vec<String>,
    pub technique: Vec<String>,
    pub shape: Vec<String>,
    pub dating_patterns: Vec<String>,
    pub decoration: Vec<String>,
    pub attribution: Vec<String>,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    version: String,
    phrases: [Vec<String>; 6],
    dating_patterns: Vec<Regex>,
}

impl Lexicon {
    /// Greek-pottery vocabulary shipped with the crate.
    pub fn default_greek() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, LexiconError> {
        Self::from_file(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn from_file(file: LexiconFile) -> Result<Self, LexiconError> {
        let mut phrases: [Vec<String>; 6] = Default::default();
        for (dim, list) in [
            (Dimension::Fabric, file.fabric),
            (Dimension::Technique, file.technique),
            (Dimension::Shape, file.shape),
            (Dimension::Decoration, file.decoration),
            (Dimension::Attribution, file.attribution),
        ] {
            if list.is_empty() {
                return Err(LexiconError::NoRules(dim));
            }
            for rule in &list {
                if rule.is_empty() || normalize(rule) != *rule {
                    return Err(LexiconError::BadPhrase { dimension: dim, rule: rule.clone() });
                }
            }
            phrases[dim.index()] = list;
        }

        if file.dating_patterns.is_empty() {
            return Err(LexiconError::NoRules(Dimension::Dating));
        }
        let dating_patterns = file
            .dating_patterns
            .iter()
            .map(|p| {
                let re = Regex::new(p)
                    .map_err(|e| LexiconError::BadPattern { pattern: p.clone(), reason: e.to_string() })?;
                if re.is_match("") {
                    return Err(LexiconError::BadPattern {
                        pattern: p.clone(),
                        reason: "matches the empty string".into(),
                    });
                }
                Ok(re)
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Self { version: file.version, phrases, dating_patterns })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn phrases(&self, dim: Dimension) -> &[String] {
        &self.phrases[dim.index()]
    }

    pub fn dating_patterns(&self) -> &[Regex] {
        &self.dating_patterns
    }

    /// Byte spans of `normalized` matched by `dim`'s rules, merged where
    /// they overlap and trimmed of edge punctuation, in text order.
    pub fn spans(&self, dim: Dimension, normalized: &str) -> Vec<(usize, usize)> {
        let mut raw = Vec::new();
        for phrase in self.phrases(dim) {
            for (start, m) in normalized.match_indices(phrase.as_str()) {
                let end = start + m.len();
                if on_word_boundary(normalized, start, end) {
                    raw.push((start, end));
                }
            }
        }
        if dim == Dimension::Dating {
            for re in &self.dating_patterns {
                collect_overlapping(re, normalized, &mut raw);
            }
        }
        merge_and_trim(normalized, raw)
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::default_greek()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn on_word_boundary(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char)
}

/// Leftmost match at or after every start position, so a match swallowed by
/// an earlier overlapping one is still seen.
fn collect_overlapping(re: &Regex, text: &str, out: &mut Vec<(usize, usize)>) {
    let mut at = 0;
    while at <= text.len() {
        let Some(m) = re.find_at(text, at) else { break };
        if m.end() > m.start() {
            out.push((m.start(), m.end()));
        }
        match text[m.start()..].chars().next() {
            Some(c) => at = m.start() + c.len_utf8(),
            None => break,
        }
    }
}

fn merge_and_trim(text: &str, mut spans: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    spans.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s < last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
        .into_iter()
        .filter_map(|(s, e)| {
            let piece = &text[s..e];
            let lead = piece.len() - piece.trim_start_matches(|c: char| is_edge_punct(c) || c.is_whitespace()).len();
            let trimmed = piece.trim_matches(|c: char| is_edge_punct(c) || c.is_whitespace());
            if trimmed.is_empty() {
                None
            } else {
                Some((s + lead, s + lead + trimmed.len()))
            }
        })
        .collect()
}

/// Matched spans per dimension, as strings of the normalized text.
pub fn extract_spans(text: &str, lexicon: &Lexicon) -> [Vec<String>; 6] {
    let normalized = normalize(text);
    Dimension::ALL
        .map(|dim| lexicon.spans(dim, &normalized).into_iter().map(|(s, e)| normalized[s..e].to_string()).collect())
}

/// Decomposes free text into dimension slots. Each slot is the space-joined
/// sequence of that dimension's matched spans; dimensions without a match
/// stay absent.
pub fn extract_slots(text: &str, lexicon: &Lexicon) -> DimensionSlots {
    let spans = extract_spans(text, lexicon);
    let mut slots = DimensionSlots::default();
    for dim in Dimension::ALL {
        slots.set(dim, spans[dim.index()].join(" "));
    }
    slots
}

/// Ground-truth slots from an entry's attribute QA answers.
pub fn target_slots_from_qa(entry: &VaseEntry) -> Result<DimensionSlots, SlotError> {
    let mut slots = DimensionSlots::default();
    let mut seen = [false; 6];
    for qa in &entry.qa_pairs {
        let Some(dim) = qa.question_type.dimension() else { continue };
        if std::mem::replace(&mut seen[dim.index()], true) {
            return Err(SlotError::DuplicateAttribute { vase_id: entry.vase_id.clone(), dimension: dim });
        }
        slots.set(dim, normalize(&qa.answer));
    }
    Ok(slots)
}
