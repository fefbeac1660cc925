//! Vase dataset manifests: schema, JSONL persistence and validation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::Dimension;
use crate::text::normalize;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("schema error in entry {vase_id:?}: {reason}")]
    Schema { vase_id: String, reason: String },
    #[error("manifest has no entries")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Fabric,
    Technique,
    Shape,
    Caption,
    Dating,
    Decoration,
    Attribution,
    Provenance,
}

impl QuestionType {
    pub const ALL: [QuestionType; 8] = [
        QuestionType::Fabric,
        QuestionType::Technique,
        QuestionType::Shape,
        QuestionType::Caption,
        QuestionType::Dating,
        QuestionType::Decoration,
        QuestionType::Attribution,
        QuestionType::Provenance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Fabric => "fabric",
            QuestionType::Technique => "technique",
            QuestionType::Shape => "shape",
            QuestionType::Caption => "caption",
            QuestionType::Dating => "dating",
            QuestionType::Decoration => "decoration",
            QuestionType::Attribution => "attribution",
            QuestionType::Provenance => "provenance",
        }
    }

    /// The reward dimension this question type verifies, if any.
    pub fn dimension(self) -> Option<Dimension> {
        match self {
            QuestionType::Fabric => Some(Dimension::Fabric),
            QuestionType::Technique => Some(Dimension::Technique),
            QuestionType::Shape => Some(Dimension::Shape),
            QuestionType::Dating => Some(Dimension::Dating),
            QuestionType::Decoration => Some(Dimension::Decoration),
            QuestionType::Attribution => Some(Dimension::Attribution),
            QuestionType::Caption | QuestionType::Provenance => None,
        }
    }

    /// Question text for attribute types: "What is the fabric of the vase?".
    pub fn template(self) -> Option<String> {
        self.dimension().map(|_| format!("What is the {} of the vase?", self.as_str()))
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewRef {
    pub view_id: String,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAPair {
    pub question_type: QuestionType,
    pub question: String,
    pub answer: String,
}

/// One vase with its rendered views, QA pairs and enhanced caption.
///
/// Field order here is the canonical JSONL field order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaseEntry {
    pub vase_id: String,
    pub views: Vec<ViewRef>,
    pub qa_pairs: Vec<QAPair>,
    pub caption: String,
    #[serde(default)]
    pub split: Option<Split>,
}

impl VaseEntry {
    pub fn qa(&self, question_type: QuestionType) -> impl Iterator<Item = &QAPair> {
        self.qa_pairs.iter().filter(move |qa| qa.question_type == question_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<VaseEntry>,
    pub source: String,
    pub schema_version: String,
}

impl DatasetManifest {
    pub fn new(entries: Vec<VaseEntry>, source: impl Into<String>) -> Self {
        Self { entries, source: source.into(), schema_version: SCHEMA_VERSION.to_string() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, vase_id: &str) -> Option<&VaseEntry> {
        self.entries.iter().find(|e| e.vase_id == vase_id)
    }

    /// Index from vase id to entry. Later duplicates are ignored.
    pub fn index(&self) -> HashMap<&str, &VaseEntry> {
        let mut map = HashMap::with_capacity(self.entries.len());
        for e in &self.entries {
            map.entry(e.vase_id.as_str()).or_insert(e);
        }
        map
    }

    pub fn question_type_counts(&self) -> BTreeMap<QuestionType, usize> {
        let mut counts: BTreeMap<QuestionType, usize> = QuestionType::ALL.iter().map(|&q| (q, 0)).collect();
        for qa in self.entries.iter().flat_map(|e| &e.qa_pairs) {
            *counts.entry(qa.question_type).or_default() += 1;
        }
        counts
    }

    pub fn total_qa(&self) -> usize {
        self.entries.iter().map(|e| e.qa_pairs.len()).sum()
    }

    pub fn mean_qa_per_entry(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.total_qa() as f64 / self.entries.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    DuplicateId { vase_id: String, count: usize },
    EmptyVaseId { index: usize },
    NoViews { vase_id: String },
    DuplicateQuestionType { vase_id: String, question_type: QuestionType },
    EmptyAnswer { vase_id: String, question_type: QuestionType },
    QuestionTemplate { vase_id: String, question_type: QuestionType, question: String },
}

impl Finding {
    /// Structural problems that make a manifest unusable.
    pub fn is_fatal(&self) -> bool {
        matches!(self, Finding::DuplicateId { .. } | Finding::EmptyVaseId { .. } | Finding::NoViews { .. })
    }

    fn vase_id(&self) -> String {
        match self {
            Finding::EmptyVaseId { index } => format!("#{index}"),
            Finding::DuplicateId { vase_id, .. }
            | Finding::NoViews { vase_id }
            | Finding::DuplicateQuestionType { vase_id, .. }
            | Finding::EmptyAnswer { vase_id, .. }
            | Finding::QuestionTemplate { vase_id, .. } => vase_id.clone(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DuplicateId { vase_id, count } => {
                write!(f, "vase_id {vase_id:?} appears {count} times")
            }
            Finding::EmptyVaseId { index } => write!(f, "entry #{index} has an empty vase_id"),
            Finding::NoViews { vase_id } => write!(f, "{vase_id}: no views"),
            Finding::DuplicateQuestionType { vase_id, question_type } => {
                write!(f, "{vase_id}: more than one {question_type} question")
            }
            Finding::EmptyAnswer { vase_id, question_type } => {
                write!(f, "{vase_id}: empty {question_type} answer")
            }
            Finding::QuestionTemplate { vase_id, question_type, question } => {
                write!(f, "{vase_id}: {question_type} question does not follow the template: {question:?}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn fatal(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.is_fatal())
    }
}

/// Lists every problem in `manifest` without modifying it.
pub fn validate_manifest(manifest: &DatasetManifest) -> ValidationReport {
    let mut findings = Vec::new();

    let mut id_counts: HashMap<&str, usize> = HashMap::new();
    for e in &manifest.entries {
        *id_counts.entry(e.vase_id.as_str()).or_default() += 1;
    }
    let mut reported = HashSet::new();
    for (index, e) in manifest.entries.iter().enumerate() {
        if e.vase_id.is_empty() {
            findings.push(Finding::EmptyVaseId { index });
            continue;
        }
        let count = id_counts[e.vase_id.as_str()];
        if count > 1 && reported.insert(e.vase_id.as_str()) {
            findings.push(Finding::DuplicateId { vase_id: e.vase_id.clone(), count });
        }
    }

    for e in &manifest.entries {
        if e.vase_id.is_empty() {
            continue;
        }
        if e.views.is_empty() {
            findings.push(Finding::NoViews { vase_id: e.vase_id.clone() });
        }
        let mut seen = HashSet::new();
        let mut dup_reported = HashSet::new();
        for qa in &e.qa_pairs {
            if !seen.insert(qa.question_type) && dup_reported.insert(qa.question_type) {
                findings.push(Finding::DuplicateQuestionType {
                    vase_id: e.vase_id.clone(),
                    question_type: qa.question_type,
                });
            }
            if qa.answer.trim().is_empty() {
                findings.push(Finding::EmptyAnswer { vase_id: e.vase_id.clone(), question_type: qa.question_type });
            }
            if let Some(template) = qa.question_type.template() {
                if normalize(&qa.question) != normalize(&template) {
                    findings.push(Finding::QuestionTemplate {
                        vase_id: e.vase_id.clone(),
                        question_type: qa.question_type,
                        question: qa.question.clone(),
                    });
                }
            }
        }
    }

    ValidationReport { findings }
}

/// Parses JSONL from a reader. Blank lines are skipped; line numbers are 1-based.
pub fn parse_manifest<R: BufRead>(reader: R, source: &str) -> Result<DatasetManifest, ManifestError> {
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source_err| ManifestError::Io { path: source.to_string(), source: source_err })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: VaseEntry =
            serde_json::from_str(&line).map_err(|e| ManifestError::Parse { line: i + 1, reason: e.to_string() })?;
        entries.push(entry);
    }
    let manifest = DatasetManifest::new(entries, source);
    if manifest.is_empty() {
        return Err(ManifestError::Empty);
    }
    let report = validate_manifest(&manifest);
    if let Some(f) = report.fatal().next() {
        return Err(ManifestError::Schema { vase_id: f.vase_id(), reason: f.to_string() });
    }
    Ok(manifest)
}

/// Loads and validates a JSONL manifest.
///
/// Structural problems (empty or duplicate ids, entries without views) fail
/// the load. Softer findings such as duplicate question types are left for
/// [`validate_manifest`] to report.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, ManifestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ManifestError::Io { path: path.display().to_string(), source })?;
    parse_manifest(BufReader::new(file), &path.display().to_string())
}

/// Writes entries as canonical JSONL, one entry per line.
pub fn write_manifest<W: Write>(manifest: &DatasetManifest, mut writer: W) -> io::Result<()> {
    for e in &manifest.entries {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let io_err = |source| ManifestError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    write_manifest(manifest, BufWriter::new(file)).map_err(io_err)
}
