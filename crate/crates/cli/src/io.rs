//! Input reading, per-record error reporting and atomic output writes.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;

/// Bad invocation, bad config or missing input. Exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Unwraps an optional path flag that the subcommand needs.
pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    value.as_deref().ok_or_else(|| usage(format!("missing required flag {flag}")))
}

pub fn require_input(path: &Path) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file not found: {}", path.display())))
    }
}

/// Refuses to overwrite any input with an output.
pub fn check_distinct(inputs: &[&Path], outputs: &[&Path]) -> anyhow::Result<()> {
    let canon = |p: &Path| -> PathBuf {
        if let Ok(c) = p.canonicalize() {
            return c;
        }
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        match (parent.canonicalize(), p.file_name()) {
            (Ok(dir), Some(name)) => dir.join(name),
            _ => p.to_path_buf(),
        }
    };
    let ins: Vec<PathBuf> = inputs.iter().map(|p| canon(p)).collect();
    let mut outs: Vec<PathBuf> = Vec::new();
    for o in outputs {
        let c = canon(o);
        if ins.contains(&c) {
            return Err(usage(format!("output {} would overwrite an input", o.display())));
        }
        if outs.contains(&c) {
            return Err(usage(format!("output {} given twice", o.display())));
        }
        outs.push(c);
    }
    Ok(())
}

/// One rejected input record.
#[derive(Debug)]
pub struct RecordError {
    pub source: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.source, self.line, self.message)
    }
}

/// Collects record errors and prints them as they arrive.
#[derive(Debug, Default)]
pub struct ErrorLog {
    pub count: usize,
}

impl ErrorLog {
    pub fn report(&mut self, err: &RecordError) {
        eprintln!("error: {err}");
        self.count += 1;
    }
}

/// Records with their 1-based line numbers, and the lines that failed.
pub type Parsed<T> = (Vec<(usize, T)>, Vec<RecordError>);

/// Parses a JSONL file line by line. Blank lines are skipped; lines that do
/// not parse are returned as errors instead of aborting the read.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Parsed<T>> {
    require_input(path)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let source = path.display().to_string();
    let (mut ok, mut bad) = (Vec::new(), Vec::new());
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {source}"))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => ok.push((i + 1, v)),
            Err(e) => bad.push(RecordError { source: source.clone(), line: i + 1, message: e.to_string() }),
        }
    }
    Ok((ok, bad))
}

/// Writes to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !dir.is_dir() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn jsonl<T: serde::Serialize>(rows: impl IntoIterator<Item = T>) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn pretty_json<T: serde::Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}
