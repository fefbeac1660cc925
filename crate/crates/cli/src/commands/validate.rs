use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use vasekit_core::manifest::{validate_manifest, DatasetManifest, VaseEntry};

use crate::io::{require_input, required, ErrorLog, RecordError};

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
}

/// Reports every problem in the manifest instead of stopping at the first.
/// Parse failures and structural findings fail the run; the rest are warnings.
pub fn run(args: &ValidateArgs) -> anyhow::Result<usize> {
    let path = required(&args.manifest, "--manifest")?;
    require_input(path)?;
    let source = path.display().to_string();
    let file = File::open(path).with_context(|| format!("opening {source}"))?;

    let mut log = ErrorLog::default();
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {source}"))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<VaseEntry>(&line) {
            Ok(e) => entries.push(e),
            Err(e) => log.report(&RecordError { source: source.clone(), line: i + 1, message: e.to_string() }),
        }
    }
    let manifest = DatasetManifest::new(entries, source);
    let report = validate_manifest(&manifest);
    for f in &report.findings {
        if f.is_fatal() {
            eprintln!("error: {f}");
            log.count += 1;
        } else {
            eprintln!("warning: {f}");
        }
    }

    println!("entries: {}", manifest.len());
    println!("qa pairs: {}", manifest.total_qa());
    println!("mean qa per entry: {:.2}", manifest.mean_qa_per_entry());
    for (t, n) in manifest.question_type_counts() {
        println!("  {t}: {n}");
    }
    println!("findings: {} ({} fatal)", report.findings.len(), report.fatal().count());
    if manifest.is_empty() && log.count == 0 {
        eprintln!("error: manifest has no entries");
        log.count += 1;
    }
    Ok(log.count)
}
