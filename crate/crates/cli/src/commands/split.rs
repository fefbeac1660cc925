use std::path::{Path, PathBuf};

use clap::Args;
use vasekit_core::manifest::{load_manifest, write_manifest};
use vasekit_core::split::split_dataset;

use super::fixed_list;
use crate::config::AppConfig;
use crate::io::{check_distinct, pretty_json, require_input, required, usage, write_atomic};

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Assignment JSON (vase_id -> split). A `.summary.json` sidecar is written next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Copy of the manifest with each entry's split filled in.
    #[arg(long, value_name = "PATH")]
    manifest_out: Option<PathBuf>,
    /// train,val,test fractions.
    #[arg(long, value_parser = fixed_list::<3>)]
    ratios: Option<[f64; 3]>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SplitArgs {
    pub fn apply(&self, cfg: &mut AppConfig) {
        if let Some(r) = self.ratios {
            cfg.split.ratios = r;
        }
        if let Some(s) = self.seed {
            cfg.split.seed = s;
        }
    }
}

pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "split".into());
    out.with_file_name(format!("{stem}.summary.json"))
}

pub fn run(args: &SplitArgs, cfg: &AppConfig) -> anyhow::Result<usize> {
    let manifest_path = required(&args.manifest, "--manifest")?;
    let out = required(&args.out, "--out")?;
    require_input(manifest_path)?;
    let sidecar = summary_path(out);
    let mut outputs = vec![out, sidecar.as_path()];
    outputs.extend(args.manifest_out.as_deref());
    check_distinct(&[manifest_path], &outputs)?;

    let manifest = load_manifest(manifest_path)?;
    let assignment = split_dataset(&manifest, cfg.split.ratios, cfg.split.seed).map_err(|e| usage(e.to_string()))?;
    let summary = assignment.summary();
    write_atomic(out, &pretty_json(&assignment.assignment)?)?;
    write_atomic(&sidecar, &pretty_json(&summary)?)?;
    if let Some(path) = &args.manifest_out {
        let mut buf = Vec::new();
        write_manifest(&assignment.apply(&manifest), &mut buf)?;
        write_atomic(path, &buf)?;
    }
    println!("train={} val={} test={} seed={}", summary.train, summary.val, summary.test, summary.seed);
    Ok(0)
}
