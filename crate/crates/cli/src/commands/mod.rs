pub mod advantage;
pub mod evaluate;
pub mod filter;
pub mod human_eval;
pub mod reward;
pub mod split;
pub mod synth;
pub mod validate;

use vasekit_core::similarity::{HashedBow, SimilarityProvider};
use vasekit_scorer::RemoteProvider;

use crate::config::{AppConfig, ProviderKind};
use crate::io::usage;

pub fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

pub fn unit_interval(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if (0.0..=1.0).contains(&x) => Ok(x),
        Ok(x) => Err(format!("{x} is outside [0, 1]")),
        Err(_) => Err(format!("expected a number, got {s:?}")),
    }
}

pub fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("expected a non-negative number, got {s:?}")),
    }
}

pub fn finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a finite number, got {s:?}")),
    }
}

/// Comma-separated list of exactly `N` numbers.
pub fn fixed_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = finite(p)?;
    }
    Ok(out)
}

pub fn build_provider(cfg: &AppConfig) -> anyhow::Result<Box<dyn SimilarityProvider>> {
    Ok(match cfg.provider {
        ProviderKind::HashedBow => Box::new(HashedBow::new(cfg.embedding_dimension).map_err(usage)?),
        ProviderKind::Remote => Box::new(
            RemoteProvider::connect(cfg.scorer.clone())
                .map_err(|e| usage(format!("embedding service at {}: {e}", cfg.scorer.base_url)))?,
        ),
    })
}

/// One-line run summary on stderr.
pub fn summary(command: &str, ok: usize, total: usize, noun: &str, errors: usize) {
    eprintln!("{command}: {ok} of {total} {noun} processed, {errors} error(s)");
}
