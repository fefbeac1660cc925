//! Text normalization shared by extraction, similarity, penalties and metrics.
//!
//! A normalized string is NFC-composed, lowercased, has every run of
//! whitespace collapsed to a single ASCII space, and carries no punctuation
//! at either edge. Tokens are the whitespace-separated pieces of a normalized
//! string with edge punctuation removed; interior punctuation (`red-figure`,
//! `ca.450`) is kept.

use unicode_normalization::UnicodeNormalization;

/// True for characters trimmed from span and token edges.
pub fn is_edge_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Strips punctuation from both edges of `s`.
pub fn trim_edge_punct(s: &str) -> &str {
    s.trim_matches(is_edge_punct)
}

/// Normalizes `text`. Idempotent: `normalize(normalize(t)) == normalize(t)`.
pub fn normalize(text: &str) -> String {
    let composed: String = text.nfc().flat_map(char::to_lowercase).collect();
    // Lowercasing can produce decomposed sequences; recompose.
    let lowered: String = composed.nfc().collect();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    // Trimming punctuation may expose whitespace, and vice versa.
    let mut out = collapsed.as_str();
    loop {
        let next = trim_edge_punct(out).trim();
        if next.len() == out.len() {
            break;
        }
        out = next;
    }
    out.to_string()
}

/// Splits normalized text into tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    normalize(text).split(' ').map(trim_edge_punct).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

/// Splits text into sentences on `.`, `!`, `?` and `;`, dropping sentences
/// that contain no tokens.
pub fn sentences(text: &str) -> Vec<String> {
    normalize(text).split(['.', '!', '?', ';']).map(normalize).filter(|s| !tokenize(s).is_empty()).collect()
}
