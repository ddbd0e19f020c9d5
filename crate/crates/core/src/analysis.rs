//! Text analysis shared by indexing and percolation.
//!
//! Both analyzers split on every non-alphanumeric character and lowercase.
//! The standard analyzer additionally folds diacritics (NFD, combining marks
//! dropped). Offsets are char indices into the original, unfolded input.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyzerMode {
    Standard,
    Acronym,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnalyzerSpec {
    pub name: String,
    pub mode: AnalyzerMode,
}

impl AnalyzerSpec {
    pub fn standard() -> Self {
        Self {
            name: "standard_analyzer".to_string(),
            mode: AnalyzerMode::Standard,
        }
    }

    pub fn acronym() -> Self {
        Self {
            name: "acronym_analyzer".to_string(),
            mode: AnalyzerMode::Acronym,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub position: usize,
    pub start_offset: usize,
    pub end_offset: usize,
}

/// Splits `text` into folded tokens according to `spec`.
pub fn analyze(text: &str, spec: &AnalyzerSpec) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;

    let flush = |raw: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if raw.is_empty() {
            return;
        }
        let folded = fold(raw, spec.mode);
        raw.clear();
        if !folded.is_empty() {
            tokens.push(Token {
                text: folded,
                position: tokens.len(),
                start_offset: start,
                end_offset: end,
            });
        }
    };

    let mut len = 0;
    for (i, c) in text.chars().enumerate() {
        if c.is_alphanumeric() {
            if current.is_empty() {
                start = i;
            }
            current.push(c);
        } else {
            flush(&mut current, start, i, &mut tokens);
        }
        len = i + 1;
    }
    flush(&mut current, start, len, &mut tokens);
    tokens
}

/// Folds one raw token. Only alphanumeric characters survive, so folded
/// text never contains a separator and re-analysis is stable.
pub fn fold(raw: &str, mode: AnalyzerMode) -> String {
    let lower = raw.to_lowercase();
    match mode {
        AnalyzerMode::Standard => lower.nfd().filter(|c| c.is_alphanumeric()).collect(),
        AnalyzerMode::Acronym => lower.chars().filter(|c| c.is_alphanumeric()).collect(),
    }
}

/// Analyzes `text` and returns only the token texts.
pub fn terms(text: &str, spec: &AnalyzerSpec) -> Vec<String> {
    analyze(text, spec).into_iter().map(|t| t.text).collect()
}

/// Canonical comparison key: standard-analyzed terms joined by single spaces.
pub fn normalize(text: &str) -> String {
    terms(text, &AnalyzerSpec::standard()).join(" ")
}

/// Returns the substring covered by a char-offset range.
pub fn slice_chars(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}
