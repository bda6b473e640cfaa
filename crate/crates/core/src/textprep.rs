//! Corpus normalization.
//!
//! Rules run in a fixed order: punctuation, then digits, then case. A
//! "punctuation" character is anything in Unicode general categories P
//! (punctuation) or S (symbols); each is replaced by a space. A "number" is a
//! maximal run of ASCII digits and becomes the single character `0`. Since
//! punctuation goes first, `2.5` turns into `0 0`. Whitespace runs are then
//! collapsed to one space and the ends trimmed.

use std::sync::OnceLock;

use regex::Regex;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormalizationRules {
    pub strip_punctuation: bool,
    pub collapse_numbers: bool,
    pub lowercase: bool,
}

impl Default for NormalizationRules {
    fn default() -> Self {
        NormalizationRules {
            strip_punctuation: true,
            collapse_numbers: true,
            lowercase: true,
        }
    }
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{P}\p{S}]").expect("valid punctuation class"))
}

fn digit_run() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[0-9]+").expect("valid digit class"))
}

pub fn normalize_text(raw: &str, rules: NormalizationRules) -> String {
    let mut text = raw.to_owned();
    if rules.strip_punctuation {
        text = punctuation().replace_all(&text, " ").into_owned();
    }
    if rules.collapse_numbers {
        text = digit_run().replace_all(&text, "0").into_owned();
    }
    if rules.lowercase {
        text = text.to_lowercase();
    }
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalizes and splits on whitespace.
pub fn tokenize(raw: &str, rules: NormalizationRules) -> Vec<String> {
    normalize_text(raw, rules)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}
