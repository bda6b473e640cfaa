//! Normalize raw text with the default rules and with digits kept.

use sparse_interp::textprep::{normalize_text, tokenize, NormalizationRules};

fn main() {
    let raw = "The BRAF-V600E mutation, seen in ~50% of tumours (2019)...";
    let rules = NormalizationRules::default();
    println!("default:     {}", normalize_text(raw, rules));
    let keep_digits = NormalizationRules { collapse_numbers: false, ..rules };
    println!("keep digits: {}", normalize_text(raw, keep_digits));
    println!("tokens:      {:?}", tokenize(raw, rules));
}
