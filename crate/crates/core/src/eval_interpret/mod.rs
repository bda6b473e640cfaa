//! Interpretability instrumentation.
//!
//! The category-overlap score works per (dimension `i`, category `j`):
//!
//! ```text
//! IS⁺_ij = 100 · |S_j ∩ top_i(γ·n_j)|    / n_j
//! IS⁻_ij = 100 · |S_j ∩ bottom_i(γ·n_j)| / n_j
//! IS_ij  = max(IS⁺_ij, IS⁻_ij)
//! IS_i   = max_j IS_ij
//! IS     = mean_i IS_i
//! ```
//!
//! Rankings within a dimension break ties by vocabulary index, everywhere
//! in this module: among equal values the earlier word ranks first in both
//! directions.

mod coherence;
mod heatmap;
mod intrusion;

use std::io::Write;

use rayon::prelude::*;

pub use coherence::{
    activity_threshold, coherence_score, hyperparam_search, write_search_csv, SearchRecord, TrainerConfig,
};
pub use heatmap::{build_heatmap, export_heatmap, write_heatmap_csv, write_heatmap_svg, HeatmapSpec, SignClass};
pub use intrusion::{
    check_question, generate_intrusion_questions, write_questions, IntrusionBands, IntrusionQuestion, MAX_RETRIES,
};

use crate::embed_io::{CategoryDataset, EmbeddingMatrix};
use crate::error::{Error, Result};

/// Which end of a dimension to read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Largest values first.
    Positive,
    /// Smallest values first.
    Negative,
}

impl Direction {
    pub fn symbol(self) -> char {
        match self {
            Direction::Positive => '+',
            Direction::Negative => '-',
        }
    }
}

fn check_dim(emb: &EmbeddingMatrix, dim: usize) -> Result<()> {
    if dim >= emb.dim() {
        return Err(Error::InvalidValue(format!(
            "dimension {dim} out of range (embedding has {})",
            emb.dim()
        )));
    }
    Ok(())
}

/// Numeric order on finite values; `-0.0` and `0.0` compare equal.
pub(crate) fn numeric_cmp(a: f64, b: f64) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
}

/// Every word index of `dim`, in rank order for `direction`.
pub(crate) fn ranking(emb: &EmbeddingMatrix, dim: usize, direction: Direction) -> Vec<usize> {
    let vals = emb.values();
    let mut order: Vec<usize> = (0..emb.len()).collect();
    match direction {
        Direction::Positive => order.sort_by(|&a, &b| numeric_cmp(vals.get(b, dim), vals.get(a, dim))),
        Direction::Negative => order.sort_by(|&a, &b| numeric_cmp(vals.get(a, dim), vals.get(b, dim))),
    }
    order
}

/// `position[w]` = rank of word `w` (0-based) in `order`.
pub(crate) fn positions(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (rank, &w) in order.iter().enumerate() {
        pos[w] = rank;
    }
    pos
}

/// Indices of the `count` top-ranked words of `dim`.
pub fn top_word_indices(emb: &EmbeddingMatrix, dim: usize, count: usize, direction: Direction) -> Result<Vec<usize>> {
    check_dim(emb, dim)?;
    if count == 0 || count > emb.len() {
        return Err(Error::InvalidValue(format!(
            "count {count} must lie in 1..={}",
            emb.len()
        )));
    }
    let mut order = ranking(emb, dim, direction);
    order.truncate(count);
    Ok(order)
}

pub fn top_words(emb: &EmbeddingMatrix, dim: usize, count: usize, direction: Direction) -> Result<Vec<String>> {
    Ok(top_word_indices(emb, dim, count, direction)?
        .into_iter()
        .map(|i| emb.word(i).to_owned())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairScore {
    pub plus: f64,
    pub minus: f64,
    pub score: f64,
}

fn resolve(emb: &EmbeddingMatrix, words: &[String]) -> Result<Vec<usize>> {
    words.iter().map(|w| emb.require(w)).collect()
}

fn window(gamma: usize, n: usize, vocab: usize) -> Result<usize> {
    let w = gamma * n;
    if w > vocab {
        return Err(Error::InvalidValue(format!(
            "window γ·n = {gamma}·{n} = {w} exceeds the vocabulary size {vocab}"
        )));
    }
    Ok(w)
}

fn overlap_percent(members: &[usize], pos: &[usize], window: usize) -> f64 {
    let hits = members.iter().filter(|&&w| pos[w] < window).count();
    100.0 * hits as f64 / members.len() as f64
}

/// Score of one (category, dimension) pair. Category words must be in the
/// vocabulary.
pub fn interpretability_pair_score(
    emb: &EmbeddingMatrix,
    category: &[String],
    dim: usize,
    gamma: usize,
) -> Result<PairScore> {
    check_dim(emb, dim)?;
    if category.is_empty() {
        return Err(Error::EmptyInput("empty category".into()));
    }
    if gamma == 0 {
        return Err(Error::Config("gamma must be a positive integer".into()));
    }
    let members = resolve(emb, category)?;
    let w = window(gamma, members.len(), emb.len())?;
    let plus = overlap_percent(&members, &positions(&ranking(emb, dim, Direction::Positive)), w);
    let minus = overlap_percent(&members, &positions(&ranking(emb, dim, Direction::Negative)), w);
    Ok(PairScore {
        plus,
        minus,
        score: plus.max(minus),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionScore {
    pub dimension: usize,
    /// `IS_i`, in `[0, 100]`.
    pub score: f64,
    /// First category (in name order) attaining the maximum.
    pub best_category: String,
    /// `Positive` when `IS⁺ ≥ IS⁻` for the best category.
    pub sign: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpretabilityResult {
    pub gamma: usize,
    pub per_dimension: Vec<DimensionScore>,
    /// Mean of `IS_i` over all dimensions.
    pub overall: f64,
}

/// Scores every dimension against every category. The dataset must already
/// be restricted to the embedding's vocabulary
/// ([`CategoryDataset::restrict_to`]).
pub fn interpretability_score(emb: &EmbeddingMatrix, dataset: &CategoryDataset, gamma: usize) -> Result<InterpretabilityResult> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("category dataset is empty".into()));
    }
    if gamma == 0 {
        return Err(Error::Config("gamma must be a positive integer".into()));
    }
    let mut groups = Vec::with_capacity(dataset.len());
    for (name, words) in dataset.groups() {
        let members = resolve(emb, words)?;
        let w = window(gamma, members.len(), emb.len())?;
        groups.push((name, members, w));
    }
    let per_dimension: Vec<DimensionScore> = (0..emb.dim())
        .into_par_iter()
        .map(|dim| {
            let top = positions(&ranking(emb, dim, Direction::Positive));
            let bottom = positions(&ranking(emb, dim, Direction::Negative));
            let mut best = DimensionScore {
                dimension: dim,
                score: -1.0,
                best_category: String::new(),
                sign: Direction::Positive,
            };
            for (name, members, w) in &groups {
                let plus = overlap_percent(members, &top, *w);
                let minus = overlap_percent(members, &bottom, *w);
                let score = plus.max(minus);
                if score > best.score {
                    best.score = score;
                    best.best_category = (*name).to_owned();
                    best.sign = if plus >= minus { Direction::Positive } else { Direction::Negative };
                }
            }
            best
        })
        .collect();
    let overall = per_dimension.iter().map(|d| d.score).sum::<f64>() / per_dimension.len() as f64;
    Ok(InterpretabilityResult {
        gamma,
        per_dimension,
        overall,
    })
}

/// Overall IS for `γ = 1..=max_gamma`, stopping at the first γ whose window
/// no longer fits the vocabulary.
pub fn gamma_profile(emb: &EmbeddingMatrix, dataset: &CategoryDataset, max_gamma: usize) -> Result<Vec<(usize, f64)>> {
    let largest = dataset.groups().map(|(_, w)| w.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    for gamma in 1..=max_gamma {
        if gamma * largest > emb.len() {
            break;
        }
        out.push((gamma, interpretability_score(emb, dataset, gamma)?.overall));
    }
    Ok(out)
}

/// `dimension,IS_i,best_category,sign` rows.
pub fn write_is_report_csv<W: Write>(result: &InterpretabilityResult, mut out: W) -> Result<()> {
    writeln!(out, "dimension,IS_i,best_category,sign")?;
    for d in &result.per_dimension {
        writeln!(out, "{},{:.4},{},{}", d.dimension, d.score, d.best_category, d.sign.symbol())?;
    }
    out.flush()?;
    Ok(())
}

/// The argmax dimension of `word`'s vector (first on ties) and the `top_k`
/// highest words in it.
pub fn dominating_dimension(emb: &EmbeddingMatrix, word: &str, top_k: usize) -> Result<(usize, Vec<String>)> {
    let i = emb.require(word)?;
    let row = emb.row(i);
    let mut best = 0;
    for (d, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = d;
        }
    }
    let words = top_words(emb, best, top_k.min(emb.len()), Direction::Positive)?;
    Ok((best, words))
}

/// `word,dimension,top_words` with the top words space-separated.
pub fn write_top_words_report<W: Write>(rows: &[(String, usize, Vec<String>)], mut out: W) -> Result<()> {
    writeln!(out, "word,dimension,top_words")?;
    for (word, dim, top) in rows {
        writeln!(out, "{word},{dim},{}", top.join(" "))?;
    }
    out.flush()?;
    Ok(())
}
