//! Coherence of the top words of a probe word's active dimensions, measured
//! in the original dense space, and the grid search built on it.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use super::{ranking, Direction};
use crate::embed_io::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numcore::cosine_similarity;
use crate::spine::{spine_train, spine_transform, SpineConfig};
use crate::spowv::{spowv_fit, SpowvConfig};
use crate::ZERO_EPS;

/// Magnitude a value must exceed to count as active.
///
/// Non-negative spaces: [`ZERO_EPS`]. Signed spaces: the 95th percentile
/// (nearest rank) of all absolute values.
pub fn activity_threshold(emb: &EmbeddingMatrix) -> f64 {
    if emb.is_non_negative() {
        return ZERO_EPS;
    }
    let mut mags: Vec<f64> = emb.values().as_slice().iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let rank = ((0.95 * mags.len() as f64).ceil() as usize).clamp(1, mags.len());
    mags[rank - 1]
}

/// For each probe word and each dimension where it is active, sums the dense
/// cosine similarity over all unordered pairs of that dimension's `top_k`
/// words (read from the end the probe word's value points to). Returns the
/// grand total.
pub fn coherence_score(
    sparse: &EmbeddingMatrix,
    dense: &EmbeddingMatrix,
    probe_words: &[String],
    top_k: usize,
) -> Result<f64> {
    if probe_words.is_empty() {
        return Err(Error::EmptyInput("no probe words".into()));
    }
    if top_k == 0 {
        return Err(Error::Config("top_k must be positive".into()));
    }
    let probes: Vec<usize> = probe_words
        .iter()
        .map(|w| {
            dense.require(w)?;
            sparse.require(w)
        })
        .collect::<Result<_>>()?;
    let threshold = activity_threshold(sparse);
    let k = top_k.min(sparse.len());

    // (dimension, direction) pairs in probe order, then dimension order.
    let mut wanted = Vec::new();
    for &p in &probes {
        for (dim, &v) in sparse.row(p).iter().enumerate() {
            if v.abs() > threshold {
                let dir = if v > 0.0 { Direction::Positive } else { Direction::Negative };
                wanted.push((dim, dir));
            }
        }
    }
    let sums: Vec<Result<f64>> = wanted
        .par_iter()
        .map(|&(dim, dir)| {
            let mut order = ranking(sparse, dim, dir);
            order.truncate(k);
            let vecs: Vec<&[f64]> = order
                .iter()
                .map(|&i| dense.vector(sparse.word(i)).ok_or_else(|| Error::OutOfVocabulary(sparse.word(i).to_owned())))
                .collect::<Result<_>>()?;
            let mut s = 0.0;
            for a in 0..vecs.len() {
                for b in a + 1..vecs.len() {
                    s += cosine_similarity(vecs[a], vecs[b])?;
                }
            }
            Ok(s)
        })
        .collect();
    let mut total = 0.0;
    for s in sums {
        total += s?;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainerConfig {
    Spowv(SpowvConfig),
    Spine(SpineConfig),
}

impl TrainerConfig {
    /// Trains on `x` and returns the sparse embedding.
    pub fn train(&self, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        match self {
            TrainerConfig::Spowv(c) => spowv_fit(x, c)?.embedding(x),
            TrainerConfig::Spine(c) => spine_transform(&spine_train(x, c)?.model, x),
        }
    }
}

impl fmt::Display for TrainerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainerConfig::Spowv(c) => write!(
                f,
                "spowv k={} lambda={} tau={} epochs={} ista_steps={} seed={}",
                c.k, c.lambda, c.tau, c.epochs, c.ista_steps, c.seed
            ),
            TrainerConfig::Spine(c) => write!(
                f,
                "spine hidden={} lambda1={} lambda2={} lambda3={} rho_star={} learning_rate={} epochs={} batch_size={} seed={}",
                c.hidden, c.lambda1, c.lambda2, c.lambda3, c.rho_star, c.learning_rate, c.epochs, c.batch_size, c.seed
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchRecord {
    /// Position in the input grid.
    pub index: usize,
    pub config: TrainerConfig,
    pub score: Option<f64>,
    /// Training or scoring failure, if any.
    pub error: Option<String>,
}

/// Trains every configuration, scores it with [`coherence_score`], and
/// returns the records best-first. Ties keep grid order; failed runs come
/// last, in grid order.
pub fn hyperparam_search(
    grid: &[TrainerConfig],
    x: &EmbeddingMatrix,
    dense: &EmbeddingMatrix,
    probe_words: &[String],
    top_k: usize,
) -> Result<Vec<SearchRecord>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("empty hyperparameter grid".into()));
    }
    let mut records: Vec<SearchRecord> = grid
        .par_iter()
        .enumerate()
        .map(|(index, config)| {
            let outcome = config
                .train(x)
                .and_then(|sparse| coherence_score(&sparse, dense, probe_words, top_k));
            let (score, error) = match outcome {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SearchRecord {
                index,
                config: config.clone(),
                score,
                error,
            }
        })
        .collect();
    records.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
    Ok(records)
}

/// `rank,grid_index,score,error,config` rows.
pub fn write_search_csv<W: Write>(records: &[SearchRecord], mut out: W) -> Result<()> {
    writeln!(out, "rank,grid_index,score,error,config")?;
    for (rank, r) in records.iter().enumerate() {
        let score = r.score.map(|s| format!("{s:.6}")).unwrap_or_default();
        let error = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(out, "{},{},{score},{error},{}", rank + 1, r.index, r.config)?;
    }
    out.flush()?;
    Ok(())
}
