//! Word-similarity benchmarks scored by Spearman correlation between cosine
//! similarity and human ratings.

use std::io::Write;

use crate::embed_io::{EmbeddingMatrix, SimilarityBenchmark};
use crate::error::{Error, Result};
use crate::numcore::{cosine_similarity, norm, spearman_correlation};

#[derive(Clone, Debug, PartialEq)]
pub struct IntrinsicResult {
    pub benchmark: String,
    pub rho: f64,
    pub pairs_used: usize,
    pub skipped: usize,
    /// `pairs_used / total pairs`.
    pub coverage: f64,
}

/// Cosine similarity for every usable pair, then Spearman against the human
/// scores.
///
/// A pair is skipped when either word is missing from the vocabulary (exact
/// match, then lowercase) or has an all-zero vector, which happens for words
/// a sparse transform switched off entirely.
pub fn evaluate_benchmark(emb: &EmbeddingMatrix, bench: &SimilarityBenchmark) -> Result<IntrinsicResult> {
    let mut predicted = Vec::with_capacity(bench.pairs.len());
    let mut human = Vec::with_capacity(bench.pairs.len());
    for pair in &bench.pairs {
        let (Some(a), Some(b)) = (emb.lookup(&pair.word1), emb.lookup(&pair.word2)) else {
            continue;
        };
        let (va, vb) = (emb.row(a), emb.row(b));
        if norm(va) == 0.0 || norm(vb) == 0.0 {
            continue;
        }
        predicted.push(cosine_similarity(va, vb)?);
        human.push(pair.score);
    }
    let used = predicted.len();
    if used < 2 {
        return Err(Error::InvalidValue(format!(
            "benchmark {:?}: only {used} usable pairs, need at least 2",
            bench.name
        )));
    }
    let rho = spearman_correlation(&predicted, &human)?;
    Ok(IntrinsicResult {
        benchmark: bench.name.clone(),
        rho,
        pairs_used: used,
        skipped: bench.pairs.len() - used,
        coverage: used as f64 / bench.pairs.len() as f64,
    })
}

/// `benchmark,rho,pairs_used,coverage` rows.
pub fn write_results_csv<W: Write>(results: &[IntrinsicResult], mut out: W) -> Result<()> {
    writeln!(out, "benchmark,rho,pairs_used,coverage")?;
    for r in results {
        writeln!(out, "{},{:.6},{},{:.4}", r.benchmark, r.rho, r.pairs_used, r.coverage)?;
    }
    out.flush()?;
    Ok(())
}
