//! Spearman correlation of cosine similarity against made-up ratings:
//! pairs inside a planted group are rated high, pairs across groups low.

use sparse_interp::embed_io::{SimilarityBenchmark, SimilarityPair};
use sparse_interp::eval_intrinsic::evaluate_benchmark;
use sparse_interp::spowv::{spowv_fit, SpowvConfig};
use sparse_interp::synthetic::PlantedGroups;
use sparse_interp::SeededRng;

fn main() -> sparse_interp::Result<()> {
    let mut rng = SeededRng::new(3);
    let (dense, _) = PlantedGroups::default().generate(&mut rng);
    let mut pairs = Vec::new();
    for g in 0..10 {
        for i in 0..5 {
            let other = (g + 1 + rng.below(9)) % 10;
            pairs.push(SimilarityPair { word1: format!("g{g}_{i}"), word2: format!("g{g}_{}", i + 5), score: 8.0 + rng.uniform(0.0, 2.0) });
            pairs.push(SimilarityPair { word1: format!("g{g}_{i}"), word2: format!("g{other}_{i}"), score: rng.uniform(0.0, 4.0) });
        }
    }
    let bench = SimilarityBenchmark { name: "planted".into(), pairs, scale_max: 10.0 };
    let sparse = spowv_fit(&dense, &SpowvConfig { k: 12, epochs: 30, ..Default::default() })?.embedding(&dense)?;
    for (name, emb) in [("dense", &dense), ("spowv", &sparse)] {
        let r = evaluate_benchmark(emb, &bench)?;
        println!("{name:>6}: rho {:.3} over {} pairs ({} skipped)", r.rho, r.pairs_used, r.skipped);
    }
    Ok(())
}
