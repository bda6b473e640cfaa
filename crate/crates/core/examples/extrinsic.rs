//! Ten-fold cross-validated sentence classification with dense and sparse
//! features.

use sparse_interp::embed_io::LabeledSentence;
use sparse_interp::eval_extrinsic::{cross_validate, ClassifierConfig};
use sparse_interp::spowv::{spowv_fit, SpowvConfig};
use sparse_interp::synthetic::PlantedGroups;
use sparse_interp::{LabeledCorpus, SeededRng};

fn main() -> sparse_interp::Result<()> {
    let mut rng = SeededRng::new(11);
    let (dense, _) = PlantedGroups::default().generate(&mut rng);
    let samples = (0..300)
        .map(|i| {
            let class = i % 3;
            let mut tokens: Vec<String> = (0..3).map(|_| format!("g{class}_{}", rng.below(10))).collect();
            tokens.push(format!("f{}", rng.below(100)));
            LabeledSentence { tokens, label: format!("topic{class}") }
        })
        .collect();
    let corpus = LabeledCorpus::new(samples)?;
    let sparse = spowv_fit(&dense, &SpowvConfig { k: 12, epochs: 50, ..Default::default() })?.embedding(&dense)?;
    let cfg = ClassifierConfig::default();
    for (name, emb) in [("dense", &dense), ("spowv", &sparse)] {
        let r = cross_validate(emb, &corpus, 10, &cfg)?;
        println!("{name:>6}: mean accuracy {:.3}, folds {:?}", r.mean_accuracy, r.fold_sizes);
    }
    Ok(())
}
