//! Category-overlap scores of a dense embedding and its two sparse
//! transforms, plus the dominating dimension of a few words.

use sparse_interp::eval_interpret::{dominating_dimension, gamma_profile, interpretability_score};
use sparse_interp::spine::{spine_train, spine_transform, SpineConfig};
use sparse_interp::spowv::{spowv_fit, SpowvConfig};
use sparse_interp::synthetic::PlantedGroups;
use sparse_interp::{EmbeddingMatrix, SeededRng};

fn main() -> sparse_interp::Result<()> {
    let (dense, groups) = PlantedGroups::default().generate(&mut SeededRng::new(2));
    let spine_cfg = SpineConfig { hidden: 12, rho_star: 0.1, lambda3: 1.0, batch_size: 32, epochs: 500, ..Default::default() };
    let spine = spine_transform(&spine_train(&dense, &spine_cfg)?.model, &dense)?;
    let spowv = spowv_fit(&dense, &SpowvConfig { k: 12, epochs: 50, ..Default::default() })?.embedding(&dense)?;

    let embeddings: [(&str, &EmbeddingMatrix); 3] = [("dense", &dense), ("spine", &spine), ("spowv", &spowv)];
    for (name, emb) in embeddings {
        let result = interpretability_score(emb, &groups, 1)?;
        let profile: Vec<String> = gamma_profile(emb, &groups, 5)?.iter().map(|(g, v)| format!("{g}:{v:.1}")).collect();
        println!("{name:>6}: IS {:.1}  by gamma {}", result.overall, profile.join(" "));
    }
    for word in ["g0_0", "g4_2", "f7"] {
        let (dim, top) = dominating_dimension(&spine, word, 5)?;
        println!("{word}: dimension {dim}: {}", top.join(" "));
    }
    Ok(())
}
