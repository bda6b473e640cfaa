//! Capped autoencoder on planted groups, with the loss terms per epoch.

use sparse_interp::spine::{spine_train, spine_transform, SpineConfig};
use sparse_interp::synthetic::PlantedGroups;
use sparse_interp::SeededRng;

fn main() -> sparse_interp::Result<()> {
    let (dense, _) = PlantedGroups::default().generate(&mut SeededRng::new(1));
    let cfg = SpineConfig {
        hidden: 12,
        rho_star: 0.1,
        lambda3: 1.0,
        batch_size: 32,
        epochs: 200,
        ..Default::default()
    };
    let fit = spine_train(&dense, &cfg)?;
    for e in fit.trace.iter().step_by(40) {
        let l = &e.loss;
        println!(
            "epoch {:>3}  total {:.4}  rl {:.4}  asl {:.4}  psl {:.4}  inactive {:.3}",
            e.epoch, l.total, l.rl, l.asl, l.psl, e.mean_sparsity
        );
    }
    let sparse = spine_transform(&fit.model, &dense)?;
    println!("{} words, {} -> {} dimensions", sparse.len(), dense.dim(), sparse.dim());
    Ok(())
}
