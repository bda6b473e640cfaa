//! Dictionary learning on a small Gaussian embedding.

use sparse_interp::spowv::{reconstruction_mse, spowv_fit, SpowvConfig};
use sparse_interp::synthetic::gaussian_embedding;
use sparse_interp::SeededRng;

fn main() -> sparse_interp::Result<()> {
    let x = gaussian_embedding(200, 10, &mut SeededRng::new(42));
    let cfg = SpowvConfig { k: 40, lambda: 0.5, epochs: 30, ..Default::default() };
    let fit = spowv_fit(&x, &cfg)?;
    for e in fit.trace.iter().step_by(5) {
        println!("epoch {:>3}  objective {:>10.4}  zeros {:.3}", e.epoch, e.objective, e.sparsity);
    }
    let mse = reconstruction_mse(x.values(), &fit.dictionary, &fit.codes)?;
    println!("final zeros {:.3}, reconstruction MSE {mse:.4}", fit.codes.sparsity());
    Ok(())
}
