//! Choose the SPOWV penalty by the coherence of each dimension's top words.

use sparse_interp::eval_interpret::{hyperparam_search, write_search_csv, TrainerConfig};
use sparse_interp::spowv::SpowvConfig;
use sparse_interp::synthetic::gaussian_embedding;
use sparse_interp::SeededRng;

fn main() -> sparse_interp::Result<()> {
    let x = gaussian_embedding(200, 10, &mut SeededRng::new(42));
    let probes: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
    let grid: Vec<TrainerConfig> = [0.1, 0.4, 1.2, 5.0]
        .iter()
        .map(|&lambda| TrainerConfig::Spowv(SpowvConfig { k: 40, lambda, epochs: 20, ..Default::default() }))
        .collect();
    let records = hyperparam_search(&grid, &x, &x, &probes, 10)?;
    write_search_csv(&records, std::io::stdout().lock())
}
