//! Sign heatmaps of one planted group and two fillers, dense and sparse.
//! Writes heatmap.csv and heatmap.svg to the directory given as the first
//! argument (default: the current directory).

use std::path::PathBuf;

use sparse_interp::eval_interpret::export_heatmap;
use sparse_interp::spowv::{spowv_fit, SpowvConfig};
use sparse_interp::synthetic::PlantedGroups;
use sparse_interp::SeededRng;

fn main() -> sparse_interp::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let (dense, _) = PlantedGroups::default().generate(&mut SeededRng::new(1));
    let sparse = spowv_fit(&dense, &SpowvConfig { k: 24, epochs: 30, ..Default::default() })?.embedding(&dense)?;
    let words: Vec<String> = ["g2_0", "g2_1", "g2_2", "g2_3", "f0", "f1"].iter().map(|w| w.to_string()).collect();
    let specs = export_heatmap(
        &[("dense", &dense), ("spowv", &sparse)],
        &words,
        4,
        &dir.join("heatmap.csv"),
        &dir.join("heatmap.svg"),
    )?;
    for s in &specs {
        println!("{}: dimension order {:?}", s.label, s.permutation);
    }
    Ok(())
}
