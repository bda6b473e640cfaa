//! Seeded synthetic data: Gaussian inputs and dense embeddings with planted
//! semantic groups.

use crate::embed_io::{CategoryDataset, EmbeddingMatrix};
use crate::numcore::{Matrix, SeededRng};

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Matrix::new(rows, cols, data).expect("finite Gaussian draws")
}

/// Words `w0, w1, ...` over the rows of a Gaussian matrix.
pub fn gaussian_embedding(words: usize, dim: usize, rng: &mut SeededRng) -> EmbeddingMatrix {
    let names = (0..words).map(|i| format!("w{i}")).collect();
    EmbeddingMatrix::new(names, gaussian_matrix(words, dim, rng)).expect("unique generated words")
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedGroups {
    pub groups: usize,
    pub group_size: usize,
    /// Words that belong to no group.
    pub fillers: usize,
    pub dim: usize,
    /// Standard deviation of each member around its group centre.
    pub spread: f64,
}

impl Default for PlantedGroups {
    fn default() -> Self {
        PlantedGroups {
            groups: 10,
            group_size: 10,
            fillers: 100,
            dim: 8,
            spread: 0.4,
        }
    }
}

impl PlantedGroups {
    /// Group `g` word `i` is `g{g}_{i}` = centre_g + spread·noise, where every
    /// centre is a random ±1 vector, so each axis splits the groups roughly
    /// in half and none isolates a group. Fillers `f{i}` are standard
    /// Gaussian. Rows are shuffled so group members are not contiguous.
    pub fn generate(&self, rng: &mut SeededRng) -> (EmbeddingMatrix, CategoryDataset) {
        let signs = (0..self.groups * self.dim)
            .map(|_| if rng.next_u64() & 1 == 0 { -1.0 } else { 1.0 })
            .collect();
        let centres = Matrix::new(self.groups, self.dim, signs).expect("finite signs");
        let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
        for i in 0..self.group_size {
            for g in 0..self.groups {
                let v = centres.row(g).iter().map(|c| c + self.spread * rng.normal()).collect();
                rows.push((format!("g{g}_{i}"), v));
            }
        }
        for i in 0..self.fillers {
            rows.push((format!("f{i}"), (0..self.dim).map(|_| rng.normal()).collect()));
        }
        let order = crate::numcore::seeded_shuffle((0..rows.len()).collect::<Vec<_>>(), rng);
        let rows: Vec<(String, Vec<f64>)> = order.into_iter().map(|i| rows[i].clone()).collect();
        let emb = EmbeddingMatrix::from_rows(rows).expect("unique generated words");
        let dataset = CategoryDataset::new(
            (0..self.groups).map(|g| (format!("group{g}"), (0..self.group_size).map(|i| format!("g{g}_{i}")).collect::<Vec<_>>())),
        );
        (emb, dataset)
    }
}
