//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls the library routine it checks.

#![allow(dead_code)]

use sparse_interp::eval_interpret::IntrusionQuestion;
use sparse_interp::numcore::{Matrix, SeededRng};
use sparse_interp::spine::{spine_gradients, spine_loss, SpineConfig, SpineModel};
use sparse_interp::EmbeddingMatrix;

pub const FD_STEP: f64 = 1e-5;
/// Pre-activations this close to a clamp corner are rejected: a ±h nudge of
/// any parameter could cross it.
pub const CORNER_MARGIN: f64 = 1e-3;

pub fn near_corner(model: &SpineModel, x: &Matrix, cfg: &SpineConfig) -> bool {
    let (k, _) = model.enc_weights.shape();
    for i in 0..x.rows() {
        for h in 0..k {
            let p: f64 = model
                .enc_weights
                .row(h)
                .iter()
                .zip(x.row(i))
                .map(|(w, v)| w * v)
                .sum::<f64>()
                + model.enc_bias[h];
            if p.abs() < CORNER_MARGIN || (p - 1.0).abs() < CORNER_MARGIN {
                return true;
            }
        }
    }
    // the max(0, ·) kink in the sparsity penalty
    let loss = spine_loss(model, x, cfg).unwrap();
    loss.rho_hat.iter().any(|r| (r - cfg.rho_star).abs() < CORNER_MARGIN)
}

/// A random L=4, K=6 model and a 3-row batch away from every kink.
pub fn random_spine_case(rng: &mut SeededRng, cfg: &SpineConfig) -> (SpineModel, Matrix) {
    loop {
        let mut model = SpineModel::random(4, 6, rng);
        for b in model.enc_bias.iter_mut() {
            *b = rng.uniform(0.0, 0.6);
        }
        for b in model.dec_bias.iter_mut() {
            *b = rng.uniform(-0.5, 0.5);
        }
        let x = Matrix::random_uniform(3, 4, 1.0, rng);
        if !near_corner(&model, &x, cfg) {
            return (model, x);
        }
    }
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter.
pub fn fd_max_relative_error(model: &SpineModel, x: &Matrix, cfg: &SpineConfig) -> f64 {
    let analytic = spine_gradients(model, x, cfg).unwrap();
    let mut worst: f64 = 0.0;
    for block in 0..4 {
        for j in 0..model.blocks()[block].len() {
            let mut plus = model.clone();
            plus.blocks_mut()[block][j] += FD_STEP;
            let mut minus = model.clone();
            minus.blocks_mut()[block][j] -= FD_STEP;
            let numeric = (spine_loss(&plus, x, cfg).unwrap().total - spine_loss(&minus, x, cfg).unwrap().total)
                / (2.0 * FD_STEP);
            let a = analytic.blocks()[block][j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Ranks by counting: rank of `w` = number of words ahead of it, where a word
/// is ahead when its value is more extreme or equal with a smaller index.
pub fn counting_ranks(values: &[f64], descending: bool) -> Vec<usize> {
    (0..values.len())
        .map(|w| {
            (0..values.len())
                .filter(|&u| {
                    let ahead = if descending { values[u] > values[w] } else { values[u] < values[w] };
                    ahead || (values[u] == values[w] && u < w)
                })
                .count()
        })
        .collect()
}

/// Exhaustive double loop over (dimension, category): per-dimension scores
/// and their mean.
pub fn brute_force_is(emb: &EmbeddingMatrix, groups: &[Vec<usize>], gamma: usize) -> (Vec<f64>, f64) {
    let mut per_dim = Vec::new();
    for d in 0..emb.dim() {
        let col: Vec<f64> = (0..emb.len()).map(|w| emb.row(w)[d]).collect();
        let top = counting_ranks(&col, true);
        let bottom = counting_ranks(&col, false);
        let mut best: f64 = 0.0;
        for g in groups {
            let window = gamma * g.len();
            let plus = g.iter().filter(|&&w| top[w] < window).count() as f64;
            let minus = g.iter().filter(|&&w| bottom[w] < window).count() as f64;
            best = best.max(100.0 * plus.max(minus) / g.len() as f64);
        }
        per_dim.push(best);
    }
    let mean = per_dim.iter().sum::<f64>() / per_dim.len() as f64;
    (per_dim, mean)
}

/// Average ranks (1-based) by counting, then Pearson.
pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let less = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn cosine_oracle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Band checks written from the question definition: four words in the top
/// 10%, an intruder in the bottom half of the source dimension and in the
/// top 20% of a different home dimension.
pub fn intrusion_question_ok(emb: &EmbeddingMatrix, q: &IntrusionQuestion) -> bool {
    let v = emb.len();
    let top10 = (v as f64 * 0.1).ceil() as usize;
    let top20 = (v as f64 * 0.2).ceil() as usize;
    let half = v / 2;
    if q.intruder >= 5 || q.source_dim == q.home_dim || q.source_dim >= emb.dim() || q.home_dim >= emb.dim() {
        return false;
    }
    let column = |d: usize| -> Vec<f64> { (0..v).map(|w| emb.row(w)[d]).collect() };
    let source = counting_ranks(&column(q.source_dim), true);
    let home = counting_ranks(&column(q.home_dim), true);
    let mut seen = std::collections::HashSet::new();
    for (slot, word) in q.words.iter().enumerate() {
        let Some(w) = emb.words().iter().position(|x| x == word) else {
            return false;
        };
        if !seen.insert(w) {
            return false;
        }
        let ok = if slot == q.intruder {
            // bottom half: at most `half` words rank at or below it
            v - source[w] <= half && home[w] < top20
        } else {
            source[w] < top10
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Best mean squared reconstruction error of any rank-`k` affine
/// autoencoder: the sum of the smallest `L - k` eigenvalues of the
/// covariance (normalized by the row count).
pub fn linear_autoencoder_floor(x: &Matrix, k: usize) -> f64 {
    let (n, l) = x.shape();
    let mean: Vec<f64> = (0..l).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    let mut cov = Matrix::zeros(l, l);
    for a in 0..l {
        for b in 0..l {
            let s: f64 = (0..n).map(|i| (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b])).sum();
            cov.set(a, b, s / n as f64);
        }
    }
    symmetric_eigenvalues(&cov)[..l - k].iter().sum()
}

/// Spells a generated word with letters only (`g0_3` -> `gaxd`) so it
/// survives text normalization.
pub fn alpha(word: &str) -> String {
    word.chars()
        .map(|c| match c {
            '0'..='9' => (b'a' + (c as u8 - b'0')) as char,
            '_' => 'x',
            other => other,
        })
        .collect()
}

pub struct PipelineInputs {
    pub dense: std::path::PathBuf,
    pub categories: std::path::PathBuf,
    pub bench: std::path::PathBuf,
    pub task: std::path::PathBuf,
    pub raw: std::path::PathBuf,
}

/// Writes a planted dense embedding with its category file, a similarity
/// benchmark, a labeled task corpus and a raw text corpus into `dir`.
pub fn write_pipeline_inputs(dir: &std::path::Path) -> PipelineInputs {
    use sparse_interp::embed_io::write_embeddings_file;
    use sparse_interp::synthetic::PlantedGroups;
    use std::fmt::Write as _;

    let mut rng = SeededRng::new(5);
    let (planted, dataset) = PlantedGroups::default().generate(&mut rng);
    let dense = EmbeddingMatrix::new(planted.words().iter().map(|w| alpha(w)).collect(), planted.values().clone()).unwrap();
    let inputs = PipelineInputs {
        dense: dir.join("dense.vec"),
        categories: dir.join("categories.tsv"),
        bench: dir.join("simlex-toy.tsv"),
        task: dir.join("TC.tsv"),
        raw: dir.join("raw.txt"),
    };
    write_embeddings_file(&inputs.dense, &dense, 6).unwrap();

    let mut cats = String::new();
    for (name, words) in dataset.groups() {
        for w in words {
            writeln!(cats, "{name}\t{}", alpha(w).to_uppercase()).unwrap();
        }
    }
    // too small to survive the size filter
    for w in ["fa", "fb", "fc"] {
        writeln!(cats, "tiny\t{w}").unwrap();
    }
    std::fs::write(&inputs.categories, cats).unwrap();

    let mut bench = String::from("# word1\tword2\tscore\n");
    for i in 0..40 {
        let (g, h) = (i % 10, (i * 3 + 1) % 10);
        let same = rng.below(10) + 1;
        let (a, b, c) = (format!("g{g}_{}", i % 10), format!("g{g}_{}", (i + 1) % 10), format!("g{h}_{}", (i + 2) % 10));
        writeln!(bench, "{}\t{}\t{}", alpha(&a), alpha(&b), 7.0 + same as f64 * 0.3).unwrap();
        writeln!(bench, "{}\t{}\t{}", alpha(&a), alpha(&c), 1.0 + (rng.below(20) as f64) * 0.1).unwrap();
    }
    writeln!(bench, "gaxa\tunknownword\t5.0").unwrap();
    std::fs::write(&inputs.bench, bench).unwrap();

    let labels = ["alpha", "beta", "gamma"];
    let mut task = String::new();
    for i in 0..60 {
        let g = i % 3;
        let words: Vec<String> = (0..3).map(|_| alpha(&format!("G{g}_{}", rng.below(10)))).collect();
        let filler = alpha(&format!("f{}", rng.below(100)));
        writeln!(task, "{}\t{}, {} and {}! {filler} ({i})", labels[g], words[0], words[1], words[2]).unwrap();
    }
    std::fs::write(&inputs.task, task).unwrap();

    std::fs::write(
        &inputs.raw,
        "Melanoma cases rose 12.5% in 2019.\n\nThe BRAF-V600E mutation, seen in ~50% of tumours...\n  Stage III/IV: 3 trials  \n",
    )
    .unwrap();
    inputs
}

/// Runs the full command-line pipeline into `out` and returns the exit codes.
pub fn run_pipeline(inputs: &PipelineInputs, out: &std::path::Path, threads: usize) -> Vec<i32> {
    use sparse_interp::cli::dispatch;
    let o = |name: &str| out.join(name).to_string_lossy().into_owned();
    let p = |path: &std::path::Path| path.to_string_lossy().into_owned();
    let t = threads.to_string();
    let sparse = o("sparse.vec");
    let runs: Vec<Vec<String>> = vec![
        vec!["prep".into(), "--in".into(), p(&inputs.raw), "--out".into(), o("clean.txt")],
        vec![
            "spine".into(), "--emb".into(), p(&inputs.dense), "--out".into(), sparse.clone(), "--k".into(), "12".into(),
            "--epochs".into(), "60".into(), "--batch-size".into(), "32".into(), "--rho-star".into(), "0.1".into(),
            "--lambda3".into(), "1".into(), "--trace".into(), o("spine_trace.csv"), "--checkpoint".into(), o("spine.ckpt"),
        ],
        vec![
            "spowv".into(), "--emb".into(), p(&inputs.dense), "--out".into(), o("spowv.vec"), "--k".into(), "12".into(),
            "--epochs".into(), "15".into(), "--trace".into(), o("spowv_trace.csv"), "--checkpoint".into(), o("spowv.ckpt"),
        ],
        vec!["eval-intrinsic".into(), "--emb".into(), sparse.clone(), "--bench".into(), p(&inputs.bench), "--out".into(), o("intrinsic.csv")],
        vec![
            "eval-interpret".into(), "--emb".into(), sparse.clone(), "--categories".into(), p(&inputs.categories),
            "--gamma".into(), "1".into(), "--out".into(), o("is.csv"), "--profile".into(), o("is_profile.csv"),
        ],
        vec![
            "eval-extrinsic".into(), "--emb".into(), p(&inputs.dense), "--emb".into(), sparse.clone(), "--task".into(),
            p(&inputs.task), "--epochs".into(), "100".into(), "--out".into(), o("extrinsic.csv"),
        ],
        vec!["top-words".into(), "--emb".into(), sparse.clone(), "--word".into(), "gaxa".into(), "--word".into(), "gdxe".into(), "--out".into(), o("top_words.csv")],
        vec!["intrusion".into(), "--emb".into(), sparse.clone(), "--count".into(), "50".into(), "--out".into(), o("intrusion.tsv")],
        vec![
            "heatmap".into(), "--emb".into(), p(&inputs.dense), "--emb".into(), sparse.clone(), "--word".into(), "gaxa".into(),
            "--word".into(), "gaxb".into(), "--word".into(), "gaxc".into(), "--word".into(), "gfxa".into(), "--word".into(), "fb".into(),
            "--group-size".into(), "3".into(), "--csv".into(), o("heatmap.csv"), "--svg".into(), o("heatmap.svg"),
        ],
        vec![
            "tune".into(), "--emb".into(), p(&inputs.dense), "--trainer".into(), "spowv".into(), "--set".into(), "k=12".into(),
            "--set".into(), "epochs=8".into(), "--grid".into(), "lambda=0.2,0.5,1.0".into(), "--word".into(), "gaxa".into(),
            "--word".into(), "ghxd".into(), "--out".into(), o("tune.csv"),
        ],
    ];
    runs.into_iter()
        .map(|mut args| {
            args.insert(0, "sparse-interp".into());
            args.push("--threads".into());
            args.push(t.clone());
            dispatch(args)
        })
        .collect()
}
