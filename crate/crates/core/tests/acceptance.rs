//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use sparse_interp::embed_io::{LabeledSentence, SimilarityBenchmark, SimilarityPair};
use sparse_interp::eval_extrinsic::{cross_validate, ClassifierConfig};
use sparse_interp::eval_interpret::{
    generate_intrusion_questions, hyperparam_search, interpretability_score, TrainerConfig,
};
use sparse_interp::eval_intrinsic::evaluate_benchmark;
use sparse_interp::numcore::{Matrix, SeededRng, RISE_TOLERANCE};
use sparse_interp::spine::{spine_loss, spine_train, spine_transform, SpineConfig, SpineModel, ACTIVE_THRESHOLD};
use sparse_interp::spowv::{reconstruction_mse, spowv_fit, SpowvConfig};
use sparse_interp::synthetic::{gaussian_embedding, PlantedGroups};
use sparse_interp::{CategoryDataset, EmbeddingMatrix, LabeledCorpus, ZERO_EPS};

type Outcome = (bool, String);

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn gradient_check() -> Outcome {
    let cfg = SpineConfig {
        hidden: 6,
        lambda1: 1.0,
        lambda2: 1.0,
        lambda3: 1.0,
        rho_star: 0.15,
        ..Default::default()
    };
    let mut rng = SeededRng::new(42);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (model, x) = random_spine_case(&mut rng, &cfg);
        worst = worst.max(fd_max_relative_error(&model, &x, &cfg));
    }
    (worst < 1e-4, format!("10 models, worst relative error {worst:.2e}"))
}

fn spowv_descent() -> Outcome {
    let x = gaussian_embedding(50, 10, &mut SeededRng::new(42));
    let monotone = |cfg: &SpowvConfig| -> Result<(bool, f64), String> {
        let fit = spowv_fit(&x, cfg).map_err(|e| e.to_string())?;
        let ok = fit
            .trace
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective + RISE_TOLERANCE * w[0].objective.abs().max(1.0));
        let mse = reconstruction_mse(x.values(), &fit.dictionary, &fit.codes).map_err(|e| e.to_string())?;
        Ok((ok && fit.trace.len() == 201, mse))
    };
    let regularized = SpowvConfig { k: 20, lambda: 0.1, epochs: 200, ..Default::default() };
    let plain = SpowvConfig { k: 20, lambda: 0.0, tau: 0.0, epochs: 200, ..Default::default() };
    match (monotone(&regularized), monotone(&plain)) {
        (Ok((m1, _)), Ok((m2, mse))) => (
            m1 && m2 && mse < 1e-3,
            format!("non-increasing: lambda=0.1 {m1}, lambda=tau=0 {m2}; unregularized MSE {mse:.2e}"),
        ),
        (a, b) => (false, format!("training failed: {:?} {:?}", a.err(), b.err())),
    }
}

fn identity_model(bias: f64) -> SpineModel {
    let mut m = SpineModel::zeros(3, 3);
    m.enc_weights = Matrix::identity(3);
    m.dec_weights = Matrix::identity(3);
    m.dec_bias = vec![bias, 0.0, 0.0];
    m
}

fn loss_identities() -> Outcome {
    let cfg = |rho_star| SpineConfig { hidden: 3, rho_star, ..Default::default() };
    let binary = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
    let graded = Matrix::from_rows(&[[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
    let mut checks = Vec::new();

    // unit means are 0.25 each
    let l = spine_loss(&identity_model(0.0), &binary, &cfg(0.3)).unwrap();
    checks.push(("ASL=0 when means <= rho*", l.asl == 0.0));
    checks.push(("PSL=0 on binary activations", l.psl == 0.0));
    checks.push(("RL=0 on exact reconstruction", l.rl == 0.0));
    let l = spine_loss(&identity_model(0.0), &binary, &cfg(0.2)).unwrap();
    checks.push(("ASL>0 when a mean exceeds rho*", l.asl > 0.0));
    let l = spine_loss(&identity_model(0.0), &graded, &cfg(0.5)).unwrap();
    checks.push(("PSL>0 on a non-binary activation", l.psl > 0.0 && l.rl == 0.0));
    let l = spine_loss(&identity_model(0.1), &binary, &cfg(0.3)).unwrap();
    checks.push(("RL>0 on inexact reconstruction", l.rl > 0.0 && l.psl == 0.0));
    let mut off = identity_model(0.0);
    off.enc_bias = vec![-5.0; 3];
    let l = spine_loss(&off, &graded, &cfg(0.1)).unwrap();
    checks.push(("all-off units: ASL=PSL=0, RL>0", l.asl == 0.0 && l.psl == 0.0 && l.rl > 0.0));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        (true, format!("{} constructed cases hold exactly", checks.len()))
    } else {
        (false, format!("failed: {}", failed.join("; ")))
    }
}

fn sparsity_delivery() -> Outcome {
    let x = gaussian_embedding(200, 10, &mut SeededRng::new(42));
    let spine_cfg = SpineConfig {
        hidden: 40,
        learning_rate: 0.02,
        batch_size: 20,
        lambda3: 1.0,
        epochs: 400,
        ..Default::default()
    };
    let fit = match spine_train(&x, &spine_cfg) {
        Ok(f) => f,
        Err(e) => return (false, format!("SPINE training failed: {e}")),
    };
    let z = spine_transform(&fit.model, &x).unwrap();
    let vals = z.values().as_slice();
    let above = vals.iter().filter(|v| **v > ACTIVE_THRESHOLD).count() as f64 / vals.len() as f64;
    let rl_ratio = fit.trace.last().unwrap().loss.rl / fit.trace[0].loss.rl;

    let probes: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
    let grid: Vec<TrainerConfig> = [0.1, 0.2, 0.4, 0.8, 1.2, 1.6]
        .iter()
        .map(|&lambda| TrainerConfig::Spowv(SpowvConfig { k: 40, lambda, epochs: 50, ..Default::default() }))
        .collect();
    let records = match hyperparam_search(&grid, &x, &x, &probes, 10) {
        Ok(r) => r,
        Err(e) => return (false, format!("coherence search failed: {e}")),
    };
    let TrainerConfig::Spowv(best) = &records[0].config else {
        unreachable!()
    };
    let codes = spowv_fit(&x, best).unwrap().codes;
    let zeros = codes.sparsity();
    (
        above <= 0.25 && rl_ratio < 0.25 && zeros >= 0.70,
        format!(
            "SPINE above {ACTIVE_THRESHOLD}: {:.1}%, RL at {:.1}% of initial; SPOWV tuned lambda={} gives {:.1}% below {ZERO_EPS:e}",
            100.0 * above,
            100.0 * rl_ratio,
            best.lambda,
            100.0 * zeros
        ),
    )
}

fn random_is_instance(rng: &mut SeededRng, v: usize, d: usize, tied: bool) -> (EmbeddingMatrix, CategoryDataset, Vec<Vec<usize>>) {
    let words: Vec<String> = (0..v).map(|i| format!("t{i}")).collect();
    let data = (0..v * d)
        .map(|_| {
            let z = rng.normal();
            if tied {
                (z * 2.0).round() / 2.0
            } else {
                z
            }
        })
        .collect();
    let emb = EmbeddingMatrix::new(words.clone(), Matrix::new(v, d, data).unwrap()).unwrap();
    let pool: Vec<usize> = (0..v).collect();
    let max_size = (v / 4).clamp(5, 25);
    let groups: Vec<Vec<usize>> = (0..20)
        .map(|_| {
            let size = 5 + rng.below(max_size - 4);
            rng.sample(&pool, size)
        })
        .collect();
    let dataset = CategoryDataset::new(
        groups
            .iter()
            .enumerate()
            .map(|(j, g)| (format!("c{j:02}"), g.iter().map(|&w| words[w].clone()).collect::<Vec<_>>())),
    );
    (emb, dataset, groups)
}

fn is_oracle() -> Outcome {
    let mut rng = SeededRng::new(42);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for &(v, d) in &[(30, 5), (100, 20), (250, 50), (500, 10), (500, 50), (377, 33)] {
        for tied in [false, true] {
            for gamma in [1, 2] {
                let (emb, dataset, groups) = random_is_instance(&mut rng, v, d, tied);
                let got = interpretability_score(&emb, &dataset, gamma).unwrap();
                let (per_dim, mean) = brute_force_is(&emb, &groups, gamma);
                for (a, b) in got.per_dimension.iter().zip(&per_dim) {
                    worst = worst.max((a.score - b).abs());
                }
                worst = worst.max((got.overall - mean).abs());
                instances += 1;
            }
        }
    }
    (worst <= 1e-12, format!("{instances} instances (V<=500, D<=50, 20 categories), max deviation {worst:.1e}"))
}

fn interpretability_direction() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in [1u64, 2, 3] {
        let (dense, dataset) = PlantedGroups::default().generate(&mut SeededRng::new(seed));
        let is = |e: &EmbeddingMatrix| interpretability_score(e, &dataset, 1).unwrap().overall;
        let spine_cfg = SpineConfig {
            hidden: 12,
            rho_star: 0.1,
            epochs: 500,
            batch_size: 32,
            lambda3: 1.0,
            seed,
            ..Default::default()
        };
        let spowv_cfg = SpowvConfig { k: 12, lambda: 0.5, epochs: 50, seed, ..Default::default() };
        let spine = spine_train(&dense, &spine_cfg).and_then(|f| spine_transform(&f.model, &dense));
        let spowv = spowv_fit(&dense, &spowv_cfg).and_then(|f| f.embedding(&dense));
        let (Ok(spine), Ok(spowv)) = (spine, spowv) else {
            return (false, format!("training failed for seed {seed}"));
        };
        let (d, s, o) = (is(&dense), is(&spine), is(&spowv));
        ok &= s - d > 5.0 && o - d > 5.0;
        lines.push(format!("seed {seed}: dense {d:.1} SPINE {s:.1} SPOWV {o:.1}"));
    }
    (ok, lines.join("; "))
}

fn spearman_oracle_check() -> Outcome {
    let mut rng = SeededRng::new(42);
    let mut worst: f64 = 0.0;
    for b in 0..100 {
        let emb = gaussian_embedding(30, 4, &mut rng);
        let mut pairs = Vec::new();
        while pairs.len() < 20 {
            let (i, j) = (rng.below(30), rng.below(30));
            if i == j {
                continue;
            }
            // repeat some pairs so predicted similarities tie as well
            let reps = if rng.below(5) == 0 { 2 } else { 1 };
            for _ in 0..reps.min(20 - pairs.len()) {
                let score = if b % 2 == 0 { rng.below(6) as f64 } else { (rng.normal() * 4.0).round() / 4.0 };
                pairs.push(SimilarityPair { word1: format!("w{i}"), word2: format!("w{j}"), score });
            }
        }
        if pairs.iter().all(|p| p.score == pairs[0].score) {
            pairs[0].score += 1.0;
        }
        let bench = SimilarityBenchmark { name: format!("b{b}"), pairs, scale_max: 10.0 };
        let got = match evaluate_benchmark(&emb, &bench) {
            Ok(r) => r.rho,
            Err(e) => return (false, format!("benchmark {b}: {e}")),
        };
        let predicted: Vec<f64> = bench
            .pairs
            .iter()
            .map(|p| cosine_oracle(emb.vector(&p.word1).unwrap(), emb.vector(&p.word2).unwrap()))
            .collect();
        let human: Vec<f64> = bench.pairs.iter().map(|p| p.score).collect();
        worst = worst.max((got - spearman_oracle(&predicted, &human)).abs());
    }
    (worst <= 1e-12, format!("100 benchmarks of 20 pairs with ties, max deviation {worst:.1e}"))
}

fn intrusion_constraints() -> Outcome {
    let emb = gaussian_embedding(200, 20, &mut SeededRng::new(7));
    let first = generate_intrusion_questions(&emb, 1000, &mut SeededRng::new(42));
    let second = generate_intrusion_questions(&emb, 1000, &mut SeededRng::new(42));
    let (Ok(first), Ok(second)) = (first, second) else {
        return (false, "generation failed".into());
    };
    let bad = first.iter().filter(|q| !intrusion_question_ok(&emb, q)).count();
    let same = first == second;
    (
        bad == 0 && same && first.len() == 1000,
        format!("{} questions, {bad} violate the bands, reproducible: {same}", first.len()),
    )
}

fn separable_corpus(rng: &mut SeededRng) -> LabeledCorpus {
    let samples = (0..500)
        .map(|i| {
            let class = i % 5;
            let mut tokens: Vec<String> = (0..2 + rng.below(3)).map(|_| format!("g{class}_{}", rng.below(10))).collect();
            for _ in 0..rng.below(3) {
                tokens.push(format!("f{}", rng.below(100)));
            }
            LabeledSentence { tokens, label: format!("class{class}") }
        })
        .collect();
    LabeledCorpus::new(samples).unwrap()
}

fn extrinsic_sanity() -> Outcome {
    let mut rng = SeededRng::new(11);
    let (dense, _) = PlantedGroups::default().generate(&mut rng);
    let corpus = separable_corpus(&mut rng);
    let sparse = spowv_fit(&dense, &SpowvConfig { k: 12, lambda: 0.5, epochs: 50, seed: 11, ..Default::default() })
        .and_then(|f| f.embedding(&dense))
        .unwrap();
    let cfg = ClassifierConfig::default();
    let (Ok(d), Ok(s)) = (cross_validate(&dense, &corpus, 10, &cfg), cross_validate(&sparse, &corpus, 10, &cfg)) else {
        return (false, "cross-validation failed".into());
    };
    let folds_ok = d.fold_sizes.iter().all(|&n| n == 50) && d.fold_sizes.len() == 10;
    let gap = 100.0 * (d.mean_accuracy - s.mean_accuracy).abs();
    (
        folds_ok && d.mean_accuracy >= 0.95 && gap <= 5.0,
        format!(
            "folds all 50: {folds_ok}; dense {:.1}%, sparse {:.1}%, gap {gap:.1} points",
            100.0 * d.mean_accuracy,
            100.0 * s.mean_accuracy
        ),
    )
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let inputs = write_pipeline_inputs(root.path());
    let mut outputs = Vec::new();
    for (run, threads) in [(0, 8), (1, 8), (2, 1)] {
        let out = root.path().join(format!("run{run}"));
        std::fs::create_dir(&out).unwrap();
        let codes = run_pipeline(&inputs, &out, threads);
        if codes.iter().any(|&c| c != 0) {
            return (false, format!("run {run} exit codes {codes:?}"));
        }
        outputs.push(read_dir_sorted(&out));
    }
    let repeat = outputs[0] == outputs[1];
    let threads = outputs[0] == outputs[2];
    (
        repeat && threads,
        format!(
            "{} output files; repeat run identical: {repeat}; --threads 1 vs 8 identical: {threads}",
            outputs[0].len()
        ),
    )
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "SPINE gradient correctness", limit: Some(Duration::from_secs(5)), run: gradient_check },
        Criterion { id: 2, name: "SPOWV objective descent", limit: Some(Duration::from_secs(30)), run: spowv_descent },
        Criterion { id: 3, name: "SPINE loss-term identities", limit: None, run: loss_identities },
        Criterion { id: 4, name: "sparsity delivery", limit: Some(Duration::from_secs(120)), run: sparsity_delivery },
        Criterion { id: 5, name: "IS oracle equivalence", limit: Some(Duration::from_secs(10)), run: is_oracle },
        Criterion { id: 6, name: "directional interpretability", limit: Some(Duration::from_secs(300)), run: interpretability_direction },
        Criterion { id: 7, name: "Spearman oracle", limit: None, run: spearman_oracle_check },
        Criterion { id: 8, name: "intrusion constraints", limit: None, run: intrusion_constraints },
        Criterion { id: 9, name: "extrinsic harness sanity", limit: None, run: extrinsic_sanity },
        Criterion { id: 10, name: "pipeline determinism", limit: None, run: determinism },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let (ok, detail) = (c.run)();
        let elapsed = start.elapsed();
        let in_time = c.limit.map_or(true, |l| elapsed < l);
        let pass = ok && in_time;
        if !pass {
            failures += 1;
        }
        let limit = c.limit.map_or(String::new(), |l| format!(", limit {}s", l.as_secs()));
        let late = if in_time { "" } else { " OVER TIME" };
        println!(
            "{} [{}] {}: {detail} ({:.2}s{limit}){late}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
