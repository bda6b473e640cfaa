//! Command-line front end. [`dispatch`] parses arguments, runs one
//! subcommand and maps the outcome to an exit code.
//!
//! Option values resolve as flag, then `--config` file, then built-in
//! default. Config files hold `key=value` lines (`#` starts a comment); keys
//! are the long flag names with `-` replaced by `_`. Keys the subcommand does
//! not know are rejected.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::embed_io::{
    self, parse_category_dataset, parse_labeled_sentences, parse_similarity_benchmark, read_embeddings_file,
    write_embeddings_file, EmbeddingMatrix, LabeledCorpus,
};
use crate::error::{Error, Result};
use crate::eval_extrinsic::{cross_validate, write_cv_table_csv, ClassifierConfig};
use crate::eval_interpret::{
    dominating_dimension, export_heatmap, gamma_profile, generate_intrusion_questions, hyperparam_search,
    interpretability_score, write_is_report_csv, write_questions, write_search_csv, write_top_words_report,
    SearchRecord, TrainerConfig,
};
use crate::eval_intrinsic::{evaluate_benchmark, write_results_csv};
use crate::numcore::SeededRng;
use crate::spine::{self, spine_train, spine_transform, Optimizer, SpineConfig};
use crate::spowv::{self, spowv_fit, SpowvCheckpoint, SpowvConfig, StepSize};
use crate::textprep::{normalize_text, NormalizationRules};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "SPARSE_INTERP_THREADS";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "sparse-interp", version, about = "Sparse interpretable word embeddings: training and evaluation")]
struct Cli {
    /// Worker threads; output does not depend on this value.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// File of key=value option defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a raw text corpus line by line.
    Prep(PrepArgs),
    /// Sparse overcomplete vectors by dictionary learning.
    Spowv(SpowvArgs),
    /// Sparse vectors from a capped autoencoder.
    Spine(SpineArgs),
    /// Spearman correlation on word-similarity benchmarks.
    EvalIntrinsic(IntrinsicArgs),
    /// Category-overlap interpretability score per dimension.
    EvalInterpret(InterpretArgs),
    /// Ten-fold cross-validated sentence classification.
    EvalExtrinsic(ExtrinsicArgs),
    /// Dominating dimension and its top words for probe words.
    TopWords(TopWordsArgs),
    /// Generate word-intrusion questions.
    Intrusion(IntrusionArgs),
    /// Sign heatmap (CSV and SVG) with dimensions sorted by a word group.
    Heatmap(HeatmapArgs),
    /// Grid search scored by top-word coherence in the dense space.
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
struct PrepArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Keep punctuation and symbols.
    #[arg(long)]
    keep_punctuation: bool,
    /// Keep digit runs as they are.
    #[arg(long)]
    keep_numbers: bool,
    /// Keep letter case.
    #[arg(long)]
    keep_case: bool,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Decimal places in the written embedding.
    #[arg(long)]
    precision: Option<usize>,
    /// Per-epoch trace CSV.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Full model checkpoint.
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpowvArgs {
    /// Dense input embedding.
    #[arg(long, value_name = "FILE")]
    emb: PathBuf,
    /// Sparse output embedding.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    ista_steps: Option<usize>,
    /// "auto" or a positive number.
    #[arg(long)]
    ista_step_size: Option<StepSize>,
    /// "auto" or a positive number.
    #[arg(long)]
    dict_learning_rate: Option<StepSize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OptimizerName {
    Gd,
    Adam,
}

#[derive(Debug, Args)]
struct SpineArgs {
    #[arg(long, value_name = "FILE")]
    emb: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Hidden dimension.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    rho_star: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerName>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct IntrinsicArgs {
    #[arg(long, value_name = "FILE")]
    emb: PathBuf,
    /// Benchmark file (word1, word2, score; tab-separated). Repeatable; the
    /// file stem names the row.
    #[arg(long = "bench", value_name = "FILE", required = true)]
    benches: Vec<PathBuf>,
    /// Upper end of the human rating scale.
    #[arg(long)]
    scale_max: Option<f64>,
    /// Result CSV (default: standard output).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InterpretArgs {
    #[arg(long, value_name = "FILE")]
    emb: PathBuf,
    /// Category file (category, word; tab-separated).
    #[arg(long, value_name = "FILE")]
    categories: PathBuf,
    #[arg(long)]
    gamma: Option<usize>,
    /// Also write overall IS for gamma = 1..=N to this file.
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,
    #[arg(long)]
    max_gamma: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtrinsicArgs {
    /// Embedding to featurize with. Repeatable; one table row each.
    #[arg(long = "emb", value_name = "FILE", required = true)]
    embs: Vec<PathBuf>,
    /// Labeled corpus (label, sentence; tab-separated). Repeatable; one
    /// table column each.
    #[arg(long = "task", value_name = "FILE", required = true)]
    tasks: Vec<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// "auto" or a positive number.
    #[arg(long)]
    learning_rate: Option<StepSize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WordArgs {
    /// Word to include. Repeatable.
    #[arg(long = "word", value_name = "WORD")]
    words: Vec<String>,
    /// File with one word per line.
    #[arg(long, value_name = "FILE")]
    words_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TopWordsArgs {
    #[arg(long, value_name = "FILE")]
    emb: PathBuf,
    #[command(flatten)]
    words: WordArgs,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IntrusionArgs {
    #[arg(long, value_name = "FILE")]
    emb: PathBuf,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    /// Embedding to draw. Repeatable; one panel each.
    #[arg(long = "emb", value_name = "FILE", required = true)]
    embs: Vec<PathBuf>,
    #[command(flatten)]
    words: WordArgs,
    /// Leading words whose mean orders the dimensions.
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long, value_name = "FILE")]
    csv: PathBuf,
    #[arg(long, value_name = "FILE")]
    svg: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TrainerName {
    Spowv,
    Spine,
}

#[derive(Debug, Args)]
struct TuneArgs {
    /// Dense input embedding; also the space coherence is measured in
    /// unless --dense is given.
    #[arg(long, value_name = "FILE")]
    emb: PathBuf,
    #[arg(long, value_name = "FILE")]
    dense: Option<PathBuf>,
    #[arg(long, value_enum)]
    trainer: TrainerName,
    /// Grid axis, `key=v1,v2,...`. Repeatable; the grid is the product.
    #[arg(long = "grid", value_name = "KEY=VALUES")]
    grid: Vec<String>,
    /// Base trainer option, `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    probes: WordArgs,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Config-file entries not yet claimed by an option.
#[derive(Debug, Default)]
struct Settings {
    entries: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(embed_io::open(path)?);
        let mut entries = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key=value", path.display(), i + 1))
            })?;
            entries.insert(k.trim().replace('-', "_"), v.trim().to_owned());
        }
        Ok(Settings { entries })
    }

    /// The flag if given, else the config value, else `None`. Either way the
    /// key is consumed.
    fn pick<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        let stored = self.entries.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        stored.map(|v| parse_value(key, &v)).transpose()
    }

    fn pick_switch(&mut self, flag: bool, key: &str) -> Result<bool> {
        Ok(self.pick(flag.then_some(true), key)?.unwrap_or(false))
    }

    fn drain(&mut self) -> Vec<(String, String)> {
        std::mem::take(&mut self.entries).into_iter().collect()
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            Some(k) => Err(Error::Config(format!("unknown config key {k:?}"))),
            None => Ok(()),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn set_spowv(cfg: &mut SpowvConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "k" => cfg.k = parse_value(key, v)?,
        "lambda" => cfg.lambda = parse_value(key, v)?,
        "tau" => cfg.tau = parse_value(key, v)?,
        "ista_steps" => cfg.ista_steps = parse_value(key, v)?,
        "ista_step_size" => cfg.ista_step_size = parse_value(key, v)?,
        "dict_learning_rate" => cfg.dict_learning_rate = parse_value(key, v)?,
        "epochs" => cfg.epochs = parse_value(key, v)?,
        "seed" => cfg.seed = parse_value(key, v)?,
        "init_scale" => cfg.init_scale = parse_value(key, v)?,
        _ => return Err(Error::Config(format!("unknown spowv option {key:?}"))),
    }
    Ok(())
}

fn set_spine(cfg: &mut SpineConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "k" | "hidden" => cfg.hidden = parse_value(key, v)?,
        "lambda1" => cfg.lambda1 = parse_value(key, v)?,
        "lambda2" => cfg.lambda2 = parse_value(key, v)?,
        "lambda3" => cfg.lambda3 = parse_value(key, v)?,
        "rho_star" => cfg.rho_star = parse_value(key, v)?,
        "learning_rate" => cfg.learning_rate = parse_value(key, v)?,
        "epochs" => cfg.epochs = parse_value(key, v)?,
        "batch_size" => cfg.batch_size = parse_value(key, v)?,
        "seed" => cfg.seed = parse_value(key, v)?,
        "optimizer" => {
            cfg.optimizer = match v {
                "gd" => Optimizer::GradientDescent,
                "adam" => Optimizer::adam(),
                _ => return Err(Error::Config(format!("optimizer must be gd or adam, got {v:?}"))),
            }
        }
        _ => return Err(Error::Config(format!("unknown spine option {key:?}"))),
    }
    Ok(())
}

fn set_trainer(cfg: &mut TrainerConfig, key: &str, v: &str) -> Result<()> {
    match cfg {
        TrainerConfig::Spowv(c) => set_spowv(c, key, v),
        TrainerConfig::Spine(c) => set_spine(c, key, v),
    }
}

fn split_pair(s: &str) -> Result<(String, &str)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key=value, got {s:?}")))?;
    Ok((k.trim().replace('-', "_"), v.trim()))
}

fn check_inputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        embed_io::open(p)?;
    }
    Ok(())
}

fn check_outputs(paths: &[&Path]) -> Result<()> {
    for p in paths {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(Error::Io(io::Error::new(
                io::ErrorKind::NotFound,
                format!("{}: output directory does not exist", p.display()),
            )));
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| embed_io::io_at(path, e))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_words(args: &WordArgs) -> Result<Vec<String>> {
    let mut words = args.words.clone();
    if let Some(p) = &args.words_file {
        for line in BufReader::new(embed_io::open(p)?).lines() {
            let line = line?;
            let w = line.trim();
            if !w.is_empty() && !w.starts_with('#') {
                words.push(w.to_owned());
            }
        }
    }
    if words.is_empty() {
        return Err(Error::Config("no words given (use --word or --words-file)".into()));
    }
    Ok(words)
}

fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    read_embeddings_file(path)
}

fn run_prep(a: PrepArgs, mut s: Settings) -> Result<()> {
    let rules = NormalizationRules {
        strip_punctuation: !s.pick_switch(a.keep_punctuation, "keep_punctuation")?,
        collapse_numbers: !s.pick_switch(a.keep_numbers, "keep_numbers")?,
        lowercase: !s.pick_switch(a.keep_case, "keep_case")?,
    };
    s.finish()?;
    check_inputs(&[&a.input])?;
    check_outputs(&[&a.out])?;
    let reader = BufReader::new(embed_io::open(&a.input)?);
    let mut out = create(&a.out)?;
    let mut n = 0usize;
    for line in reader.lines() {
        let clean = normalize_text(&line?, rules);
        if !clean.is_empty() {
            writeln!(out, "{clean}")?;
            n += 1;
        }
    }
    out.flush()?;
    eprintln!("prep: wrote {n} lines to {}", a.out.display());
    Ok(())
}

fn run_spowv(a: SpowvArgs, mut s: Settings) -> Result<()> {
    let precision = s.pick(a.output.precision, "precision")?.unwrap_or(6);
    let mut cfg = SpowvConfig::default();
    let flags: [(&str, Option<String>); 9] = [
        ("k", a.k.map(|v| v.to_string())),
        ("lambda", a.lambda.map(|v| v.to_string())),
        ("tau", a.tau.map(|v| v.to_string())),
        ("ista_steps", a.ista_steps.map(|v| v.to_string())),
        ("ista_step_size", a.ista_step_size.map(|v| v.to_string())),
        ("dict_learning_rate", a.dict_learning_rate.map(|v| v.to_string())),
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("init_scale", a.init_scale.map(|v| v.to_string())),
    ];
    for (k, v) in s.drain() {
        set_spowv(&mut cfg, &k, &v)?;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            set_spowv(&mut cfg, k, &v)?;
        }
    }
    check_inputs(&[&a.emb])?;
    let outs: Vec<&Path> = [Some(a.out.as_path()), a.output.trace.as_deref(), a.output.checkpoint.as_deref()]
        .into_iter()
        .flatten()
        .collect();
    check_outputs(&outs)?;
    let x = load_embeddings(&a.emb)?;
    cfg.validate(x.dim())?;
    let fit = spowv_fit(&x, &cfg)?;
    for e in &fit.trace {
        eprintln!("spowv: epoch {} objective {:.6e} sparsity {:.4}", e.epoch, e.objective, e.sparsity);
    }
    let sparse = fit.embedding(&x)?;
    write_embeddings_file(&a.out, &sparse, precision)?;
    if let Some(p) = &a.output.trace {
        spowv::write_trace_csv(&fit.trace, create(p)?)?;
    }
    if let Some(p) = &a.output.checkpoint {
        let ckpt = SpowvCheckpoint {
            lambda: cfg.lambda,
            tau: cfg.tau,
            epoch: cfg.epochs,
            dictionary: fit.dictionary,
            codes: sparse,
        };
        spowv::write_checkpoint(&ckpt, precision, create(p)?)?;
    }
    Ok(())
}

fn run_spine(a: SpineArgs, mut s: Settings) -> Result<()> {
    let precision = s.pick(a.output.precision, "precision")?.unwrap_or(6);
    let mut cfg = SpineConfig::default();
    let flags: [(&str, Option<String>); 10] = [
        ("k", a.k.map(|v| v.to_string())),
        ("lambda1", a.lambda1.map(|v| v.to_string())),
        ("lambda2", a.lambda2.map(|v| v.to_string())),
        ("lambda3", a.lambda3.map(|v| v.to_string())),
        ("rho_star", a.rho_star.map(|v| v.to_string())),
        ("learning_rate", a.learning_rate.map(|v| v.to_string())),
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("batch_size", a.batch_size.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        (
            "optimizer",
            a.optimizer.map(|o| if o == OptimizerName::Adam { "adam" } else { "gd" }.to_owned()),
        ),
    ];
    for (k, v) in s.drain() {
        set_spine(&mut cfg, &k, &v)?;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            set_spine(&mut cfg, k, &v)?;
        }
    }
    cfg.validate()?;
    check_inputs(&[&a.emb])?;
    let outs: Vec<&Path> = [Some(a.out.as_path()), a.output.trace.as_deref(), a.output.checkpoint.as_deref()]
        .into_iter()
        .flatten()
        .collect();
    check_outputs(&outs)?;
    let x = load_embeddings(&a.emb)?;
    let fit = spine_train(&x, &cfg)?;
    for e in &fit.trace {
        eprintln!(
            "spine: epoch {} loss {:.6e} (rl {:.4e} asl {:.4e} psl {:.4e}) sparsity {:.4}",
            e.epoch, e.loss.total, e.loss.rl, e.loss.asl, e.loss.psl, e.mean_sparsity
        );
    }
    let sparse = spine_transform(&fit.model, &x)?;
    write_embeddings_file(&a.out, &sparse, precision)?;
    if let Some(p) = &a.output.trace {
        spine::write_trace_csv(&fit.trace, create(p)?)?;
    }
    if let Some(p) = &a.output.checkpoint {
        spine::write_checkpoint(&fit.model, create(p)?)?;
    }
    Ok(())
}

fn run_intrinsic(a: IntrinsicArgs, mut s: Settings) -> Result<()> {
    let scale_max = s.pick(a.scale_max, "scale_max")?.unwrap_or(10.0);
    s.finish()?;
    let mut inputs: Vec<&Path> = vec![&a.emb];
    inputs.extend(a.benches.iter().map(PathBuf::as_path));
    check_inputs(&inputs)?;
    check_outputs(&a.out.as_deref().into_iter().collect::<Vec<_>>())?;
    let emb = load_embeddings(&a.emb)?;
    let mut results = Vec::new();
    for path in &a.benches {
        let bench = parse_similarity_benchmark(BufReader::new(embed_io::open(path)?), &stem(path), scale_max)?;
        let r = evaluate_benchmark(&emb, &bench)?;
        eprintln!("eval-intrinsic: {} rho {:.4} ({} of {} pairs)", r.benchmark, r.rho, r.pairs_used, bench.pairs.len());
        results.push(r);
    }
    write_results_csv(&results, sink(a.out.as_deref())?)
}

fn run_interpret(a: InterpretArgs, mut s: Settings) -> Result<()> {
    let gamma = s.pick(a.gamma, "gamma")?.unwrap_or(1);
    let max_gamma = s.pick(a.max_gamma, "max_gamma")?.unwrap_or(10);
    s.finish()?;
    check_inputs(&[&a.emb, &a.categories])?;
    let outs: Vec<&Path> = a.out.as_deref().into_iter().chain(a.profile.as_deref()).collect();
    check_outputs(&outs)?;
    let emb = load_embeddings(&a.emb)?;
    let dataset = parse_category_dataset(BufReader::new(embed_io::open(&a.categories)?), Some(&emb))?;
    eprintln!(
        "eval-interpret: {} categories kept (mean size {:.1}), {} discarded",
        dataset.len(),
        dataset.mean_group_size(),
        dataset.discarded()
    );
    let result = interpretability_score(&emb, &dataset, gamma)?;
    eprintln!("eval-interpret: IS = {:.4} at gamma {gamma}", result.overall);
    write_is_report_csv(&result, sink(a.out.as_deref())?)?;
    if let Some(p) = &a.profile {
        let mut out = create(p)?;
        writeln!(out, "gamma,IS")?;
        for (g, is) in gamma_profile(&emb, &dataset, max_gamma)? {
            writeln!(out, "{g},{is:.4}")?;
        }
        out.flush()?;
    }
    Ok(())
}

fn run_extrinsic(a: ExtrinsicArgs, mut s: Settings) -> Result<()> {
    let d = ClassifierConfig::default();
    let folds = s.pick(a.folds, "folds")?.unwrap_or(10);
    let cfg = ClassifierConfig {
        l2: s.pick(a.l2, "l2")?.unwrap_or(d.l2),
        learning_rate: s.pick(a.learning_rate, "learning_rate")?.unwrap_or(d.learning_rate),
        epochs: s.pick(a.epochs, "epochs")?.unwrap_or(d.epochs),
        seed: s.pick(a.seed, "seed")?.unwrap_or(DEFAULT_SEED),
    };
    s.finish()?;
    let inputs: Vec<&Path> = a.embs.iter().chain(&a.tasks).map(PathBuf::as_path).collect();
    check_inputs(&inputs)?;
    check_outputs(&a.out.as_deref().into_iter().collect::<Vec<_>>())?;
    let tasks: Vec<(String, LabeledCorpus)> = a
        .tasks
        .iter()
        .map(|p| Ok((stem(p), parse_labeled_sentences(BufReader::new(embed_io::open(p)?))?)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for path in &a.embs {
        let emb = load_embeddings(path)?;
        let mut accs = Vec::new();
        for (name, corpus) in &tasks {
            let r = cross_validate(&emb, corpus, folds, &cfg)?;
            eprintln!(
                "eval-extrinsic: {} on {name}: mean accuracy {:.4} over {folds} folds ({} sentences without known words)",
                stem(path),
                r.mean_accuracy,
                r.oov_sentences
            );
            accs.push(r.mean_accuracy);
        }
        rows.push((stem(path), accs));
    }
    let names: Vec<String> = tasks.into_iter().map(|(n, _)| n).collect();
    write_cv_table_csv(&names, &rows, sink(a.out.as_deref())?)
}

fn run_top_words(a: TopWordsArgs, mut s: Settings) -> Result<()> {
    let top_k = s.pick(a.top_k, "top_k")?.unwrap_or(5);
    s.finish()?;
    check_inputs(&[&a.emb])?;
    check_outputs(&a.out.as_deref().into_iter().collect::<Vec<_>>())?;
    let words = read_words(&a.words)?;
    let emb = load_embeddings(&a.emb)?;
    let rows = words
        .into_iter()
        .map(|w| {
            let (dim, top) = dominating_dimension(&emb, &w, top_k)?;
            Ok((w, dim, top))
        })
        .collect::<Result<Vec<_>>>()?;
    write_top_words_report(&rows, sink(a.out.as_deref())?)
}

fn run_intrusion(a: IntrusionArgs, mut s: Settings) -> Result<()> {
    let count = s.pick(a.count, "count")?.unwrap_or(100);
    let seed = s.pick(a.seed, "seed")?.unwrap_or(DEFAULT_SEED);
    s.finish()?;
    check_inputs(&[&a.emb])?;
    check_outputs(&a.out.as_deref().into_iter().collect::<Vec<_>>())?;
    let emb = load_embeddings(&a.emb)?;
    let questions = generate_intrusion_questions(&emb, count, &mut SeededRng::new(seed))?;
    write_questions(&questions, sink(a.out.as_deref())?)
}

fn run_heatmap(a: HeatmapArgs, mut s: Settings) -> Result<()> {
    let group_size = s.pick(a.group_size, "group_size")?.unwrap_or(3);
    s.finish()?;
    check_inputs(&a.embs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;
    check_outputs(&[&a.csv, &a.svg])?;
    let words = read_words(&a.words)?;
    let embs: Vec<(String, EmbeddingMatrix)> = a
        .embs
        .iter()
        .map(|p| Ok((stem(p), load_embeddings(p)?)))
        .collect::<Result<_>>()?;
    let panels: Vec<(&str, &EmbeddingMatrix)> = embs.iter().map(|(n, e)| (n.as_str(), e)).collect();
    export_heatmap(&panels, &words, group_size, &a.csv, &a.svg)?;
    Ok(())
}

fn run_tune(a: TuneArgs, mut s: Settings) -> Result<()> {
    let top_k = s.pick(a.top_k, "top_k")?.unwrap_or(10);
    let mut base = match a.trainer {
        TrainerName::Spowv => TrainerConfig::Spowv(SpowvConfig::default()),
        TrainerName::Spine => TrainerConfig::Spine(SpineConfig::default()),
    };
    for (k, v) in s.drain() {
        set_trainer(&mut base, &k, &v)?;
    }
    for pair in &a.set {
        let (k, v) = split_pair(pair)?;
        set_trainer(&mut base, &k, v)?;
    }
    let mut grid = vec![base];
    for axis in &a.grid {
        let (k, values) = split_pair(axis)?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::Config(format!("grid axis {k:?} has no values")));
        }
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for cfg in &grid {
            for v in &values {
                let mut c = cfg.clone();
                set_trainer(&mut c, &k, v)?;
                next.push(c);
            }
        }
        grid = next;
    }
    let mut inputs: Vec<&Path> = vec![&a.emb];
    inputs.extend(a.dense.as_deref());
    check_inputs(&inputs)?;
    check_outputs(&a.out.as_deref().into_iter().collect::<Vec<_>>())?;
    let probes = read_words(&a.probes)?;
    let x = load_embeddings(&a.emb)?;
    let dense = match &a.dense {
        Some(p) => load_embeddings(p)?,
        None => x.clone(),
    };
    let records = hyperparam_search(&grid, &x, &dense, &probes, top_k)?;
    match records.first() {
        Some(SearchRecord { config, score: Some(score), .. }) => eprintln!("tune: best {config} (score {score:.4})"),
        _ => eprintln!("tune: every configuration failed"),
    }
    write_search_csv(&records, sink(a.out.as_deref())?)
}

fn run(command: Command, settings: Settings) -> Result<()> {
    match command {
        Command::Prep(a) => run_prep(a, settings),
        Command::Spowv(a) => run_spowv(a, settings),
        Command::Spine(a) => run_spine(a, settings),
        Command::EvalIntrinsic(a) => run_intrinsic(a, settings),
        Command::EvalInterpret(a) => run_interpret(a, settings),
        Command::EvalExtrinsic(a) => run_extrinsic(a, settings),
        Command::TopWords(a) => run_top_words(a, settings),
        Command::Intrusion(a) => run_intrusion(a, settings),
        Command::Heatmap(a) => run_heatmap(a, settings),
        Command::Tune(a) => run_tune(a, settings),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Divergence(_) => EXIT_DIVERGENCE,
        _ => EXIT_DATA,
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = (|| {
        let settings = match &cli.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        match cli.threads {
            Some(0) => Err(Error::Config("--threads must be at least 1".into())),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?
                .install(|| run(cli.command, settings)),
            None => run(cli.command, settings),
        }
    })();
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(dispatch(["sparse-interp"]), EXIT_USAGE);
        assert_eq!(dispatch(["sparse-interp", "spowv", "--emb", "x"]), EXIT_USAGE);
        assert_eq!(dispatch(["sparse-interp", "--help"]), EXIT_OK);
    }

    #[test]
    fn settings_precedence() {
        let mut s = Settings::default();
        s.entries.insert("gamma".into(), "3".into());
        s.entries.insert("top_k".into(), "7".into());
        assert_eq!(s.pick(Some(2usize), "gamma").unwrap(), Some(2));
        assert_eq!(s.pick(None::<usize>, "top_k").unwrap(), Some(7));
        assert_eq!(s.pick(None::<usize>, "count").unwrap(), None);
        assert!(s.finish().is_ok());
        let mut bad = Settings::default();
        bad.entries.insert("gama".into(), "3".into());
        assert!(matches!(bad.finish(), Err(Error::Config(_))));
    }

    #[test]
    fn trainer_keys() {
        let mut c = SpowvConfig::default();
        set_spowv(&mut c, "lambda", "0.25").unwrap();
        set_spowv(&mut c, "dict_learning_rate", "0.01").unwrap();
        assert_eq!((c.lambda, c.dict_learning_rate), (0.25, StepSize::Fixed(0.01)));
        assert!(set_spowv(&mut c, "lambda1", "1").is_err());
        let mut t = SpineConfig::default();
        set_spine(&mut t, "optimizer", "adam").unwrap();
        set_spine(&mut t, "k", "12").unwrap();
        assert_eq!((t.optimizer, t.hidden), (Optimizer::adam(), 12));
    }
}
