//! Sparse overcomplete word vectors by dictionary learning.
//!
//! Minimizes
//!
//! ```text
//! Σ_i ‖x_i − a_i D‖² + λ‖a_i‖₁   +   τ‖D‖²_F
//! ```
//!
//! over codes `A` (V×K) and dictionary `D` (K×L), with `K > L`. The ridge
//! term on `D` is counted once rather than once per row; a per-row penalty
//! would only rescale `τ` by `V`.
//!
//! Each epoch runs a full sparse-coding pass (ISTA, warm-started from the
//! previous codes, rows in parallel) followed by one gradient step on `D`.
//! With the default `Auto` step sizes both half-steps are majorization steps,
//! so the objective never increases. Codes are signed; nothing constrains them
//! to be non-negative.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::embed_io::{parse_dense_embeddings, write_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::numcore::{dot, gram_max_eigenvalue, DivergenceMonitor, Matrix, SeededRng};
use crate::ZERO_EPS;

/// Power-iteration steps used to estimate curvature for `Auto` step sizes.
pub const POWER_ITERATIONS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    /// Inverse of the Lipschitz constant of the smooth part, estimated by
    /// power iteration.
    Auto,
    Fixed(f64),
}

impl std::fmt::Display for StepSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepSize::Auto => f.write_str("auto"),
            StepSize::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl std::str::FromStr for StepSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(StepSize::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v > 0.0)
            .map(StepSize::Fixed)
            .ok_or_else(|| Error::Config(format!("step size must be \"auto\" or a positive number, got {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpowvConfig {
    /// Sparse dimension `K`; must exceed the input dimension.
    pub k: usize,
    /// ℓ1 weight on the codes.
    pub lambda: f64,
    /// Ridge weight on the dictionary, applied once (not per row).
    pub tau: f64,
    /// ISTA iterations per row per epoch.
    pub ista_steps: usize,
    pub ista_step_size: StepSize,
    pub dict_learning_rate: StepSize,
    pub epochs: usize,
    pub seed: u64,
    /// Dictionary entries start uniform in `(-init_scale, init_scale)`.
    pub init_scale: f64,
}

impl Default for SpowvConfig {
    fn default() -> Self {
        SpowvConfig {
            k: 1000,
            lambda: 0.5,
            tau: 1e-5,
            ista_steps: 20,
            ista_step_size: StepSize::Auto,
            dict_learning_rate: StepSize::Auto,
            epochs: 50,
            seed: 42,
            init_scale: 0.1,
        }
    }
}

impl SpowvConfig {
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.k <= input_dim {
            return Err(Error::Config(format!(
                "K = {} must exceed the input dimension {input_dim}",
                self.k
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.ista_steps == 0 || self.epochs == 0 {
            return Err(Error::Config("ista_steps and epochs must be positive".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!(
                "init_scale must be positive, got {}",
                self.init_scale
            )));
        }
        for s in [self.ista_step_size, self.dict_learning_rate] {
            if let StepSize::Fixed(v) = s {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("step sizes must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// `D`: K basis vectors of length L.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    pub bases: Matrix,
}

/// `A`: one K-dimensional code per word.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCodes {
    pub codes: Matrix,
}

impl SparseCodes {
    /// Fraction of entries with magnitude below [`ZERO_EPS`].
    pub fn sparsity(&self) -> f64 {
        zero_fraction(self.codes.as_slice())
    }
}

pub(crate) fn zero_fraction(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| v.abs() < ZERO_EPS).count() as f64 / values.len() as f64
}

/// `sign(z) · max(|z| − t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_shapes(x: &Matrix, d: &Dictionary, a: &SparseCodes) -> Result<()> {
    let (v, l) = x.shape();
    let (k, dl) = d.bases.shape();
    let (av, ak) = a.codes.shape();
    if dl != l || av != v || ak != k {
        return Err(Error::Shape(format!(
            "X is {v}x{l}, D is {k}x{dl}, A is {av}x{ak}"
        )));
    }
    Ok(())
}

/// `x − a D`.
fn residual(x: &[f64], a: &[f64], d: &Matrix) -> Vec<f64> {
    let mut r = x.to_vec();
    for (k, &ak) in a.iter().enumerate() {
        if ak == 0.0 {
            continue;
        }
        for (rl, &dkl) in r.iter_mut().zip(d.row(k)) {
            *rl -= ak * dkl;
        }
    }
    r
}

fn row_objective(x: &[f64], a: &[f64], d: &Matrix, lambda: f64) -> f64 {
    let r = residual(x, a, d);
    dot(&r, &r) + lambda * a.iter().map(|v| v.abs()).sum::<f64>()
}

fn row_terms(x: &Matrix, d: &Matrix, a: &Matrix, lambda: f64) -> Vec<f64> {
    (0..x.rows())
        .into_par_iter()
        .map(|i| row_objective(x.row(i), a.row(i), d, lambda))
        .collect()
}

/// The full objective. Row terms are summed in row order.
pub fn spowv_objective(x: &Matrix, d: &Dictionary, a: &SparseCodes, cfg: &SpowvConfig) -> Result<f64> {
    check_shapes(x, d, a)?;
    let rows: f64 = row_terms(x, &d.bases, &a.codes, cfg.lambda).into_iter().sum();
    Ok(rows + cfg.tau * d.bases.frobenius_sq())
}

/// Reconstruction mean squared error over all V·L entries.
pub fn reconstruction_mse(x: &Matrix, d: &Dictionary, a: &SparseCodes) -> Result<f64> {
    check_shapes(x, d, a)?;
    let total: f64 = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let r = residual(x.row(i), a.codes.row(i), &d.bases);
            dot(&r, &r)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total / (x.rows() * x.cols()).max(1) as f64)
}

/// ISTA step size for a fixed dictionary: `1 / (2 σ_max(D Dᵀ))`.
pub fn ista_step(d: &Dictionary, step: StepSize) -> f64 {
    match step {
        StepSize::Fixed(s) => s,
        StepSize::Auto => {
            let sigma = gram_max_eigenvalue(&d.bases, POWER_ITERATIONS);
            if sigma > 0.0 {
                1.0 / (2.0 * sigma)
            } else {
                1.0
            }
        }
    }
}

/// Runs `steps` proximal-gradient iterations on one row's lasso problem.
pub(crate) fn ista(x: &[f64], d: &Matrix, lambda: f64, step: f64, steps: usize, a: &mut [f64]) -> Result<()> {
    let threshold = lambda * step;
    let mut grad = vec![0.0; a.len()];
    for _ in 0..steps {
        let r = residual(x, a, d);
        // ∇ ‖x − aD‖² = −2 (x − aD) Dᵀ
        for (k, g) in grad.iter_mut().enumerate() {
            *g = -2.0 * dot(&r, d.row(k));
        }
        for (ak, g) in a.iter_mut().zip(&grad) {
            *ak = soft_threshold(*ak - step * g, threshold);
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "sparse coding produced a non-finite code (step size {step})"
            )));
        }
    }
    Ok(())
}

/// Solves one row's subproblem `‖x − aD‖² + λ‖a‖₁` by `cfg.ista_steps`
/// ISTA iterations starting from `a_init`.
pub fn sparse_code_step(x_row: &[f64], d: &Dictionary, cfg: &SpowvConfig, a_init: &[f64]) -> Result<Vec<f64>> {
    let (k, l) = d.bases.shape();
    if x_row.len() != l || a_init.len() != k {
        return Err(Error::Shape(format!(
            "row of length {}, code of length {}, dictionary {k}x{l}",
            x_row.len(),
            a_init.len()
        )));
    }
    let step = ista_step(d, cfg.ista_step_size);
    let mut a = a_init.to_vec();
    ista(x_row, &d.bases, cfg.lambda, step, cfg.ista_steps, &mut a)?;
    Ok(a)
}

/// One gradient step on `Σ_i ‖x_i − a_i D‖² + τ‖D‖²` with `A` fixed.
///
/// `Auto` uses the rate `1 / (2 (σ_max(AᵀA) + τ))`.
pub fn dictionary_update(x: &Matrix, a: &SparseCodes, d: &Dictionary, cfg: &SpowvConfig) -> Result<Dictionary> {
    check_shapes(x, d, a)?;
    let rate = match cfg.dict_learning_rate {
        StepSize::Fixed(r) => r,
        StepSize::Auto => {
            let curvature = 2.0 * (gram_max_eigenvalue(&a.codes, POWER_ITERATIONS) + cfg.tau);
            if curvature == 0.0 {
                // A = 0 and τ = 0: the gradient vanishes.
                return Ok(d.clone());
            }
            1.0 / curvature
        }
    };
    let residuals: Vec<Vec<f64>> = (0..x.rows())
        .into_par_iter()
        .map(|i| residual(x.row(i), a.codes.row(i), &d.bases))
        .collect();
    let (k, l) = d.bases.shape();
    let rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|kk| {
            let mut g = vec![0.0; l];
            for (i, r) in residuals.iter().enumerate() {
                let aik = a.codes.get(i, kk);
                if aik == 0.0 {
                    continue;
                }
                for (gl, &rl) in g.iter_mut().zip(r) {
                    *gl += aik * rl;
                }
            }
            d.bases
                .row(kk)
                .iter()
                .zip(&g)
                .map(|(&dkl, &gl)| dkl - rate * (-2.0 * gl + 2.0 * cfg.tau * dkl))
                .collect()
        })
        .collect();
    let bases = Matrix::from_rows(&rows)
        .map_err(|_| Error::Divergence(format!("dictionary update went non-finite (rate {rate})")))?;
    Ok(Dictionary { bases })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpowvEpoch {
    pub epoch: usize,
    pub objective: f64,
    pub sparsity: f64,
}

#[derive(Clone, Debug)]
pub struct SpowvFit {
    pub dictionary: Dictionary,
    pub codes: SparseCodes,
    /// Epoch 0 is the initial state (zero codes); then one entry per epoch.
    pub trace: Vec<SpowvEpoch>,
}

impl SpowvFit {
    /// The codes as an embedding over the input vocabulary.
    pub fn embedding(&self, input: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        input.with_values(self.codes.codes.clone())
    }
}

/// Alternates sparse coding and dictionary updates for `cfg.epochs` epochs.
pub fn spowv_fit(x: &EmbeddingMatrix, cfg: &SpowvConfig) -> Result<SpowvFit> {
    let xm = x.values();
    cfg.validate(xm.cols())?;
    let mut rng = SeededRng::new(cfg.seed);
    let mut dictionary = Dictionary {
        bases: Matrix::random_uniform(cfg.k, xm.cols(), cfg.init_scale, &mut rng),
    };
    let mut codes = SparseCodes {
        codes: Matrix::zeros(xm.rows(), cfg.k),
    };
    let initial = spowv_objective(xm, &dictionary, &codes, cfg)?;
    let mut trace = vec![SpowvEpoch {
        epoch: 0,
        objective: initial,
        sparsity: codes.sparsity(),
    }];
    let mut monitor = DivergenceMonitor::new(initial);

    for epoch in 1..=cfg.epochs {
        let step = ista_step(&dictionary, cfg.ista_step_size);
        let new_rows: Vec<Result<Vec<f64>>> = (0..xm.rows())
            .into_par_iter()
            .map(|i| {
                let mut a = codes.codes.row(i).to_vec();
                ista(xm.row(i), &dictionary.bases, cfg.lambda, step, cfg.ista_steps, &mut a)?;
                Ok(a)
            })
            .collect();
        for (i, row) in new_rows.into_iter().enumerate() {
            codes.codes.row_mut(i).copy_from_slice(&row?);
        }
        dictionary = dictionary_update(xm, &codes, &dictionary, cfg)?;

        let objective = spowv_objective(xm, &dictionary, &codes, cfg)?;
        trace.push(SpowvEpoch {
            epoch,
            objective,
            sparsity: codes.sparsity(),
        });
        monitor.observe(objective, epoch)?;
    }
    Ok(SpowvFit {
        dictionary,
        codes,
        trace,
    })
}

/// `epoch,objective,sparsity` rows.
pub fn write_trace_csv<W: Write>(trace: &[SpowvEpoch], mut out: W) -> Result<()> {
    writeln!(out, "epoch,objective,sparsity")?;
    for e in trace {
        writeln!(out, "{},{:.12e},{:.6}", e.epoch, e.objective, e.sparsity)?;
    }
    out.flush()?;
    Ok(())
}

/// Everything needed to resume or inspect a fit.
#[derive(Clone, Debug)]
pub struct SpowvCheckpoint {
    pub lambda: f64,
    pub tau: f64,
    pub epoch: usize,
    pub dictionary: Dictionary,
    /// Codes keyed by the training vocabulary.
    pub codes: EmbeddingMatrix,
}

const CHECKPOINT_MAGIC: &str = "spowv-checkpoint";

/// Layout: `spowv-checkpoint V L K lambda tau epoch`, then `D` in embedding
/// text format with tokens `basis0..`, then `A` in embedding text format.
pub fn write_checkpoint<W: Write>(ckpt: &SpowvCheckpoint, precision: usize, mut out: W) -> Result<()> {
    let (k, l) = ckpt.dictionary.bases.shape();
    writeln!(
        out,
        "{CHECKPOINT_MAGIC} {} {l} {k} {} {} {}",
        ckpt.codes.len(),
        ckpt.lambda,
        ckpt.tau,
        ckpt.epoch
    )?;
    let bases = EmbeddingMatrix::new(
        (0..k).map(|i| format!("basis{i}")).collect(),
        ckpt.dictionary.bases.clone(),
    )?;
    write_embeddings(&bases, precision, &mut out)?;
    write_embeddings(&ckpt.codes, precision, &mut out)?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut reader: R) -> Result<SpowvCheckpoint> {
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 7 || fields[0] != CHECKPOINT_MAGIC {
        return Err(Error::parse(1, "not a spowv checkpoint header"));
    }
    let num = |i: usize| -> Result<f64> {
        fields[i]
            .parse()
            .map_err(|_| Error::parse(1, format!("bad header field {:?}", fields[i])))
    };
    let (v, l, k) = (num(1)? as usize, num(2)? as usize, num(3)? as usize);
    let (lambda, tau, epoch) = (num(4)?, num(5)?, num(6)? as usize);

    let mut section = |rows: usize| -> Result<String> {
        let mut text = String::new();
        for _ in 0..=rows {
            if reader.read_line(&mut text)? == 0 {
                return Err(Error::EmptyInput("checkpoint is truncated".into()));
            }
        }
        Ok(text)
    };
    let bases = parse_dense_embeddings(section(k)?.as_bytes())?;
    let codes = parse_dense_embeddings(section(v)?.as_bytes())?;
    if bases.dim() != l || codes.dim() != k {
        return Err(Error::Shape(format!(
            "checkpoint header says L={l}, K={k}; found D {}x{} and A {}x{}",
            bases.len(),
            bases.dim(),
            codes.len(),
            codes.dim()
        )));
    }
    Ok(SpowvCheckpoint {
        lambda,
        tau,
        epoch,
        dictionary: Dictionary {
            bases: bases.values().clone(),
        },
        codes,
    })
}
