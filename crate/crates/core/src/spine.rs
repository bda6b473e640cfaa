//! Sparse autoencoder with a capped hidden layer.
//!
//! Encoder `Z = clamp(X Wₑᵀ + bₑ, 0, 1)`, decoder `X̃ = Z W_dᵀ + b_d`, with
//! untied weights. The loss is `λ1·RL + λ2·ASL + λ3·PSL`:
//!
//! - `RL`: mean over samples of `‖X − X̃‖²`;
//! - `ASL`: `Σ_h max(0, ρ̂_h − ρ*)²`, where `ρ̂_h` is unit `h`'s mean
//!   activation over the batch (over the full dataset in reported traces);
//! - `PSL`: mean over samples of `Σ_h Z_h (1 − Z_h)`.
//!
//! Gradients are derived by hand. The clamp passes gradient only where the
//! pre-activation lies strictly inside `(0, 1)`; exactly at 0 or 1 it passes
//! none.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::embed_io::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numcore::{dot, DivergenceMonitor, Matrix, SeededRng};

/// Activations above this count as "on" in sparsity statistics.
pub const ACTIVE_THRESHOLD: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    GradientDescent,
    /// Adaptive moments with bias correction.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpineConfig {
    /// Hidden (sparse) dimension `K`.
    pub hidden: usize,
    /// Weight of the reconstruction loss.
    pub lambda1: f64,
    /// Weight of the average sparsity loss.
    pub lambda2: f64,
    /// Weight of the partial sparsity loss.
    pub lambda3: f64,
    /// Target mean activation `ρ*`, shared by all units.
    pub rho_star: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for SpineConfig {
    fn default() -> Self {
        SpineConfig {
            hidden: 1000,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.1,
            rho_star: 0.15,
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 64,
            seed: 42,
            optimizer: Optimizer::GradientDescent,
        }
    }
}

impl SpineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden must be at least 1".into()));
        }
        if !(self.rho_star > 0.0 && self.rho_star < 1.0) {
            return Err(Error::Config(format!("rho_star must lie in (0, 1), got {}", self.rho_star)));
        }
        for (name, w) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {w}")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Autoencoder parameters. The same layout holds gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpineModel {
    /// K×L
    pub enc_weights: Matrix,
    /// K
    pub enc_bias: Vec<f64>,
    /// L×K
    pub dec_weights: Matrix,
    /// L
    pub dec_bias: Vec<f64>,
}

impl SpineModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        SpineModel {
            enc_weights: Matrix::zeros(hidden, input_dim),
            enc_bias: vec![0.0; hidden],
            dec_weights: Matrix::zeros(input_dim, hidden),
            dec_bias: vec![0.0; input_dim],
        }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn random(input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let enc_scale = 1.0 / (input_dim as f64).sqrt();
        let dec_scale = 1.0 / (hidden as f64).sqrt();
        SpineModel {
            enc_weights: Matrix::random_uniform(hidden, input_dim, enc_scale, rng),
            enc_bias: vec![0.0; hidden],
            dec_weights: Matrix::random_uniform(input_dim, hidden, dec_scale, rng),
            dec_bias: vec![0.0; input_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.enc_weights.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.enc_weights.rows()
    }

    /// The four parameter blocks in a fixed order.
    pub fn blocks(&self) -> [&[f64]; 4] {
        [
            self.enc_weights.as_slice(),
            &self.enc_bias,
            self.dec_weights.as_slice(),
            &self.dec_bias,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.enc_weights.as_mut_slice(),
            &mut self.enc_bias,
            self.dec_weights.as_mut_slice(),
            &mut self.dec_bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        let (k, l) = self.enc_weights.shape();
        if self.enc_bias.len() != k || self.dec_weights.shape() != (l, k) || self.dec_bias.len() != l {
            return Err(Error::Shape("inconsistent autoencoder parameter shapes".into()));
        }
        if x.cols() != l {
            return Err(Error::Shape(format!(
                "input has {} columns, model expects {l}",
                x.cols()
            )));
        }
        if !self.is_finite() {
            return Err(Error::Divergence("model parameters are non-finite".into()));
        }
        Ok(())
    }

    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.enc_bias
            .iter()
            .enumerate()
            .map(|(k, b)| dot(self.enc_weights.row(k), x) + b)
            .collect()
    }

    fn decode(&self, z: &[f64]) -> Vec<f64> {
        self.dec_bias
            .iter()
            .enumerate()
            .map(|(l, b)| dot(self.dec_weights.row(l), z) + b)
            .collect()
    }
}

#[inline]
fn clamp_unit(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

struct Forward {
    pre: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    xhat: Vec<Vec<f64>>,
}

fn forward_rows(model: &SpineModel, x: &Matrix) -> Forward {
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let pre = model.pre_activation(x.row(i));
            let z: Vec<f64> = pre.iter().copied().map(clamp_unit).collect();
            let xhat = model.decode(&z);
            (pre, z, xhat)
        })
        .collect();
    let mut f = Forward {
        pre: Vec::with_capacity(rows.len()),
        z: Vec::with_capacity(rows.len()),
        xhat: Vec::with_capacity(rows.len()),
    };
    for (p, z, xh) in rows {
        f.pre.push(p);
        f.z.push(z);
        f.xhat.push(xh);
    }
    f
}

fn to_matrix(rows: Vec<Vec<f64>>, cols: usize) -> Matrix {
    let n = rows.len();
    Matrix::new(n, cols, rows.into_iter().flatten().collect()).expect("finite forward pass")
}

/// Hidden activations `Z` and reconstruction `X̃` for every row of `x`.
pub fn spine_forward(model: &SpineModel, x: &Matrix) -> Result<(Matrix, Matrix)> {
    model.check(x)?;
    let f = forward_rows(model, x);
    let z = Matrix::new(x.rows(), model.hidden_dim(), f.z.into_iter().flatten().collect());
    let xhat = Matrix::new(x.rows(), model.input_dim(), f.xhat.into_iter().flatten().collect());
    match (z, xhat) {
        (Ok(z), Ok(xhat)) => Ok((z, xhat)),
        _ => Err(Error::Divergence("forward pass produced non-finite values".into())),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub rl: f64,
    pub asl: f64,
    pub psl: f64,
    /// Mean activation of each hidden unit.
    pub rho_hat: Vec<f64>,
}

fn breakdown(x: &Matrix, f: &Forward, cfg: &SpineConfig) -> LossBreakdown {
    let n = x.rows() as f64;
    let k = f.z.first().map_or(0, Vec::len);
    let mut rl = 0.0;
    for (i, xh) in f.xhat.iter().enumerate() {
        rl += x.row(i).iter().zip(xh).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    rl /= n;
    let mut rho_hat = vec![0.0; k];
    let mut psl = 0.0;
    for z in &f.z {
        for (r, &zh) in rho_hat.iter_mut().zip(z) {
            *r += zh;
        }
        psl += z.iter().map(|&zh| zh * (1.0 - zh)).sum::<f64>();
    }
    psl /= n;
    rho_hat.iter_mut().for_each(|r| *r /= n);
    let asl: f64 = rho_hat
        .iter()
        .map(|&r| {
            let excess = (r - cfg.rho_star).max(0.0);
            excess * excess
        })
        .sum();
    let total = cfg.lambda1 * rl + cfg.lambda2 * asl + cfg.lambda3 * psl;
    LossBreakdown {
        total,
        rl,
        asl,
        psl,
        rho_hat,
    }
}

pub fn spine_loss(model: &SpineModel, batch: &Matrix, cfg: &SpineConfig) -> Result<LossBreakdown> {
    if batch.rows() == 0 {
        return Err(Error::EmptyInput("loss of an empty batch".into()));
    }
    model.check(batch)?;
    Ok(breakdown(batch, &forward_rows(model, batch), cfg))
}

/// Loss and its gradient with respect to every parameter.
pub fn spine_loss_and_gradients(
    model: &SpineModel,
    batch: &Matrix,
    cfg: &SpineConfig,
) -> Result<(LossBreakdown, SpineModel)> {
    if batch.rows() == 0 {
        return Err(Error::EmptyInput("gradient of an empty batch".into()));
    }
    model.check(batch)?;
    let f = forward_rows(model, batch);
    let loss = breakdown(batch, &f, cfg);
    let n = batch.rows() as f64;
    let (k, l) = model.enc_weights.shape();

    // ∂ASL/∂Z_xh = 2 max(0, ρ̂_h − ρ*) / n, the same for every sample.
    let asl_pull: Vec<f64> = loss
        .rho_hat
        .iter()
        .map(|&r| 2.0 * (r - cfg.rho_star).max(0.0) / n)
        .collect();

    // Per sample: G = ∂L/∂X̃ (length L) and ∂L/∂P (length K).
    let per_row: Vec<(Vec<f64>, Vec<f64>)> = (0..batch.rows())
        .into_par_iter()
        .map(|i| {
            let x = batch.row(i);
            let g: Vec<f64> = f.xhat[i]
                .iter()
                .zip(x)
                .map(|(xh, xv)| cfg.lambda1 * 2.0 * (xh - xv) / n)
                .collect();
            let dp: Vec<f64> = (0..k)
                .map(|h| {
                    let p = f.pre[i][h];
                    if p <= 0.0 || p >= 1.0 {
                        return 0.0;
                    }
                    let z = f.z[i][h];
                    let mut dz = 0.0;
                    for (ll, &gl) in g.iter().enumerate() {
                        dz += gl * model.dec_weights.get(ll, h);
                    }
                    dz += cfg.lambda2 * asl_pull[h];
                    dz += cfg.lambda3 * (1.0 - 2.0 * z) / n;
                    dz
                })
                .collect();
            (g, dp)
        })
        .collect();

    // Weight gradients: sums over samples in sample order, rows in parallel.
    let enc_rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|h| {
            let mut acc = vec![0.0; l];
            for (i, (_, dp)) in per_row.iter().enumerate() {
                let d = dp[h];
                if d == 0.0 {
                    continue;
                }
                for (a, &xv) in acc.iter_mut().zip(batch.row(i)) {
                    *a += d * xv;
                }
            }
            acc
        })
        .collect();
    let dec_rows: Vec<Vec<f64>> = (0..l)
        .into_par_iter()
        .map(|ll| {
            let mut acc = vec![0.0; k];
            for (i, (g, _)) in per_row.iter().enumerate() {
                let gl = g[ll];
                for (a, &zh) in acc.iter_mut().zip(&f.z[i]) {
                    *a += gl * zh;
                }
            }
            acc
        })
        .collect();
    let mut enc_bias = vec![0.0; k];
    let mut dec_bias = vec![0.0; l];
    for (g, dp) in &per_row {
        for (b, d) in enc_bias.iter_mut().zip(dp) {
            *b += d;
        }
        for (b, gl) in dec_bias.iter_mut().zip(g) {
            *b += gl;
        }
    }
    let grads = SpineModel {
        enc_weights: to_matrix(enc_rows, l),
        enc_bias,
        dec_weights: to_matrix(dec_rows, k),
        dec_bias,
    };
    if !grads.is_finite() {
        return Err(Error::Divergence("gradient is non-finite".into()));
    }
    Ok((loss, grads))
}

pub fn spine_gradients(model: &SpineModel, batch: &Matrix, cfg: &SpineConfig) -> Result<SpineModel> {
    spine_loss_and_gradients(model, batch, cfg).map(|(_, g)| g)
}

/// Fraction of activations above [`ACTIVE_THRESHOLD`].
pub fn active_fraction(z: &Matrix) -> f64 {
    let s = z.as_slice();
    if s.is_empty() {
        return 0.0;
    }
    s.iter().filter(|&&v| v > ACTIVE_THRESHOLD).count() as f64 / s.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpineEpoch {
    pub epoch: usize,
    /// Full-dataset loss after the epoch.
    pub loss: LossBreakdown,
    /// Fraction of activations at or below [`ACTIVE_THRESHOLD`].
    pub mean_sparsity: f64,
}

#[derive(Clone, Debug)]
pub struct SpineFit {
    pub model: SpineModel,
    /// Epoch 0 is the initialized model; then one entry per epoch.
    pub trace: Vec<SpineEpoch>,
}

struct OptimizerState {
    step: i32,
    m: SpineModel,
    v: SpineModel,
}

fn apply_update(model: &mut SpineModel, grads: &SpineModel, cfg: &SpineConfig, state: &mut OptimizerState) {
    match cfg.optimizer {
        Optimizer::GradientDescent => {
            for (p, g) in model.blocks_mut().into_iter().zip(grads.blocks()) {
                for (pv, gv) in p.iter_mut().zip(g) {
                    *pv -= cfg.learning_rate * gv;
                }
            }
        }
        Optimizer::Adam { beta1, beta2, epsilon } => {
            state.step += 1;
            let c1 = 1.0 - beta1.powi(state.step);
            let c2 = 1.0 - beta2.powi(state.step);
            let params = model.blocks_mut();
            let ms = state.m.blocks_mut();
            let vs = state.v.blocks_mut();
            for (((p, g), m), v) in params.into_iter().zip(grads.blocks()).zip(ms).zip(vs) {
                for i in 0..p.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    p[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                }
            }
        }
    }
}

fn epoch_stats(model: &SpineModel, x: &Matrix, cfg: &SpineConfig, epoch: usize) -> SpineEpoch {
    let f = forward_rows(model, x);
    let loss = breakdown(x, &f, cfg);
    let total = f.z.iter().map(Vec::len).sum::<usize>();
    let active = f.z.iter().flatten().filter(|&&v| v > ACTIVE_THRESHOLD).count();
    SpineEpoch {
        epoch,
        loss,
        mean_sparsity: if total == 0 { 0.0 } else { 1.0 - active as f64 / total as f64 },
    }
}

/// Mini-batch training from a seeded initialization with a seeded batch
/// order. Substream 0 of the seed initializes the model; substream 1
/// shuffles the rows each epoch.
pub fn spine_train(x: &EmbeddingMatrix, cfg: &SpineConfig) -> Result<SpineFit> {
    cfg.validate()?;
    let data = x.values();
    if data.rows() < cfg.batch_size {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} training rows",
            cfg.batch_size,
            data.rows()
        )));
    }
    let root = SeededRng::new(cfg.seed);
    let mut init_rng = root.substream(0);
    let mut order_rng = root.substream(1);
    let mut model = SpineModel::random(data.cols(), cfg.hidden, &mut init_rng);
    let mut state = OptimizerState {
        step: 0,
        m: SpineModel::zeros(data.cols(), cfg.hidden),
        v: SpineModel::zeros(data.cols(), cfg.hidden),
    };
    let first = epoch_stats(&model, data, cfg, 0);
    let mut monitor = DivergenceMonitor::new(first.loss.total);
    let mut trace = vec![first];
    let mut order: Vec<usize> = (0..data.rows()).collect();

    for epoch in 1..=cfg.epochs {
        order_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select_rows(chunk);
            let (_, grads) = spine_loss_and_gradients(&model, &batch, cfg)?;
            apply_update(&mut model, &grads, cfg, &mut state);
        }
        if !model.is_finite() {
            return Err(Error::Divergence(format!("parameters went non-finite in epoch {epoch}")));
        }
        let stats = epoch_stats(&model, data, cfg, epoch);
        let total = stats.loss.total;
        trace.push(stats);
        monitor.observe(total, epoch)?;
    }
    Ok(SpineFit { model, trace })
}

/// Replaces each vector by its hidden activations; values lie in `[0, 1]`.
pub fn spine_transform(model: &SpineModel, x: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let (z, _) = spine_forward(model, x.values())?;
    x.with_values(z)
}

/// `epoch,total,rl,asl,psl,mean_sparsity` rows.
pub fn write_trace_csv<W: Write>(trace: &[SpineEpoch], mut out: W) -> Result<()> {
    writeln!(out, "epoch,total,rl,asl,psl,mean_sparsity")?;
    for e in trace {
        writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.6}",
            e.epoch, e.loss.total, e.loss.rl, e.loss.asl, e.loss.psl, e.mean_sparsity
        )?;
    }
    out.flush()?;
    Ok(())
}

const CHECKPOINT_MAGIC: &str = "spine-checkpoint";

/// Layout: `spine-checkpoint L K`, then encoder weights (K lines of L
/// values), encoder bias (1 line), decoder weights (L lines of K values),
/// decoder bias (1 line). Values use shortest round-trip formatting, so a
/// checkpoint reloads bit-exactly.
pub fn write_checkpoint<W: Write>(model: &SpineModel, mut out: W) -> Result<()> {
    writeln!(out, "{CHECKPOINT_MAGIC} {} {}", model.input_dim(), model.hidden_dim())?;
    let mut line = |vals: &[f64]| -> Result<()> {
        let strs: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", strs.join(" "))?;
        Ok(())
    };
    for r in model.enc_weights.row_iter() {
        line(r)?;
    }
    line(&model.enc_bias)?;
    for r in model.dec_weights.row_iter() {
        line(r)?;
    }
    line(&model.dec_bias)?;
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(reader: R) -> Result<SpineModel> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::EmptyInput("empty checkpoint".into()))?;
    let header = header?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dims = match fields.as_slice() {
        [magic, l, k] if *magic == CHECKPOINT_MAGIC => l.parse::<usize>().ok().zip(k.parse::<usize>().ok()),
        _ => None,
    };
    let (l, k) = dims.ok_or_else(|| Error::parse(1, "not a spine checkpoint header"))?;
    let mut read_rows = |rows: usize, width: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(rows * width);
        for _ in 0..rows {
            let (i, line) = lines
                .next()
                .ok_or_else(|| Error::EmptyInput("checkpoint is truncated".into()))?;
            let line = line?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(i + 1, "non-numeric parameter"))?;
            if vals.len() != width {
                return Err(Error::parse(
                    i + 1,
                    format!("expected {width} values, found {}", vals.len()),
                ));
            }
            out.extend(vals);
        }
        Ok(out)
    };
    let enc_weights = Matrix::new(k, l, read_rows(k, l)?)?;
    let enc_bias = read_rows(1, k)?;
    let dec_weights = Matrix::new(l, k, read_rows(l, k)?)?;
    let dec_bias = read_rows(1, l)?;
    let model = SpineModel {
        enc_weights,
        enc_bias,
        dec_weights,
        dec_bias,
    };
    if !model.is_finite() {
        return Err(Error::InvalidValue("checkpoint has non-finite parameters".into()));
    }
    Ok(model)
}
