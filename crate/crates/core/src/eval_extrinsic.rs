//! Sentence classification with averaged word vectors as features: a
//! multinomial logistic model and seeded k-fold cross-validation.

use std::io::Write;

use rayon::prelude::*;

use crate::embed_io::{EmbeddingMatrix, LabeledCorpus};
use crate::error::{Error, Result};
use crate::numcore::{DivergenceMonitor, Matrix, SeededRng};
use crate::spowv::StepSize;

/// Mean of the in-vocabulary token vectors. The flag is `true` when no token
/// was found, in which case the vector is all zeros.
pub fn featurize_sentence(emb: &EmbeddingMatrix, tokens: &[String]) -> (Vec<f64>, bool) {
    let mut sum = vec![0.0; emb.dim()];
    let mut found = 0usize;
    for t in tokens {
        if let Some(i) = emb.lookup(t) {
            for (s, v) in sum.iter_mut().zip(emb.row(i)) {
                *s += v;
            }
            found += 1;
        }
    }
    if found == 0 {
        return (sum, true);
    }
    for s in &mut sum {
        *s /= found as f64;
    }
    (sum, false)
}

/// Features for every sample, plus the number of all-OOV sentences.
pub fn featurize_corpus(emb: &EmbeddingMatrix, corpus: &LabeledCorpus) -> Result<(Matrix, usize)> {
    let mut data = Vec::with_capacity(corpus.len() * emb.dim());
    let mut oov = 0;
    for s in &corpus.samples {
        let (v, missing) = featurize_sentence(emb, &s.tokens);
        oov += missing as usize;
        data.extend(v);
    }
    Ok((Matrix::new(corpus.len(), emb.dim(), data)?, oov))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    /// Weight of `½‖W‖²`; the bias is not penalized.
    pub l2: f64,
    pub learning_rate: StepSize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            l2: 1e-4,
            learning_rate: StepSize::Auto,
            epochs: 300,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    /// classes × features.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub labels: Vec<String>,
}

impl ClassifierModel {
    pub fn zeros(labels: Vec<String>, features: usize) -> Self {
        ClassifierModel {
            weights: Matrix::zeros(labels.len(), features),
            bias: vec![0.0; labels.len()],
            labels,
        }
    }

    fn scores(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.bias[c] + self.weights.row(c).iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn check_width(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.weights.cols() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.weights.cols(),
                features.cols()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ClassifierFit {
    pub model: ClassifierModel,
    /// Objective before training and after every epoch.
    pub trace: Vec<f64>,
}

fn softmax_in_place(s: &mut [f64]) {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in s.iter_mut() {
        *v = (*v - m).exp();
        z += *v;
    }
    for v in s.iter_mut() {
        *v /= z;
    }
}

fn check_labels(features: &Matrix, labels: &[usize], classes: usize) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidValue(format!("label index {bad} out of range for {classes} classes")));
    }
    Ok(())
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²`.
pub fn classifier_loss(model: &ClassifierModel, features: &Matrix, labels: &[usize], l2: f64) -> Result<f64> {
    model.check_width(features)?;
    check_labels(features, labels, model.labels.len())?;
    Ok(loss_and_gradients(model, features, labels, l2, false).0)
}

/// Gradient of [`classifier_loss`], shaped as a model.
pub fn classifier_gradients(model: &ClassifierModel, features: &Matrix, labels: &[usize], l2: f64) -> Result<ClassifierModel> {
    model.check_width(features)?;
    check_labels(features, labels, model.labels.len())?;
    Ok(loss_and_gradients(model, features, labels, l2, true).1)
}

fn loss_and_gradients(
    model: &ClassifierModel,
    x: &Matrix,
    labels: &[usize],
    l2: f64,
    want_grad: bool,
) -> (f64, ClassifierModel) {
    let (n, f) = x.shape();
    let c = model.labels.len();
    let mut grad = ClassifierModel::zeros(model.labels.clone(), if want_grad { f } else { 0 });
    let mut p = vec![0.0; c];
    let mut ce = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = x.row(i);
        model.scores(row, &mut p);
        softmax_in_place(&mut p);
        ce -= p[y].max(f64::MIN_POSITIVE).ln();
        if want_grad {
            p[y] -= 1.0;
            for (k, &pk) in p.iter().enumerate() {
                grad.bias[k] += pk;
                for (g, v) in grad.weights.row_mut(k).iter_mut().zip(row) {
                    *g += pk * v;
                }
            }
        }
    }
    let inv = 1.0 / n as f64;
    let loss = ce * inv + 0.5 * l2 * model.weights.frobenius_sq();
    if want_grad {
        for b in &mut grad.bias {
            *b *= inv;
        }
        for (g, w) in grad.weights.as_mut_slice().iter_mut().zip(model.weights.as_slice()) {
            *g = *g * inv + l2 * w;
        }
    }
    (loss, grad)
}

/// `1 / (½·mean(‖x‖² + 1) + l2)`, the inverse of a Lipschitz bound on the
/// objective's gradient.
pub fn auto_learning_rate(features: &Matrix, l2: f64) -> f64 {
    let mean_sq = features.row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).sum::<f64>()
        / features.rows().max(1) as f64;
    1.0 / (0.5 * mean_sq + l2)
}

/// Full-batch gradient descent from a small seeded random start.
pub fn train_classifier(
    features: &Matrix,
    labels: &[usize],
    label_names: &[String],
    cfg: &ClassifierConfig,
) -> Result<ClassifierFit> {
    check_labels(features, labels, label_names.len())?;
    let mut present = vec![false; label_names.len()];
    for &l in labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::InvalidValue("fewer than 2 classes in the training labels".into()));
    }
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) {
        return Err(Error::Config(format!("l2 must be finite and non-negative, got {}", cfg.l2)));
    }
    let rate = match cfg.learning_rate {
        StepSize::Auto => auto_learning_rate(features, cfg.l2),
        StepSize::Fixed(r) if r > 0.0 && r.is_finite() => r,
        StepSize::Fixed(r) => return Err(Error::Config(format!("learning rate must be positive, got {r}"))),
    };
    let mut rng = SeededRng::new(cfg.seed);
    let mut model = ClassifierModel {
        weights: Matrix::random_uniform(label_names.len(), features.cols(), 1e-3, &mut rng),
        bias: vec![0.0; label_names.len()],
        labels: label_names.to_vec(),
    };
    let mut loss = loss_and_gradients(&model, features, labels, cfg.l2, false).0;
    let mut trace = vec![loss];
    let mut monitor = DivergenceMonitor::new(loss);
    for epoch in 1..=cfg.epochs {
        let grad = loss_and_gradients(&model, features, labels, cfg.l2, true).1;
        for (w, g) in model.weights.as_mut_slice().iter_mut().zip(grad.weights.as_slice()) {
            *w -= rate * g;
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= rate * g;
        }
        loss = loss_and_gradients(&model, features, labels, cfg.l2, false).0;
        trace.push(loss);
        monitor.observe(loss, epoch)?;
    }
    Ok(ClassifierFit { model, trace })
}

/// Argmax class index per row; ties go to the earlier label.
pub fn predict(model: &ClassifierModel, features: &Matrix) -> Result<Vec<usize>> {
    model.check_width(features)?;
    let mut s = vec![0.0; model.labels.len()];
    Ok(features
        .row_iter()
        .map(|row| {
            model.scores(row, &mut s);
            let mut best = 0;
            for (k, &v) in s.iter().enumerate() {
                if v > s[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Sizes of `k` folds over `n` samples: the first `n % k` folds get one
/// extra sample.
pub fn fold_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|f| n / k + usize::from(f < n % k)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub fold_sizes: Vec<usize>,
    pub mean_accuracy: f64,
    pub seed: u64,
    /// Sentences with no in-vocabulary token (featurized as zeros).
    pub oov_sentences: usize,
}

/// k-fold cross-validation on precomputed features. The sample order is
/// shuffled with `cfg.seed`; folds are contiguous slices of that order.
pub fn cross_validate_features(
    features: &Matrix,
    labels: &[usize],
    label_names: &[String],
    k: usize,
    cfg: &ClassifierConfig,
) -> Result<CvReport> {
    check_labels(features, labels, label_names.len())?;
    let n = features.rows();
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidValue(format!("{n} samples cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(cfg.seed).shuffle(&mut order);
    let sizes = fold_sizes(n, k);
    let mut bounds = Vec::with_capacity(k);
    let mut start = 0;
    for &s in &sizes {
        bounds.push((start, start + s));
        start += s;
    }
    let fold_accuracies: Vec<f64> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            let test = &order[lo..hi];
            let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let test_y: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            let fit = train_classifier(&features.select_rows(&train), &train_y, label_names, cfg)?;
            let pred = predict(&fit.model, &features.select_rows(test))?;
            Ok(accuracy(&pred, &test_y))
        })
        .collect::<Result<_>>()?;
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        fold_accuracies,
        fold_sizes: sizes,
        mean_accuracy,
        seed: cfg.seed,
        oov_sentences: 0,
    })
}

/// Featurizes `corpus` with `emb` and cross-validates.
pub fn cross_validate(emb: &EmbeddingMatrix, corpus: &LabeledCorpus, k: usize, cfg: &ClassifierConfig) -> Result<CvReport> {
    if corpus.len() < k {
        return Err(Error::InvalidValue(format!(
            "corpus of {} sentences cannot fill {k} folds",
            corpus.len()
        )));
    }
    let (features, oov) = featurize_corpus(emb, corpus)?;
    let mut report = cross_validate_features(&features, &corpus.label_indices(), &corpus.labels, k, cfg)?;
    report.oov_sentences = oov;
    Ok(report)
}

/// `fold,size,accuracy` rows followed by a `mean` row.
pub fn write_cv_report_csv<W: Write>(report: &CvReport, mut out: W) -> Result<()> {
    writeln!(out, "fold,size,accuracy")?;
    for (i, (a, s)) in report.fold_accuracies.iter().zip(&report.fold_sizes).enumerate() {
        writeln!(out, "{i},{s},{a:.6}")?;
    }
    writeln!(out, "mean,{},{:.6}", report.fold_sizes.iter().sum::<usize>(), report.mean_accuracy)?;
    out.flush()?;
    Ok(())
}

/// Accuracy table in percent: one row per embedding, one column per task,
/// then the row average.
pub fn write_cv_table_csv<W: Write>(tasks: &[String], rows: &[(String, Vec<f64>)], mut out: W) -> Result<()> {
    writeln!(out, "embedding,{},Average", tasks.join(","))?;
    for (name, accs) in rows {
        if accs.len() != tasks.len() {
            return Err(Error::Shape(format!(
                "row {name:?} has {} accuracies for {} tasks",
                accs.len(),
                tasks.len()
            )));
        }
        let cells: Vec<String> = accs.iter().map(|a| format!("{:.2}", 100.0 * a)).collect();
        let avg = 100.0 * accs.iter().sum::<f64>() / accs.len().max(1) as f64;
        writeln!(out, "{name},{},{avg:.2}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}
