//! Linear probing: multinomial logistic regression on frozen embeddings,
//! trained by mini-batch gradient descent with decoupled weight decay,
//! warmup + cosine learning-rate decay and best-validation-loss selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Frozen per-epoch feature vectors, row-major `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub features: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub n_classes: usize,
    pub labels: Vec<usize>,
    pub subject_ids: Vec<String>,
    pub epoch_ids: Vec<u64>,
    pub model_tag: String,
}

impl EmbeddingSet {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.d == 0 {
            return Err(ProbeError::DegenerateInput("d must be >= 1".into()));
        }
        if self.features.len() != self.n * self.d
            || self.labels.len() != self.n
            || self.epoch_ids.len() != self.n
            || self.subject_ids.len() != self.n
        {
            return Err(ProbeError::DimensionMismatch(
                "column lengths disagree with n and d".into(),
            ));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(ProbeError::DegenerateInput("non-finite feature".into()));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(ProbeError::DegenerateInput(format!(
                "label {l} >= K = {}",
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Rows at the given positions, in that order.
    pub fn select(&self, rows: &[usize]) -> EmbeddingSet {
        EmbeddingSet {
            features: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            n: rows.len(),
            d: self.d,
            n_classes: self.n_classes,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: rows.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            epoch_ids: rows.iter().map(|&i| self.epoch_ids[i]).collect(),
            model_tag: self.model_tag.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub patience: usize,
    pub warmup_frac: f64,
    pub standardize: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            lr: 1e-2,
            weight_decay: 1e-4,
            max_epochs: 30,
            batch: 32,
            seed: 0,
            patience: 5,
            warmup_frac: 0.1,
            standardize: true,
        }
    }
}

/// Per-dimension affine map fit on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(set: &EmbeddingSet) -> Self {
        let (n, d) = (set.n as f64, set.d);
        let mut mean = vec![0.0; d];
        for i in 0..set.n {
            for (m, v) in mean.iter_mut().zip(set.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..set.n {
            for ((s, v), m) in var.iter_mut().zip(set.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub k: usize,
    pub d: usize,
    /// Row-major `k x d`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub standardizer: Option<Standardizer>,
    /// Mean training loss (with penalty) after each epoch.
    pub train_log: Vec<f64>,
    /// Mean validation cross-entropy after each epoch.
    pub val_log: Vec<f64>,
    /// Epoch (1-based) whose parameters were kept; 0 for the initial zeros.
    pub best_epoch: usize,
    pub lr: f64,
}

impl ProbeModel {
    pub fn zeros(k: usize, d: usize) -> Self {
        ProbeModel {
            k,
            d,
            weights: vec![0.0; k * d],
            bias: vec![0.0; k],
            standardizer: None,
            train_log: Vec::new(),
            val_log: Vec::new(),
            best_epoch: 0,
            lr: 0.0,
        }
    }

    /// Softmax of `W x + b` for an already-standardized `x`.
    fn proba_raw(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.k)
            .map(|c| {
                let w = &self.weights[c * self.d..(c + 1) * self.d];
                self.bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        softmax(&logits)
    }

    fn prepare(&self, x: &[f64]) -> Vec<f64> {
        match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Class probabilities for each row of a row-major `m x d` matrix.
pub fn predict_proba(model: &ProbeModel, features: &[f64], d: usize) -> Result<Vec<Vec<f64>>, ProbeError> {
    if d != model.d || !features.len().is_multiple_of(d.max(1)) {
        return Err(ProbeError::DimensionMismatch(format!(
            "model d = {}, input d = {d}",
            model.d
        )));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(ProbeError::DegenerateInput("non-finite feature".into()));
    }
    Ok(features.chunks(d).map(|x| model.proba_raw(&model.prepare(x))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// A batch of already-standardized rows with labels.
pub struct Batch<'a> {
    pub rows: Vec<&'a [f64]>,
    pub labels: Vec<usize>,
}

/// Mean cross-entropy plus `weight_decay / 2 * ||W||^2`.
pub fn loss(model: &ProbeModel, batch: &Batch, weight_decay: f64) -> f64 {
    let ce: f64 = batch
        .rows
        .iter()
        .zip(&batch.labels)
        .map(|(x, &y)| -model.proba_raw(x)[y].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / batch.rows.len() as f64;
    ce + 0.5 * weight_decay * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`loss`]: `mean((p - onehot(y)) x^T) + weight_decay * W`
/// for the weights and `mean(p - onehot(y))` for the bias.
pub fn gradient(model: &ProbeModel, batch: &Batch, weight_decay: f64) -> Gradient {
    let (k, d) = (model.k, model.d);
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    for (x, &y) in batch.rows.iter().zip(&batch.labels) {
        let mut p = model.proba_raw(x);
        p[y] -= 1.0;
        for c in 0..k {
            gb[c] += p[c];
            let row = &mut gw[c * d..(c + 1) * d];
            for (g, v) in row.iter_mut().zip(x.iter()) {
                *g += p[c] * v;
            }
        }
    }
    let inv = 1.0 / batch.rows.len() as f64;
    gw.iter_mut()
        .zip(&model.weights)
        .for_each(|(g, w)| *g = *g * inv + weight_decay * w);
    gb.iter_mut().for_each(|g| *g *= inv);
    Gradient { weights: gw, bias: gb }
}

/// Linear warmup over the first `warmup` steps, cosine decay to zero after.
pub fn lr_at(step: usize, total: usize, warmup: usize, base: f64) -> f64 {
    if step < warmup {
        base * (step + 1) as f64 / warmup as f64
    } else {
        let span = (total - warmup).max(1) as f64;
        base * 0.5 * (1.0 + (std::f64::consts::PI * (step - warmup) as f64 / span).cos())
    }
}

pub fn train_probe(train: &EmbeddingSet, val: &EmbeddingSet, cfg: &ProbeConfig) -> Result<ProbeModel, ProbeError> {
    train.validate()?;
    val.validate()?;
    if train.d != val.d {
        return Err(ProbeError::DimensionMismatch(format!(
            "train d = {}, val d = {}",
            train.d, val.d
        )));
    }
    if train.n_classes != val.n_classes {
        return Err(ProbeError::DimensionMismatch(format!(
            "train K = {}, val K = {}",
            train.n_classes, val.n_classes
        )));
    }
    let (k, d) = (train.n_classes, train.d);
    if train.n < k {
        return Err(ProbeError::DegenerateInput(format!(
            "{} training samples for {k} classes",
            train.n
        )));
    }
    if !(cfg.lr > 0.0) || cfg.batch == 0 || cfg.max_epochs == 0 || !(0.0..1.0).contains(&cfg.warmup_frac) {
        return Err(ProbeError::InvalidConfig(format!("{cfg:?}")));
    }

    let standardizer = cfg.standardize.then(|| Standardizer::fit(train));
    let prep = |set: &EmbeddingSet| -> Vec<Vec<f64>> {
        (0..set.n)
            .map(|i| match &standardizer {
                Some(s) => s.apply(set.row(i)),
                None => set.row(i).to_vec(),
            })
            .collect()
    };
    let xs = prep(train);
    let xv = prep(val);
    let full_train = Batch {
        rows: xs.iter().map(Vec::as_slice).collect(),
        labels: train.labels.clone(),
    };
    let full_val = Batch {
        rows: xv.iter().map(Vec::as_slice).collect(),
        labels: val.labels.clone(),
    };

    let mut model = ProbeModel::zeros(k, d);
    model.lr = cfg.lr;
    let mut best = model.clone();
    let mut best_val = if val.n > 0 {
        loss(&model, &full_val, 0.0)
    } else {
        f64::INFINITY
    };
    let steps_per_epoch = train.n.div_ceil(cfg.batch);
    let total = steps_per_epoch * cfg.max_epochs;
    let warmup = (cfg.warmup_frac * total as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.n).collect();
    let mut step = 0;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let batch = Batch {
                rows: chunk.iter().map(|&i| xs[i].as_slice()).collect(),
                labels: chunk.iter().map(|&i| train.labels[i]).collect(),
            };
            let g = gradient(&model, &batch, cfg.weight_decay);
            let lr = lr_at(step, total, warmup, cfg.lr);
            model
                .weights
                .iter_mut()
                .zip(&g.weights)
                .for_each(|(w, gw)| *w -= lr * gw);
            model.bias.iter_mut().zip(&g.bias).for_each(|(b, gb)| *b -= lr * gb);
            step += 1;
        }
        model.train_log.push(loss(&model, &full_train, cfg.weight_decay));
        if val.n == 0 {
            best = model.clone();
            best.best_epoch = epoch;
            continue;
        }
        let vl = loss(&model, &full_val, 0.0);
        model.val_log.push(vl);
        if vl < best_val {
            best_val = vl;
            best = model.clone();
            best.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    best.train_log = model.train_log;
    best.val_log = model.val_log;
    best.standardizer = standardizer;
    Ok(best)
}

/// Train once per learning rate and keep the model with the lowest final
/// best validation loss (first rate wins ties).
pub fn train_probe_sweep(
    train: &EmbeddingSet,
    val: &EmbeddingSet,
    cfg: &ProbeConfig,
    lrs: &[f64],
) -> Result<ProbeModel, ProbeError> {
    let mut best: Option<(f64, ProbeModel)> = None;
    for &lr in lrs {
        let m = train_probe(train, val, &ProbeConfig { lr, ..cfg.clone() })?;
        let score = if m.best_epoch == 0 {
            f64::INFINITY
        } else {
            m.val_log.get(m.best_epoch - 1).copied().unwrap_or(f64::INFINITY)
        };
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, m));
        }
    }
    best.map(|(_, m)| m)
        .ok_or_else(|| ProbeError::InvalidConfig("empty learning-rate sweep".into()))
}
