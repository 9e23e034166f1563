//! Few-shot onboard training: a one-layer binary classifier (128 weights
//! plus 1 bias = 129 trainable parameters) over latent mu vectors,
//! trained with plain mini-batch SGD on binary cross-entropy. Gradients
//! are hand-derived; the loss is computed in logit space for stability.
//!
//! Labeled data round-trips through a CSV with 128 feature columns and a
//! final `label` column; trained classifiers export to `.rvwt` as
//! entries `clf.w` [128] and `clf.b` [1].

use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::encoder::LATENT_DIM;
use crate::error::{Error, Result};
use crate::model_io::{save_weights, WeightEntry, WeightSet};
use crate::rng::SeededRng;
use crate::tensor::sigmoid;

/// 129 trainable scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub w: Vec<f32>,
    pub b: f32,
}

impl Classifier {
    pub fn zeros() -> Self {
        Self {
            w: vec![0.0; LATENT_DIM],
            b: 0.0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + 1
    }

    pub fn logit(&self, mu: &[f32]) -> f32 {
        let mut z = self.b as f64;
        for (wi, xi) in self.w.iter().zip(mu) {
            z += *wi as f64 * *xi as f64;
        }
        z as f32
    }

    pub fn to_weight_set(&self) -> WeightSet {
        WeightSet::new(vec![
            WeightEntry {
                name: "clf.w".into(),
                shape: vec![self.w.len()],
                data: self.w.clone(),
            },
            WeightEntry {
                name: "clf.b".into(),
                shape: vec![1],
                data: vec![self.b],
            },
        ])
        .expect("classifier entries are well-formed")
    }

    pub fn from_weight_set(ws: &WeightSet) -> Result<Self> {
        let w = ws.get("clf.w").ok_or_else(|| Error::MissingEntry {
            name: "clf.w".into(),
            layer: "classifier".into(),
        })?;
        let b = ws.get("clf.b").ok_or_else(|| Error::MissingEntry {
            name: "clf.b".into(),
            layer: "classifier".into(),
        })?;
        if b.data.len() != 1 {
            return Err(Error::EntryLengthMismatch {
                name: "clf.b".into(),
                shape: b.shape.clone(),
                len: b.data.len(),
            });
        }
        Ok(Self {
            w: w.data.clone(),
            b: b.data[0],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_weights(&self.to_weight_set(), path)
    }
}

/// Latents with binary labels; train and eval splits are kept disjoint
/// by construction in the fixture generator.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLatentSet {
    pub latents: Vec<Vec<f32>>,
    pub labels: Vec<u8>,
}

impl LabeledLatentSet {
    pub fn new(latents: Vec<Vec<f32>>, labels: Vec<u8>) -> Result<Self> {
        if latents.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                context: "LabeledLatentSet".into(),
                expected: format!("{} labels", latents.len()),
                actual: format!("{}", labels.len()),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        Ok(Self { latents, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for i in 0..LATENT_DIM {
            out.push_str(&format!("f{i},"));
        }
        out.push_str("label\n");
        for (mu, label) in self.latents.iter().zip(&self.labels) {
            for v in mu {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{label}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut latents = Vec::new();
        let mut labels = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if idx == 0 {
                // header
                if !line.ends_with("label") {
                    return Err(Error::CsvParse {
                        line: line_no,
                        message: "header must end with `label`".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != LATENT_DIM + 1 {
                return Err(Error::CsvParse {
                    line: line_no,
                    message: format!("expected {} columns, got {}", LATENT_DIM + 1, fields.len()),
                });
            }
            let mut mu = Vec::with_capacity(LATENT_DIM);
            for f in &fields[..LATENT_DIM] {
                let v: f32 = f.parse().map_err(|_| Error::CsvParse {
                    line: line_no,
                    message: format!("bad float {f:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::CsvParse {
                        line: line_no,
                        message: "non-finite feature".into(),
                    });
                }
                mu.push(v);
            }
            let label: u8 = fields[LATENT_DIM].trim().parse().map_err(|_| Error::CsvParse {
                line: line_no,
                message: format!("bad label {:?}", fields[LATENT_DIM]),
            })?;
            if label > 1 {
                return Err(Error::CsvParse {
                    line: line_no,
                    message: format!("label must be 0 or 1, got {label}"),
                });
            }
            latents.push(mu);
            labels.push(label);
        }
        Self::new(latents, labels)
    }
}

/// Wall-clock record for one training epoch.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct EpochTiming {
    pub epoch_index: usize,
    pub duration_s: f64,
    pub batch_size: usize,
    pub batches: usize,
}

/// Confusion counts and derived scores at a fixed threshold.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct EvalMetrics {
    pub threshold: f32,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub precision: f32,
    pub recall: f32,
    pub f1: f32,
    pub auprc: f32,
}

pub fn predict(c: &Classifier, mu: &[f32]) -> f32 {
    sigmoid(c.logit(mu))
}

/// Binary cross-entropy from the logit:
/// loss(z, y) = max(z, 0) − z·y + ln(1 + e^(−|z|)).
pub fn bce_loss_logit(z: f32, y: u8) -> f32 {
    let z = z as f64;
    (z.max(0.0) - z * y as f64 + (-z.abs()).exp().ln_1p()) as f32
}

/// One SGD step over a batch (by index into `data`). Returns the
/// updated classifier and the mean loss before the update.
pub fn grad_step(
    c: &Classifier,
    data: &LabeledLatentSet,
    batch: &[usize],
    lr: f32,
) -> Result<(Classifier, f32)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("grad_step batch".into()));
    }
    if lr <= 0.0 {
        return Err(Error::InvalidArgument(format!("lr must be > 0, got {lr}")));
    }
    let n = batch.len() as f64;
    let mut dw = vec![0.0f64; c.w.len()];
    let mut db = 0.0f64;
    let mut loss = 0.0f64;
    for &i in batch {
        let mu = &data.latents[i];
        let y = data.labels[i];
        let z = c.logit(mu);
        loss += bce_loss_logit(z, y) as f64;
        let g = sigmoid(z) as f64 - y as f64; // dL/dz
        for (d, &x) in dw.iter_mut().zip(mu) {
            *d += g * x as f64;
        }
        db += g;
    }
    let w = c
        .w
        .iter()
        .zip(&dw)
        .map(|(&wi, &d)| (wi as f64 - lr as f64 * d / n) as f32)
        .collect();
    let b = (c.b as f64 - lr as f64 * db / n) as f32;
    Ok((Classifier { w, b }, (loss / n) as f32))
}

/// Mini-batch SGD with a per-epoch seeded shuffle. Deterministic given
/// the seed; epochs = 0 returns `init` unchanged.
pub fn train(
    init: &Classifier,
    data: &LabeledLatentSet,
    epochs: usize,
    batch_size: usize,
    lr: f32,
    seed: u64,
) -> Result<(Classifier, Vec<EpochTiming>)> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let mut c = init.clone();
    let mut rng = SeededRng::new(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut timings = Vec::with_capacity(epochs);
    for epoch_index in 0..epochs {
        let start = Instant::now();
        rng.shuffle(&mut order);
        let mut batches = 0;
        for batch in order.chunks(batch_size) {
            let (next, _) = grad_step(&c, data, batch, lr)?;
            c = next;
            batches += 1;
        }
        timings.push(EpochTiming {
            epoch_index,
            duration_s: start.elapsed().as_secs_f64(),
            batch_size,
            batches,
        });
    }
    for v in c.w.iter().chain(std::iter::once(&c.b)) {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "trained classifier".into(),
                offset: 0,
            });
        }
    }
    Ok((c, timings))
}

/// Average precision by step summation over descending unique score
/// thresholds, ties grouped: AP = Σ_k (R_k − R_{k−1})·P_k.
pub fn auprc(scores: &[f32], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "auprc".into(),
            expected: format!("{} labels", scores.len()),
            actual: format!("{}", labels.len()),
        });
    }
    let total_pos = labels.iter().filter(|&&l| l == 1).count();
    if total_pos == 0 {
        return Err(Error::EmptyInput("auprc: no positive labels".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut ap = 0.0f64;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0f64;
    let mut i = 0;
    while i < idx.len() {
        // group ties: everything at this score enters together
        let s = scores[idx[i]];
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == s {
            if labels[idx[j]] == 1 {
                tp += 1;
            }
            seen += 1;
            j += 1;
        }
        let precision = tp as f64 / seen as f64;
        let recall = tp as f64 / total_pos as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

/// Confusion counts at `threshold` plus precision/recall/F1/AUPRC.
/// Precision is defined as 1.0 when nothing is predicted positive.
pub fn evaluate(c: &Classifier, data: &LabeledLatentSet, threshold: f32) -> Result<EvalMetrics> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation dataset".into()));
    }
    let scores: Vec<f32> = data.latents.iter().map(|mu| predict(c, mu)).collect();
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(&data.labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f32 / (tp + fp) as f32
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f32 / (tp + fn_) as f32
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalMetrics {
        threshold,
        tp,
        fp,
        tn,
        fn_,
        precision,
        recall,
        f1,
        auprc: auprc(&scores, &data.labels)? as f32,
    })
}
