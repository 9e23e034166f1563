//! Latent-space change detection between sequential acquisitions.
//!
//! Scores compare mu vectors only. The default metric is cosine
//! distance; a change map against a history window takes the minimum
//! score over the window, which suppresses spurious change from a
//! single anomalous prior pass.

use std::fs;
use std::path::Path;

use crate::encoder::Latent;
use crate::error::{Error, Result};

/// Distance metric over mu vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// 1 − cos(a, b), in [0, 2].
    #[default]
    Cosine,
    Euclidean,
}

/// Per-tile latents of one acquisition, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    pub rows: usize,
    pub cols: usize,
    pub acquisition_index: u32,
    pub latents: Vec<Latent>,
}

impl LatentGrid {
    pub fn new(rows: usize, cols: usize, acquisition_index: u32, latents: Vec<Latent>) -> Result<Self> {
        if latents.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "LatentGrid".into(),
                expected: format!("{} latents", rows * cols),
                actual: format!("{}", latents.len()),
            });
        }
        Ok(Self {
            rows,
            cols,
            acquisition_index,
            latents,
        })
    }
}

/// Grid of per-tile change scores for one (history, current) pairing.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChangeMap {
    pub rows: usize,
    pub cols: usize,
    pub prev_acquisitions: Vec<u32>,
    pub curr_acquisition: u32,
    pub scores: Vec<f32>,
}

/// Distance between two latents' mu vectors.
///
/// Cosine convention for degenerate inputs: both mu zero -> 0,
/// exactly one zero -> 1.
pub fn change_score(a: &Latent, b: &Latent, metric: Metric) -> f32 {
    match metric {
        Metric::Cosine => {
            let mut dot = 0.0f64;
            let mut na = 0.0f64;
            let mut nb = 0.0f64;
            for (&x, &y) in a.mu.iter().zip(&b.mu) {
                dot += x as f64 * y as f64;
                na += x as f64 * x as f64;
                nb += y as f64 * y as f64;
            }
            if na == 0.0 && nb == 0.0 {
                return 0.0;
            }
            if na == 0.0 || nb == 0.0 {
                return 1.0;
            }
            ((1.0 - dot / (na.sqrt() * nb.sqrt())) as f32).clamp(0.0, 2.0)
        }
        Metric::Euclidean => {
            let mut s = 0.0f64;
            for (&x, &y) in a.mu.iter().zip(&b.mu) {
                let d = x as f64 - y as f64;
                s += d * d;
            }
            s.sqrt() as f32
        }
    }
}

/// score[i] = min over the history window of the per-tile distance to
/// `current`. All grids must share dimensions.
pub fn change_map(history: &[LatentGrid], current: &LatentGrid, metric: Metric) -> Result<ChangeMap> {
    if history.is_empty() {
        return Err(Error::EmptyInput("change_map history".into()));
    }
    for g in history {
        if (g.rows, g.cols) != (current.rows, current.cols) {
            return Err(Error::ShapeMismatch {
                context: "change_map grids".into(),
                expected: format!("{}x{}", current.rows, current.cols),
                actual: format!("{}x{}", g.rows, g.cols),
            });
        }
    }
    let n = current.rows * current.cols;
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let s = history
            .iter()
            .map(|g| change_score(&g.latents[i], &current.latents[i], metric))
            .fold(f32::INFINITY, f32::min);
        scores.push(s);
    }
    Ok(ChangeMap {
        rows: current.rows,
        cols: current.cols,
        prev_acquisitions: history.iter().map(|g| g.acquisition_index).collect(),
        curr_acquisition: current.acquisition_index,
        scores,
    })
}

/// Top-k cells by score, descending; ties broken by row-major index.
pub fn rank_tiles(cm: &ChangeMap, k: usize) -> Result<Vec<(usize, usize, f32)>> {
    let n = cm.rows * cm.cols;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={n}, got {k}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        cm.scores[b]
            .partial_cmp(&cm.scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(idx[..k]
        .iter()
        .map(|&i| (i / cm.cols, i % cm.cols, cm.scores[i]))
        .collect())
}

pub fn export_csv(cm: &ChangeMap, path: &Path) -> Result<()> {
    let mut out = String::from("row,col,score\n");
    for r in 0..cm.rows {
        for c in 0..cm.cols {
            out.push_str(&format!("{r},{c},{}\n", cm.scores[r * cm.cols + c]));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn export_json(cm: &ChangeMap, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(cm)
        .map_err(|e| Error::InvalidArgument(format!("serialize change map: {e}")))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}
