//! Measurement harness: per-phase and per-batch wall-clock timing for
//! the inference pipeline, and a batch-size sweep for training.
//!
//! Durations come from the monotonic clock (`Instant`), reported in
//! seconds as f64. Absolute numbers are hardware-specific and are never
//! asserted anywhere; tests check schema, record counts and that summary
//! stats match an independent recomputation.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::change::{change_map, ChangeMap, LatentGrid, Metric};
use crate::encoder::EncoderBackend;
use crate::error::{Error, Result};
use crate::fewshot::{evaluate, train, Classifier, EvalMetrics, LabeledLatentSet};
use crate::ingest::{load_scene, normalize, tile_scene};
use crate::model_io::BoundModel;

/// Pipeline phase, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Load,
    Tile,
    Encode,
    Compare,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Load => "load",
            Phase::Tile => "tile",
            Phase::Encode => "encode",
            Phase::Compare => "compare",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhaseTiming {
    pub file_id: String,
    pub phase: Phase,
    pub duration_s: f64,
}

/// One encode batch as timed by the harness.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncodeBatchRecord {
    pub file_id: String,
    pub batch_index: usize,
    pub tile_count: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

/// Mean, median, nearest-rank p95 and max of a nonempty sample.
pub fn summarize(raw: &[f64]) -> Result<Stats> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("summarize".into()));
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let rank = ((0.95 * n as f64).ceil() as usize).max(1);
    let p95 = sorted[rank - 1];
    let max = sorted[n - 1];
    Ok(Stats {
        mean,
        median,
        p95,
        max,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimingReport {
    pub backend_name: String,
    pub batch_size: usize,
    pub phases: Vec<PhaseTiming>,
    pub encode_batches: Vec<EncodeBatchRecord>,
    /// Stats over per-batch encode durations.
    pub summary: Stats,
}

/// Benchmark outputs; latents and change maps are returned so callers
/// can verify that instrumentation did not perturb the pipeline.
#[derive(Debug)]
pub struct InferenceBenchResult {
    pub report: TimingReport,
    pub latent_grids: Vec<LatentGrid>,
    pub change_maps: Vec<ChangeMap>,
}

#[derive(Debug, Clone, Default)]
pub struct InferenceBenchOptions {
    /// Sleep inserted into one encode batch (by global batch index) so
    /// tests can simulate a slow batch and check p95/max surface it.
    /// Test support only; does not alter latent outputs.
    #[doc(hidden)]
    pub slow_batch: Option<(usize, Duration)>,
}

/// Runs load -> normalize -> tile -> encode -> compare-vs-previous over
/// the given scene files, timing each phase and each encode batch.
pub fn bench_inference(
    scene_paths: &[PathBuf],
    model: &BoundModel,
    backend: &dyn EncoderBackend,
    batch_size: usize,
    opts: &InferenceBenchOptions,
) -> Result<InferenceBenchResult> {
    if scene_paths.is_empty() {
        return Err(Error::EmptyInput("bench_inference scenes".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }

    let mut phases = Vec::new();
    let mut encode_batches = Vec::new();
    let mut latent_grids: Vec<LatentGrid> = Vec::new();
    let mut change_maps = Vec::new();
    let mut global_batch = 0usize;

    for path in scene_paths {
        let file_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());

        let start = Instant::now();
        let scene = load_scene(path)?;
        phases.push(PhaseTiming {
            file_id: file_id.clone(),
            phase: Phase::Load,
            duration_s: start.elapsed().as_secs_f64(),
        });

        let start = Instant::now();
        let grid = tile_scene(&normalize(&scene))?;
        phases.push(PhaseTiming {
            file_id: file_id.clone(),
            phase: Phase::Tile,
            duration_s: start.elapsed().as_secs_f64(),
        });

        let encode_start = Instant::now();
        let mut latents = Vec::with_capacity(grid.tiles.len());
        for (batch_index, chunk) in grid.tiles.chunks(batch_size).enumerate() {
            let start = Instant::now();
            let (mut ls, _) = backend.encode_batch(chunk, model, batch_size)?;
            if let Some((idx, delay)) = opts.slow_batch {
                if idx == global_batch {
                    std::thread::sleep(delay);
                }
            }
            encode_batches.push(EncodeBatchRecord {
                file_id: file_id.clone(),
                batch_index,
                tile_count: chunk.len(),
                duration_s: start.elapsed().as_secs_f64(),
            });
            latents.append(&mut ls);
            global_batch += 1;
        }
        phases.push(PhaseTiming {
            file_id: file_id.clone(),
            phase: Phase::Encode,
            duration_s: encode_start.elapsed().as_secs_f64(),
        });

        let current = LatentGrid::new(grid.rows, grid.cols, scene.acquisition_index, latents)?;
        let start = Instant::now();
        if let Some(prev) = latent_grids.last() {
            change_maps.push(change_map(
                std::slice::from_ref(prev),
                &current,
                Metric::Cosine,
            )?);
        }
        phases.push(PhaseTiming {
            file_id: file_id.clone(),
            phase: Phase::Compare,
            duration_s: start.elapsed().as_secs_f64(),
        });

        latent_grids.push(current);
    }

    let durations: Vec<f64> = encode_batches.iter().map(|b| b.duration_s).collect();
    let summary = summarize(&durations)?;
    Ok(InferenceBenchResult {
        report: TimingReport {
            backend_name: backend.name().to_string(),
            batch_size,
            phases,
            encode_batches,
            summary,
        },
        latent_grids,
        change_maps,
    })
}

/// One row of the training batch-size sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainSweepRow {
    pub batch_size: usize,
    pub epochs: usize,
    pub mean_epoch_s: f64,
    pub std_epoch_s: f64,
    pub metrics: EvalMetrics,
}

/// Trains from scratch once per batch size with the same seed, timing
/// epochs and evaluating on `eval` at threshold 0.5.
pub fn bench_training(
    data: &LabeledLatentSet,
    eval: &LabeledLatentSet,
    batch_sizes: &[usize],
    epochs: usize,
    lr: f32,
    seed: u64,
) -> Result<Vec<TrainSweepRow>> {
    if batch_sizes.is_empty() {
        return Err(Error::EmptyInput("bench_training batch sizes".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("bench_training dataset".into()));
    }
    let mut rows = Vec::with_capacity(batch_sizes.len());
    for &batch_size in batch_sizes {
        let (clf, timings) = train(&Classifier::zeros(), data, epochs, batch_size, lr, seed)?;
        let durations: Vec<f64> = timings.iter().map(|t| t.duration_s).collect();
        let mean = durations.iter().sum::<f64>() / durations.len().max(1) as f64;
        let std = if durations.len() > 1 {
            (durations.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
                / (durations.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        rows.push(TrainSweepRow {
            batch_size,
            epochs,
            mean_epoch_s: mean,
            std_epoch_s: std,
            metrics: evaluate(&clf, eval, 0.5)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Phase records as CSV, header `file_id,phase,duration_s`.
pub fn export_phases_csv(report: &TimingReport, path: &Path) -> Result<()> {
    let mut out = String::from("file_id,phase,duration_s\n");
    for p in &report.phases {
        out.push_str(&format!("{},{},{}\n", p.file_id, p.phase, p.duration_s));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Per-batch records as CSV, header `file_id,batch_index,tile_count,duration_s`.
pub fn export_batches_csv(report: &TimingReport, path: &Path) -> Result<()> {
    let mut out = String::from("file_id,batch_index,tile_count,duration_s\n");
    for b in &report.encode_batches {
        out.push_str(&format!(
            "{},{},{},{}\n",
            b.file_id, b.batch_index, b.tile_count, b.duration_s
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn export_json(report: &TimingReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidArgument(format!("serialize report: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_json(path: &Path) -> Result<TimingReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("parse report: {e}")))
}

/// CSV writes phase records to `path` and batch records to the sibling
/// `<path>.batches.csv`; JSON writes the whole report to `path`.
pub fn export_report(report: &TimingReport, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Json => export_json(report, path),
        ReportFormat::Csv => {
            export_phases_csv(report, path)?;
            let mut batches = path.as_os_str().to_owned();
            batches.push(".batches.csv");
            export_batches_csv(report, Path::new(&batches))
        }
    }
}
