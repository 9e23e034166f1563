//! Operator CLI for the onboard processing pipeline.
//!
//! Exit codes: 0 ok, 2 usage, 3 I/O, 4 validation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use latentsat::bench::{
    bench_inference, bench_training, export_batches_csv, export_json, export_phases_csv,
    InferenceBenchOptions,
};
use latentsat::change::{change_map, export_csv, export_json as export_change_json, rank_tiles, Metric};
use latentsat::encoder::{encode_batch, reference_arch, ReferenceBackend, LATENT_DIM};
use latentsat::error::Error;
use latentsat::fewshot::{evaluate, train, Classifier, LabeledLatentSet};
use latentsat::fixtures::{gen_latent_dataset, gen_scene, gen_scene_pair, gen_weights};
use latentsat::ingest::{load_scene, normalize, save_scene, tile_scene};
use latentsat::model_io::{bind, load_weights, save_weights, ArchSpec, BoundModel};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "latentsat", version, about = "Onboard tile encoding, change detection, few-shot training and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Encoder weights (.rvwt)
    #[arg(long)]
    model: PathBuf,
    /// Architecture manifest (.arch); defaults to the built-in reference architecture
    #[arg(long)]
    arch: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> Result<BoundModel, Error> {
        let arch = match &self.arch {
            Some(path) => ArchSpec::load_manifest(path)?,
            None => reference_arch(),
        };
        bind(&load_weights(&self.model)?, &arch)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode scenes into per-tile latent CSV files
    Encode {
        /// Scene files (.rvsc)
        scenes: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        /// Output latent CSV; with multiple scenes a _<index> suffix is added
        #[arg(long, default_value = "latents.csv")]
        out: PathBuf,
        /// Tiles per encode batch [default: 64]
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
    },
    /// Change detection across scenes given in temporal order
    Change {
        /// Scene files (.rvsc), oldest first; at least 2
        scenes: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of top-ranked tiles to print [default: 5]
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        /// History window length [default: 3]
        #[arg(long, default_value_t = 3)]
        window: usize,
        /// Output change-map CSV (a .json sibling is written too)
        #[arg(long, default_value = "changemap.csv")]
        out: PathBuf,
        /// Tiles per encode batch [default: 64]
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
    },
    /// Train the 129-parameter classifier on a labeled latent CSV
    Train {
        /// Labeled latent CSV (f0..f127,label)
        #[arg(long)]
        data: PathBuf,
        /// Optional held-out CSV; defaults to evaluating on the training data
        #[arg(long)]
        eval: Option<PathBuf>,
        /// Training epochs [default: 50]
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        /// Mini-batch size [default: 64]
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        /// SGD learning rate [default: 0.1]
        #[arg(long, default_value_t = 0.1)]
        lr: f32,
        /// PRNG seed [default: 42]
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Decision threshold for metrics [default: 0.5]
        #[arg(long, default_value_t = 0.5)]
        threshold: f32,
        /// Output classifier weights (.rvwt)
        #[arg(long, default_value = "classifier.rvwt")]
        out: PathBuf,
    },
    /// Benchmark inference or training
    Bench {
        /// What to benchmark
        #[arg(long, value_enum)]
        mode: BenchMode,
        /// Scene files (inference mode)
        scenes: Vec<PathBuf>,
        #[command(flatten)]
        model: BenchModelArgs,
        /// Labeled latent CSV (training mode)
        #[arg(long)]
        data: Option<PathBuf>,
        /// Held-out CSV (training mode); defaults to --data
        #[arg(long)]
        eval: Option<PathBuf>,
        /// Encode batch size (inference mode) [default: 64]
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        /// Batch sizes to sweep (training mode) [default: 32,64,128,256]
        #[arg(long, value_delimiter = ',', default_values_t = vec![32, 64, 128, 256])]
        batch_sizes: Vec<usize>,
        /// Training epochs per sweep point [default: 10]
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        /// SGD learning rate [default: 0.1]
        #[arg(long, default_value_t = 0.1)]
        lr: f32,
        /// PRNG seed [default: 42]
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output stem; writes <out>.json plus CSV files
        #[arg(long, default_value = "bench_report")]
        out: PathBuf,
    },
    /// Generate deterministic fixtures (weights, scenes, latent datasets)
    Fixtures {
        #[command(subcommand)]
        kind: FixtureKind,
    },
}

#[derive(Args)]
struct BenchModelArgs {
    /// Encoder weights (.rvwt), inference mode
    #[arg(long)]
    model: Option<PathBuf>,
    /// Architecture manifest (.arch)
    #[arg(long)]
    arch: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchMode {
    Inference,
    Training,
}

#[derive(Subcommand)]
enum FixtureKind {
    /// Reference encoder weights plus architecture manifest
    Weights {
        /// PRNG seed [default: 42]
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output weights path (.rvwt)
        #[arg(long, default_value = "reference.rvwt")]
        out: PathBuf,
        /// Output manifest path (.arch)
        #[arg(long, default_value = "reference.arch")]
        arch_out: PathBuf,
    },
    /// One synthetic raw scene
    Scene {
        /// PRNG seed [default: 42]
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Scene height in pixels [default: 480]
        #[arg(long, default_value_t = 480)]
        height: usize,
        /// Scene width in pixels [default: 480]
        #[arg(long, default_value_t = 480)]
        width: usize,
        /// Acquisition index [default: 0]
        #[arg(long, default_value_t = 0)]
        acquisition: u32,
        /// Output scene path (.rvsc)
        #[arg(long, default_value = "scene.rvsc")]
        out: PathBuf,
    },
    /// A scene pair with known changed tiles
    ScenePair {
        /// PRNG seed [default: 42]
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Number of perturbed tiles [default: 5]
        #[arg(long, default_value_t = 5)]
        changed: usize,
        /// First scene output path
        #[arg(long, default_value = "scene_a.rvsc")]
        out_a: PathBuf,
        /// Second scene output path
        #[arg(long, default_value = "scene_b.rvsc")]
        out_b: PathBuf,
    },
    /// Two-cluster labeled latent dataset (train + disjoint eval CSV)
    LatentDataset {
        /// PRNG seed [default: 42]
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Samples per split [default: 1305]
        #[arg(long, default_value_t = 1305)]
        n: usize,
        /// Cluster separation in latent units [default: 8]
        #[arg(long, default_value_t = 8.0)]
        margin: f32,
        /// Training split CSV path
        #[arg(long, default_value = "latents_train.csv")]
        out_train: PathBuf,
        /// Evaluation split CSV path
        #[arg(long, default_value = "latents_eval.csv")]
        out_eval: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Pipeline(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Pipeline(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Pipeline(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(EXIT_IO),
                _ => ExitCode::from(EXIT_VALIDATION),
            }
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Encode {
            scenes,
            model,
            out,
            batch_size,
        } => cmd_encode(&scenes, &model, &out, batch_size),
        Command::Change {
            scenes,
            model,
            k,
            window,
            out,
            batch_size,
        } => cmd_change(&scenes, &model, k, window, &out, batch_size),
        Command::Train {
            data,
            eval,
            epochs,
            batch_size,
            lr,
            seed,
            threshold,
            out,
        } => cmd_train(&data, eval.as_deref(), epochs, batch_size, lr, seed, threshold, &out),
        Command::Bench {
            mode,
            scenes,
            model,
            data,
            eval,
            batch_size,
            batch_sizes,
            epochs,
            lr,
            seed,
            out,
        } => match mode {
            BenchMode::Inference => {
                let model_path = model
                    .model
                    .ok_or_else(|| CliError::Usage("--model is required in inference mode".into()))?;
                cmd_bench_inference(&scenes, &model_path, model.arch.as_deref(), batch_size, &out)
            }
            BenchMode::Training => {
                let data = data
                    .ok_or_else(|| CliError::Usage("--data is required in training mode".into()))?;
                cmd_bench_training(&data, eval.as_deref(), &batch_sizes, epochs, lr, seed, &out)
            }
        },
        Command::Fixtures { kind } => cmd_fixtures(kind),
    }
}

fn load_model(args: &ModelArgs) -> Result<BoundModel, CliError> {
    Ok(args.load()?)
}

fn encode_grid(
    path: &Path,
    model: &BoundModel,
    batch_size: usize,
) -> Result<(latentsat::change::LatentGrid, Vec<latentsat::encoder::BatchTiming>), CliError> {
    let scene = load_scene(path)?;
    let grid = tile_scene(&normalize(&scene))?;
    let (latents, timings) = encode_batch(&grid.tiles, model, batch_size)?;
    let lg = latentsat::change::LatentGrid::new(grid.rows, grid.cols, scene.acquisition_index, latents)?;
    Ok((lg, timings))
}

fn write_latent_csv(grid: &latentsat::change::LatentGrid, path: &Path) -> Result<(), Error> {
    let mut out = String::from("row,col");
    for i in 0..LATENT_DIM {
        out.push_str(&format!(",mu_{i}"));
    }
    out.push('\n');
    for l in &grid.latents {
        out.push_str(&format!("{},{}", l.tile_index.0, l.tile_index.1));
        for v in &l.mu {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn with_index(path: &Path, index: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|s| s.to_string_lossy().into_owned());
    let name = match ext {
        Some(ext) => format!("{stem}_{index}.{ext}"),
        None => format!("{stem}_{index}"),
    };
    path.with_file_name(name)
}

fn cmd_encode(
    scenes: &[PathBuf],
    model_args: &ModelArgs,
    out: &Path,
    batch_size: usize,
) -> Result<(), CliError> {
    if scenes.is_empty() {
        return Err(CliError::Usage("at least one scene is required".into()));
    }
    let model = load_model(model_args)?;
    for (i, scene_path) in scenes.iter().enumerate() {
        let (grid, timings) = encode_grid(scene_path, &model, batch_size)?;
        let target = if scenes.len() == 1 {
            out.to_path_buf()
        } else {
            with_index(out, i)
        };
        write_latent_csv(&grid, &target)?;
        let total: f64 = timings.iter().map(|t| t.duration_s).sum();
        println!(
            "{}: {} tiles, {} batches, encode {:.4}s -> {}",
            scene_path.display(),
            grid.latents.len(),
            timings.len(),
            total,
            target.display()
        );
    }
    Ok(())
}

fn cmd_change(
    scenes: &[PathBuf],
    model_args: &ModelArgs,
    k: usize,
    window: usize,
    out: &Path,
    batch_size: usize,
) -> Result<(), CliError> {
    if scenes.len() < 2 {
        return Err(CliError::Usage("change detection needs at least 2 scenes".into()));
    }
    if window == 0 {
        return Err(CliError::Usage("window must be >= 1".into()));
    }
    let model = load_model(model_args)?;
    let mut grids = Vec::with_capacity(scenes.len());
    for path in scenes {
        grids.push(encode_grid(path, &model, batch_size)?.0);
    }
    let (current, history) = grids.split_last().expect("len >= 2");
    let start = history.len().saturating_sub(window);
    let cm = change_map(&history[start..], current, Metric::Cosine)?;
    if k > cm.rows * cm.cols {
        return Err(CliError::Usage(format!(
            "k = {k} exceeds tile count {}",
            cm.rows * cm.cols
        )));
    }
    export_csv(&cm, out)?;
    export_change_json(&cm, &out.with_extension("json"))?;
    println!("change map {}x{} -> {}", cm.rows, cm.cols, out.display());
    for (row, col, score) in rank_tiles(&cm, k)? {
        println!("tile ({row},{col}) score {score:.6}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data_path: &Path,
    eval_path: Option<&Path>,
    epochs: usize,
    batch_size: usize,
    lr: f32,
    seed: u64,
    threshold: f32,
    out: &Path,
) -> Result<(), CliError> {
    let data = LabeledLatentSet::load_csv(data_path)?;
    let eval_set = match eval_path {
        Some(p) => LabeledLatentSet::load_csv(p)?,
        None => data.clone(),
    };
    let (clf, timings) = train(&Classifier::zeros(), &data, epochs, batch_size, lr, seed)?;
    clf.save(out)?;
    let metrics = evaluate(&clf, &eval_set, threshold)?;
    let mean_epoch = if timings.is_empty() {
        0.0
    } else {
        timings.iter().map(|t| t.duration_s).sum::<f64>() / timings.len() as f64
    };
    println!("classifier ({} parameters) -> {}", clf.param_count(), out.display());
    println!(
        "epochs {epochs}, batch {batch_size}, lr {lr}, seed {seed}, mean epoch {mean_epoch:.4}s"
    );
    println!(
        "auprc {:.4} precision {:.4} recall {:.4} f1 {:.4} (threshold {:.2}; tp {} fp {} tn {} fn {})",
        metrics.auprc,
        metrics.precision,
        metrics.recall,
        metrics.f1,
        metrics.threshold,
        metrics.tp,
        metrics.fp,
        metrics.tn,
        metrics.fn_
    );
    Ok(())
}

fn cmd_bench_inference(
    scenes: &[PathBuf],
    model_path: &Path,
    arch: Option<&Path>,
    batch_size: usize,
    out: &Path,
) -> Result<(), CliError> {
    if scenes.is_empty() {
        return Err(CliError::Usage("at least one scene is required".into()));
    }
    let model = ModelArgs {
        model: model_path.to_path_buf(),
        arch: arch.map(Path::to_path_buf),
    }
    .load()?;
    let result = bench_inference(
        scenes,
        &model,
        &ReferenceBackend,
        batch_size,
        &InferenceBenchOptions::default(),
    )?;
    let json = out.with_extension("json");
    let phases = out.with_extension("phases.csv");
    let batches = out.with_extension("batches.csv");
    export_json(&result.report, &json)?;
    export_phases_csv(&result.report, &phases)?;
    export_batches_csv(&result.report, &batches)?;
    let s = &result.report.summary;
    println!(
        "backend {} batch {}: {} files, {} encode batches",
        result.report.backend_name,
        result.report.batch_size,
        scenes.len(),
        result.report.encode_batches.len()
    );
    println!(
        "encode batch seconds: mean {:.4} median {:.4} p95 {:.4} max {:.4}",
        s.mean, s.median, s.p95, s.max
    );
    println!("reports: {} {} {}", json.display(), phases.display(), batches.display());
    Ok(())
}

fn cmd_bench_training(
    data_path: &Path,
    eval_path: Option<&Path>,
    batch_sizes: &[usize],
    epochs: usize,
    lr: f32,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let data = LabeledLatentSet::load_csv(data_path)?;
    let eval_set = match eval_path {
        Some(p) => LabeledLatentSet::load_csv(p)?,
        None => data.clone(),
    };
    let rows = bench_training(&data, &eval_set, batch_sizes, epochs, lr, seed)?;
    let json = out.with_extension("json");
    let text = serde_json::to_string_pretty(&rows)
        .map_err(|e| Error::InvalidArgument(format!("serialize sweep: {e}")))?;
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    let csv_path = out.with_extension("csv");
    let mut csv = String::from("batch_size,epochs,mean_epoch_s,std_epoch_s,auprc,precision,recall,f1\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.batch_size,
            r.epochs,
            r.mean_epoch_s,
            r.std_epoch_s,
            r.metrics.auprc,
            r.metrics.precision,
            r.metrics.recall,
            r.metrics.f1
        ));
    }
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    println!("batch_size  mean_epoch_s  auprc   f1");
    for r in &rows {
        println!(
            "{:>10}  {:>12.4}  {:.4}  {:.4}",
            r.batch_size, r.mean_epoch_s, r.metrics.auprc, r.metrics.f1
        );
    }
    println!("reports: {} {}", json.display(), csv_path.display());
    Ok(())
}

fn cmd_fixtures(kind: FixtureKind) -> Result<(), CliError> {
    match kind {
        FixtureKind::Weights { seed, out, arch_out } => {
            let ws = gen_weights(seed);
            save_weights(&ws, &out)?;
            let arch = reference_arch();
            arch.save_manifest(&arch_out)?;
            println!(
                "weights ({} entries, seed {seed}) -> {}; manifest -> {}",
                ws.entries.len(),
                out.display(),
                arch_out.display()
            );
        }
        FixtureKind::Scene {
            seed,
            height,
            width,
            acquisition,
            out,
        } => {
            let scene = gen_scene(seed, 4, height, width, acquisition);
            save_scene(&scene, &out)?;
            println!("scene 4x{height}x{width} (seed {seed}) -> {}", out.display());
        }
        FixtureKind::ScenePair {
            seed,
            changed,
            out_a,
            out_b,
        } => {
            if changed > 225 {
                return Err(CliError::Usage("changed tiles cannot exceed 225".into()));
            }
            let (a, b, gt) = gen_scene_pair(seed, changed)?;
            save_scene(&a, &out_a)?;
            save_scene(&b, &out_b)?;
            println!("scene pair (seed {seed}) -> {} {}", out_a.display(), out_b.display());
            for (r, c) in gt {
                println!("changed tile ({r},{c})");
            }
        }
        FixtureKind::LatentDataset {
            seed,
            n,
            margin,
            out_train,
            out_eval,
        } => {
            if n < 2 {
                return Err(CliError::Usage("n must be >= 2".into()));
            }
            let (train_set, eval_set) = gen_latent_dataset(seed, n, margin);
            train_set.save_csv(&out_train)?;
            eval_set.save_csv(&out_eval)?;
            println!(
                "latent dataset n={n} margin={margin} (seed {seed}) -> {} {}",
                out_train.display(),
                out_eval.display()
            );
        }
    }
    Ok(())
}
