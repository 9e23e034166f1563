//! Benchmark the full inference pipeline (load -> normalize -> tile ->
//! encode -> compare-vs-previous) over a short scene sequence.
//!
//! Run with: cargo run --release --example bench_inference

use latentsat::bench::{bench_inference, export_json, InferenceBenchOptions};
use latentsat::encoder::{reference_arch, ReferenceBackend};
use latentsat::fixtures::{gen_scene, gen_weights};
use latentsat::ingest::save_scene;
use latentsat::model_io::bind;

fn main() -> latentsat::Result<()> {
    let model = bind(&gen_weights(42), &reference_arch())?;

    // Three acquisitions of a 160x160 scene, written to disk so the
    // load phase is measured too.
    let dir = std::env::temp_dir().join("latentsat_bench_inference");
    std::fs::create_dir_all(&dir).ok();
    let mut paths = Vec::new();
    for i in 0..3u32 {
        let path = dir.join(format!("scene_{i}.rvsc"));
        save_scene(&gen_scene(100 + i as u64, 4, 160, 160, i), &path)?;
        paths.push(path);
    }

    let result = bench_inference(
        &paths,
        &model,
        &ReferenceBackend,
        8,
        &InferenceBenchOptions::default(),
    )?;

    let report = &result.report;
    println!(
        "backend {}, batch size {}, {} phase timings, {} encode batches",
        report.backend_name,
        report.batch_size,
        report.phases.len(),
        report.encode_batches.len()
    );
    println!(
        "encode batch seconds: mean {:.4} median {:.4} p95 {:.4} max {:.4}",
        report.summary.mean, report.summary.median, report.summary.p95, report.summary.max
    );
    for cm in &result.change_maps {
        let peak = cm.scores.iter().cloned().fold(f32::MIN, f32::max);
        println!(
            "change map vs acquisition {}: peak score {:.4}",
            cm.curr_acquisition, peak
        );
    }

    let out = dir.join("report.json");
    export_json(report, &out)?;
    println!("full report -> {}", out.display());
    Ok(())
}
