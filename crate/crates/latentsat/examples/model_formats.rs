//! Tour of the on-disk formats: .rvwt weight files, .arch architecture
//! manifests, and .rvsc scene files, all round-tripped through disk.
//!
//! Run with: cargo run --release --example model_formats

use latentsat::encoder::reference_arch;
use latentsat::fixtures::{gen_scene, gen_weights};
use latentsat::ingest::{load_scene, save_scene};
use latentsat::model_io::{bind, load_weights, save_weights, ArchSpec};

fn main() -> latentsat::Result<()> {
    let dir = std::env::temp_dir().join("latentsat_model_formats");
    std::fs::create_dir_all(&dir).ok();

    // Weights: named tensors with explicit shapes, little-endian f32.
    let ws = gen_weights(42);
    let wpath = dir.join("reference.rvwt");
    save_weights(&ws, &wpath)?;
    let ws2 = load_weights(&wpath)?;
    println!("{} weight entries -> {}", ws2.entries.len(), wpath.display());
    for e in ws2.entries.iter().take(4) {
        println!("  {} {:?} ({} values)", e.name, e.shape, e.data.len());
    }

    // Architecture manifest: a line-oriented text description of the
    // encoder; binding checks it against the weight shapes.
    let arch = reference_arch();
    let apath = dir.join("reference.arch");
    arch.save_manifest(&apath)?;
    let arch2 = ArchSpec::load_manifest(&apath)?;
    println!(
        "manifest -> {} ({} trunk layers, latent dim {})",
        apath.display(),
        arch2.layers.len(),
        arch2.latent_dim
    );
    bind(&ws2, &arch2)?;
    println!("weights bind cleanly to the manifest");

    // Scenes: planar band-major f32 rasters with ground sampling
    // distance and acquisition index in the header.
    let scene = gen_scene(1, 4, 64, 96, 3);
    let spath = dir.join("scene.rvsc");
    save_scene(&scene, &spath)?;
    let scene2 = load_scene(&spath)?;
    println!(
        "scene {}x{}x{} gsd {}m acquisition {} -> {}",
        scene2.channels,
        scene2.height,
        scene2.width,
        scene2.gsd_m,
        scene2.acquisition_index,
        spath.display()
    );
    Ok(())
}
