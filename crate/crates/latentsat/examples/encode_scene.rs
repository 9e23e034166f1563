//! Encode a synthetic scene into per-tile 128-d latents.
//!
//! Run with: cargo run --release --example encode_scene

use latentsat::encoder::{encode_batch, reference_arch};
use latentsat::fixtures::{gen_scene, gen_weights};
use latentsat::ingest::{normalize, tile_scene};
use latentsat::model_io::bind;

fn main() -> latentsat::Result<()> {
    let model = bind(&gen_weights(42), &reference_arch())?;

    // A 480x480 4-band scene in raw digital numbers, then normalized
    // to [0, 1] and cut into the 15x15 grid of 32x32 tiles.
    let scene = gen_scene(7, 4, 480, 480, 0);
    let grid = tile_scene(&normalize(&scene))?;
    println!(
        "scene {}x{}x{} -> {} tiles ({} x {})",
        scene.channels,
        scene.height,
        scene.width,
        grid.tiles.len(),
        grid.rows,
        grid.cols
    );

    let (latents, timings) = encode_batch(&grid.tiles, &model, 64)?;
    for t in &timings {
        println!(
            "batch {}: {} tiles in {:.4}s",
            t.batch_index, t.tile_count, t.duration_s
        );
    }

    let first = &latents[0];
    println!(
        "tile {:?}: mu[0..4] = {:?}, logvar[0..4] = {:?}",
        first.tile_index,
        &first.mu[..4],
        &first.logvar[..4]
    );
    Ok(())
}
