//! Detect changed tiles between two acquisitions of the same scene.
//!
//! Uses a synthetic scene pair where a known set of tiles was perturbed,
//! then checks how many of them the cosine-distance ranking recovers.
//!
//! Run with: cargo run --release --example change_detection

use latentsat::change::{change_map, rank_tiles, LatentGrid, Metric};
use latentsat::encoder::{encode_batch, reference_arch};
use latentsat::fixtures::{gen_scene_pair, gen_weights};
use latentsat::ingest::{normalize, tile_scene, Scene};
use latentsat::model_io::{bind, BoundModel};

fn encode(scene: &Scene, model: &BoundModel) -> latentsat::Result<LatentGrid> {
    let grid = tile_scene(&normalize(scene))?;
    let (latents, _) = encode_batch(&grid.tiles, model, 64)?;
    LatentGrid::new(grid.rows, grid.cols, scene.acquisition_index, latents)
}

fn main() -> latentsat::Result<()> {
    let model = bind(&gen_weights(42), &reference_arch())?;
    let (before, after, truth) = gen_scene_pair(42, 5)?;
    println!("ground-truth changed tiles: {truth:?}");

    let history = [encode(&before, &model)?];
    let current = encode(&after, &model)?;
    let cm = change_map(&history, &current, Metric::Cosine)?;

    let top = rank_tiles(&cm, truth.len())?;
    let mut hits = 0;
    for (row, col, score) in &top {
        let hit = truth.contains(&(*row, *col));
        hits += hit as usize;
        println!(
            "tile ({row},{col}) score {score:.6} {}",
            if hit { "<- true change" } else { "" }
        );
    }
    println!("recovered {hits}/{} changed tiles in the top-{}", truth.len(), truth.len());
    Ok(())
}
