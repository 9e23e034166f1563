//! Deterministic generators standing in for data the mission used but
//! never published: reference encoder weights, synthetic Sentinel-like
//! scenes, perturbed scene pairs with ground truth, and two-cluster
//! latent classification sets.
//!
//! Every generator is a pure function of (seed, size parameters); reruns
//! are byte-identical. Randomness comes from [`SeededRng`] (ChaCha8 +
//! Box-Muller), so the exact output bytes are pinned by the seed.

use crate::encoder::{reference_arch, LATENT_DIM};
use crate::error::Result;
use crate::fewshot::LabeledLatentSet;
use crate::ingest::{NormalizedTile, Scene, TILE_SIZE};
use crate::model_io::{LayerSpec, WeightEntry, WeightSet};
use crate::rng::SeededRng;

/// He-initialized weights for the reference encoder: weight entries are
/// normal draws scaled by sqrt(2/fan_in), biases by 0.1.
pub fn gen_weights(seed: u64) -> WeightSet {
    let arch = reference_arch();
    let flat_width = arch.validate().expect("reference arch is valid");
    let mut rng = SeededRng::new(seed);
    let mut entries = Vec::new();

    let mut draw = |name: String, shape: Vec<usize>, std: f32| {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.normal_f32() * std).collect();
        entries.push(WeightEntry { name, shape, data });
    };

    let mut in_channels = arch.input_shape[0];
    for layer in &arch.layers {
        if let LayerSpec::Conv2d {
            name,
            out_channels,
            kernel,
            ..
        } = layer
        {
            let fan_in = in_channels * kernel * kernel;
            let std = (2.0 / fan_in as f32).sqrt();
            draw(
                format!("{name}.weight"),
                vec![*out_channels, in_channels, *kernel, *kernel],
                std,
            );
            draw(format!("{name}.bias"), vec![*out_channels], 0.1);
            in_channels = *out_channels;
        }
    }
    for head in [&arch.mu_head, &arch.logvar_head] {
        let std = (2.0 / flat_width as f32).sqrt();
        draw(format!("{}.weight", head.name), vec![head.out, flat_width], std);
        draw(format!("{}.bias", head.name), vec![head.out], 0.1);
    }

    WeightSet::new(entries).expect("generated entries are unique and sized")
}

/// Synthetic raw scene with uniform digital numbers in [0, 10000).
pub fn gen_scene(seed: u64, channels: usize, height: usize, width: usize, acquisition_index: u32) -> Scene {
    let mut rng = SeededRng::new(seed);
    let data = (0..channels * height * width)
        .map(|_| (rng.uniform_f64() * 10000.0) as f32)
        .collect();
    Scene::new(channels, height, width, 10.0, acquisition_index, data)
        .expect("generated scene satisfies ingest invariants")
}

/// Changed tile positions (row, col), row-major sorted.
pub type GroundTruth = Vec<(usize, usize)>;

/// Two 480x480x4 scenes where `scene_b` equals `scene_a` except for
/// `n_changed_tiles` randomly chosen tiles replaced with fresh noise.
/// Returns the changed tile positions as ground truth.
pub fn gen_scene_pair(seed: u64, n_changed_tiles: usize) -> Result<(Scene, Scene, GroundTruth)> {
    const GRID: usize = 15; // 480 / 32
    assert!(n_changed_tiles <= GRID * GRID);
    let mut rng = SeededRng::new(seed);
    let scene_a = gen_scene(rng.next_u64(), 4, GRID * TILE_SIZE, GRID * TILE_SIZE, 0);

    // pick distinct tiles
    let mut cells: Vec<usize> = (0..GRID * GRID).collect();
    rng.shuffle(&mut cells);
    let mut changed: Vec<usize> = cells[..n_changed_tiles].to_vec();
    changed.sort_unstable();

    let mut data = scene_a.data.clone();
    let (h, w) = (scene_a.height, scene_a.width);
    for &cell in &changed {
        let (r, c) = (cell / GRID, cell % GRID);
        for band in 0..4 {
            for y in 0..TILE_SIZE {
                let off = (band * h + r * TILE_SIZE + y) * w + c * TILE_SIZE;
                for x in 0..TILE_SIZE {
                    data[off + x] = (rng.uniform_f64() * 10000.0) as f32;
                }
            }
        }
    }
    let scene_b = Scene::new(4, h, w, 10.0, 1, data)?;
    let ground_truth = changed.iter().map(|&cell| (cell / GRID, cell % GRID)).collect();
    Ok((scene_a, scene_b, ground_truth))
}

/// Two 128-d Gaussian clusters (unit covariance) with centers `margin`
/// apart along a random unit direction, balanced labels. Returns a
/// train set of `n` samples and a disjoint eval set of equal size.
pub fn gen_latent_dataset(seed: u64, n: usize, margin: f32) -> (LabeledLatentSet, LabeledLatentSet) {
    assert!(n >= 2);
    let mut rng = SeededRng::new(seed);

    let mut direction: Vec<f64> = (0..LATENT_DIM).map(|_| rng.normal_f64()).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let mut make_split = |count: usize| {
        let mut latents = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let label = (i % 2) as u8;
            let sign = if label == 1 { 0.5 } else { -0.5 };
            let mu: Vec<f32> = direction
                .iter()
                .map(|&d| (sign * margin as f64 * d + rng.normal_f64()) as f32)
                .collect();
            latents.push(mu);
            labels.push(label);
        }
        LabeledLatentSet::new(latents, labels).expect("generated split is well-formed")
    };

    (make_split(n), make_split(n))
}

/// All-zeros 4x32x32 tile at grid position (0, 0).
pub fn zero_tile() -> NormalizedTile {
    NormalizedTile {
        channels: 4,
        row: 0,
        col: 0,
        data: vec![0.0; 4 * TILE_SIZE * TILE_SIZE],
    }
}
