//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `cargo test --test acceptance -- --nocapture`).

use std::path::PathBuf;
use std::process::Command;

use latentsat::bench::{bench_inference, summarize, InferenceBenchOptions};
use latentsat::change::{change_map, rank_tiles, LatentGrid, Metric};
use latentsat::encoder::{encode_batch, encode_tile, reference_arch, ReferenceBackend, LATENT_DIM};
use latentsat::fewshot::{auprc, evaluate, train, Classifier, LabeledLatentSet};
use latentsat::fixtures::{gen_latent_dataset, gen_scene, gen_scene_pair, gen_weights};
use latentsat::ingest::{normalize, save_scene, tile_scene, NormalizedTile, Scene, TILE_SIZE};
use latentsat::model_io::{bind, load_weights_from_bytes, save_weights, BoundModel};
use latentsat::ingest::load_scene_from_bytes;
use latentsat::rng::SeededRng;
use latentsat::testutil;

fn model() -> BoundModel {
    bind(&gen_weights(42), &reference_arch()).unwrap()
}

fn random_tile(rng: &mut SeededRng) -> NormalizedTile {
    NormalizedTile {
        channels: 4,
        row: 0,
        col: 0,
        data: (0..4 * TILE_SIZE * TILE_SIZE)
            .map(|_| rng.uniform_f64() as f32)
            .collect(),
    }
}

fn encode_scene_grid(scene: &Scene, model: &BoundModel) -> LatentGrid {
    let grid = tile_scene(&normalize(scene)).unwrap();
    let (latents, _) = encode_batch(&grid.tiles, model, 64).unwrap();
    LatentGrid::new(grid.rows, grid.cols, scene.acquisition_index, latents).unwrap()
}

#[test]
fn criterion_1_tiling_geometry() {
    let scene = gen_scene(1, 4, 480, 480, 0);
    let grid = tile_scene(&normalize(&scene)).unwrap();
    assert_eq!(grid.tiles.len(), 225);
    assert_eq!((grid.rows, grid.cols), (15, 15));
    for tile in &grid.tiles {
        assert_eq!(tile.data.len(), 4 * 32 * 32);
    }

    // property over random H, W
    let mut rng = SeededRng::new(2);
    for _ in 0..25 {
        let h = 32 + rng.below(200);
        let w = 32 + rng.below(200);
        let scene = gen_scene(rng.next_u64(), 2, h, w, 0);
        let grid = tile_scene(&normalize(&scene)).unwrap();
        assert_eq!(grid.tiles.len(), (h / 32) * (w / 32));
    }
    println!("ACCEPT 1 tiling geometry: PASS");
}

#[test]
fn criterion_2_encoder_matches_naive_oracle() {
    let m = model();
    let ws = gen_weights(42);
    let mut rng = SeededRng::new(3);
    let tiles: Vec<NormalizedTile> = (0..100).map(|_| random_tile(&mut rng)).collect();

    for tile in &tiles {
        let got = encode_tile(tile, &m).unwrap();
        let (mu, logvar) = testutil::forward_oracle(&ws, tile);
        for (a, b) in got.mu.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-5, "mu {a} vs oracle {b}");
        }
        for (a, b) in got.logvar.iter().zip(&logvar) {
            assert!((a - b).abs() < 1e-5, "logvar {a} vs oracle {b}");
        }
    }

    // batching invariance, bitwise
    let (b1, _) = encode_batch(&tiles, &m, 1).unwrap();
    let (b7, _) = encode_batch(&tiles, &m, 7).unwrap();
    let (b64, _) = encode_batch(&tiles, &m, 64).unwrap();
    for ((x, y), z) in b1.iter().zip(&b7).zip(&b64) {
        for i in 0..LATENT_DIM {
            assert_eq!(x.mu[i].to_bits(), y.mu[i].to_bits());
            assert_eq!(x.mu[i].to_bits(), z.mu[i].to_bits());
            assert_eq!(x.logvar[i].to_bits(), z.logvar[i].to_bits());
        }
    }
    println!("ACCEPT 2 encoder correctness: PASS");
}

#[test]
fn criterion_3_gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(4);
    for trial in 0..100 {
        let n = 4 + (trial % 5);
        let latents: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..LATENT_DIM).map(|_| rng.normal_f32()).collect())
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
        let data = LabeledLatentSet::new(latents, labels).unwrap();
        let c = Classifier {
            w: (0..LATENT_DIM).map(|_| rng.normal_f32() * 0.5).collect(),
            b: rng.normal_f32() * 0.5,
        };
        let batch: Vec<usize> = (0..n).collect();
        testutil::check_gradient_fd(&c, &data, &batch, 1e-3, 1e-4);
    }
    println!("ACCEPT 3 gradient correctness: PASS");
}

#[test]
fn criterion_4_fewshot_metrics_on_synthetic_1305() {
    let (train_set, eval_set) = gen_latent_dataset(42, 1305, 8.0);
    assert_eq!(train_set.len(), 1305);
    let (clf, _) = train(&Classifier::zeros(), &train_set, 50, 64, 0.1, 42).unwrap();
    assert_eq!(clf.param_count(), 129);
    let m = evaluate(&clf, &eval_set, 0.5).unwrap();
    assert!(m.auprc >= 0.97, "auprc {}", m.auprc);
    assert!(m.f1 >= 0.95, "f1 {}", m.f1);
    println!(
        "ACCEPT 4 few-shot analog (auprc {:.4}, f1 {:.4}): PASS",
        m.auprc, m.f1
    );
}

#[test]
fn criterion_5_change_detection_oracle() {
    let m = model();
    let (scene_a, scene_b, ground_truth) = gen_scene_pair(42, 5).unwrap();
    let grid_a = encode_scene_grid(&scene_a, &m);
    let grid_b = encode_scene_grid(&scene_b, &m);

    let cm = change_map(std::slice::from_ref(&grid_a), &grid_b, Metric::Cosine).unwrap();
    let mut top: Vec<(usize, usize)> = rank_tiles(&cm, 5)
        .unwrap()
        .into_iter()
        .map(|(r, c, _)| (r, c))
        .collect();
    top.sort_unstable();
    assert_eq!(top, ground_truth);

    let self_map = change_map(std::slice::from_ref(&grid_a), &grid_a, Metric::Cosine).unwrap();
    assert!(self_map.scores.iter().all(|&s| s < 1e-6));
    println!("ACCEPT 5 change-detection oracle: PASS");
}

#[test]
fn criterion_6_metric_oracles() {
    let mut rng = SeededRng::new(6);
    for _ in 0..1000 {
        let n = 5 + rng.below(30);
        let scores: Vec<f32> = (0..n).map(|_| (rng.uniform_f64() * 4.0) as f32).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
        if labels.iter().all(|&l| l == 0) {
            labels[0] = 1;
        }
        let got = auprc(&scores, &labels).unwrap();
        let want = testutil::auprc_brute_force(&scores, &labels);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    // hand-enumerated confusion matrix (scores fixed via logit features)
    let mut latents = Vec::new();
    for z in [3.0f32, 1.0, 0.5, -0.5, -1.0, -3.0] {
        let mut mu = vec![0.0f32; LATENT_DIM];
        mu[0] = z;
        latents.push(mu);
    }
    // predictions at 0.5: + + + - - -
    let set = LabeledLatentSet::new(latents, vec![1, 1, 0, 1, 0, 0]).unwrap();
    let c = Classifier {
        w: {
            let mut w = vec![0.0; LATENT_DIM];
            w[0] = 1.0;
            w
        },
        b: 0.0,
    };
    let m = evaluate(&c, &set, 0.5).unwrap();
    assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 1, 2, 1));
    assert!((m.precision - 2.0 / 3.0).abs() < 1e-6);
    assert!((m.recall - 2.0 / 3.0).abs() < 1e-6);
    assert!((m.f1 - 2.0 / 3.0).abs() < 1e-6);
    println!("ACCEPT 6 metric oracles: PASS");
}

#[test]
fn criterion_7_benchmark_structure() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..3)
        .map(|i| {
            let scene = gen_scene(700 + i as u64, 4, 480, 480, i as u32);
            let path = dir.path().join(format!("scene_{i}.rvsc"));
            save_scene(&scene, &path).unwrap();
            path
        })
        .collect();
    let m = model();
    let result = bench_inference(
        &paths,
        &m,
        &ReferenceBackend,
        64,
        &InferenceBenchOptions::default(),
    )
    .unwrap();
    let r = &result.report;
    assert_eq!(r.encode_batches.len(), 12); // 3 files x ceil(225/64)
    for path in &paths {
        let id = path.file_stem().unwrap().to_string_lossy();
        assert_eq!(r.phases.iter().filter(|p| p.file_id == id).count(), 4);
    }
    let durations: Vec<f64> = r.encode_batches.iter().map(|b| b.duration_s).collect();
    assert_eq!(r.summary, summarize(&durations).unwrap());
    println!(
        "ACCEPT 7 benchmark structure (mean encode batch {:.4}s, reported not asserted): PASS",
        r.summary.mean
    );
}

#[test]
fn criterion_8_format_round_trips_and_fuzz() {
    let dir = tempfile::tempdir().unwrap();

    // bit-exact round trips
    let ws = gen_weights(42);
    let wpath = dir.path().join("w.rvwt");
    save_weights(&ws, &wpath).unwrap();
    let ws_back = latentsat::model_io::load_weights(&wpath).unwrap();
    assert_eq!(ws, ws_back);
    for (a, b) in ws.entries.iter().zip(&ws_back.entries) {
        for (x, y) in a.data.iter().zip(&b.data) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    let scene = gen_scene(8, 4, 64, 64, 3);
    let spath = dir.path().join("s.rvsc");
    save_scene(&scene, &spath).unwrap();
    assert_eq!(scene, latentsat::ingest::load_scene(&spath).unwrap());

    // pinned content hash of the reference weight file
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(&wpath).unwrap();
    let hash = format!("{:x}", Sha256::digest(&bytes));
    assert_eq!(
        hash,
        "9b433629b88a44bd86d00a46679ca68f4a0ebc8e61d82e6227671f13cd5c68fd",
        "reference weight file changed; regenerate the pinned hash deliberately"
    );

    // fuzz: loaders must error, never panic
    let valid_w = bytes;
    let valid_s = std::fs::read(&spath).unwrap();
    let mut rng = SeededRng::new(9);
    let fake = std::path::Path::new("fuzz.bin");
    for i in 0..10_000 {
        let base: Vec<u8> = match i % 4 {
            0 => (0..rng.below(200)).map(|_| rng.next_u64() as u8).collect(),
            1 => {
                let mut b = valid_w.clone();
                b.truncate(rng.below(b.len() + 1));
                b
            }
            2 => {
                let mut b = valid_s.clone();
                b.truncate(rng.below(b.len() + 1));
                b
            }
            _ => {
                let mut b = if i % 8 == 3 { valid_w.clone() } else { valid_s.clone() };
                for _ in 0..1 + rng.below(16) {
                    let pos = rng.below(b.len());
                    b[pos] = rng.next_u64() as u8;
                }
                b
            }
        };
        let _ = load_weights_from_bytes(&base, fake);
        let _ = load_scene_from_bytes(&base, fake);
    }
    println!("ACCEPT 8 format round-trips and fuzz: PASS");
}

#[test]
fn criterion_9_pipeline_determinism() {
    let bin = env!("CARGO_BIN_EXE_latentsat");
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let run = |args: &[&str]| {
        let out = Command::new(bin)
            .args(args)
            .current_dir(root)
            .output()
            .expect("spawn latentsat");
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };

    run(&["fixtures", "weights", "--seed", "42", "--out", "ref.rvwt", "--arch-out", "ref.arch"]);
    run(&["fixtures", "scene-pair", "--seed", "42", "--changed", "5", "--out-a", "a.rvsc", "--out-b", "b.rvsc"]);
    run(&["fixtures", "latent-dataset", "--seed", "42", "--n", "300", "--margin", "8", "--out-train", "train.csv", "--out-eval", "eval.csv"]);

    for pass in ["p1", "p2"] {
        std::fs::create_dir(root.join(pass)).unwrap();
        run(&["encode", "a.rvsc", "b.rvsc", "--model", "ref.rvwt", "--arch", "ref.arch", "--out", &format!("{pass}/latents.csv")]);
        run(&["change", "a.rvsc", "b.rvsc", "--model", "ref.rvwt", "--arch", "ref.arch", "-k", "5", "--out", &format!("{pass}/changemap.csv")]);
        run(&["train", "--data", "train.csv", "--eval", "eval.csv", "--seed", "42", "--out", &format!("{pass}/clf.rvwt")]);
    }

    for file in ["latents_0.csv", "latents_1.csv", "changemap.csv", "changemap.json", "clf.rvwt"] {
        let a = std::fs::read(root.join("p1").join(file)).unwrap();
        let b = std::fs::read(root.join("p2").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical-seed runs");
    }
    println!("ACCEPT 9 pipeline determinism: PASS");
}
