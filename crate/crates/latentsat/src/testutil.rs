//! Independent brute-force oracles used by the test suites.
//!
//! Everything here is straight-line loop code that deliberately avoids
//! the production kernels in [`crate::tensor`], so agreement between the
//! two paths is meaningful. Not part of the supported API.

use crate::fewshot::{grad_step, Classifier, LabeledLatentSet};
use crate::ingest::NormalizedTile;
use crate::model_io::WeightSet;

/// Naive forward pass of the reference encoder over one tile, reading
/// weights by entry name. Returns (mu, clamped logvar).
pub fn forward_oracle(ws: &WeightSet, tile: &NormalizedTile) -> (Vec<f32>, Vec<f32>) {
    let entry = |name: &str| {
        let e = ws.get(name).unwrap_or_else(|| panic!("missing {name}"));
        (e.shape.clone(), e.data.clone())
    };

    let mut x = tile.data.clone();
    let mut c = tile.channels;
    let mut hw = 32usize;
    for layer in ["enc.conv1", "enc.conv2", "enc.conv3", "enc.conv4"] {
        let (kshape, kdata) = entry(&format!("{layer}.weight"));
        let (_, bias) = entry(&format!("{layer}.bias"));
        let (cout, cin, kh, kw) = (kshape[0], kshape[1], kshape[2], kshape[3]);
        assert_eq!(cin, c);
        let (h, w) = (hw, hw);
        let oh = (h + 2 - kh) / 2 + 1; // stride 2, padding 1
        let ow = (w + 2 - kw) / 2 + 1;
        let mut out = vec![0.0f32; cout * oh * ow];
        for oc in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[oc] as f64;
                    for ic in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * 2 + ky) as isize - 1;
                                let ix = (ox * 2 + kx) as isize - 1;
                                if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w {
                                    acc += x[(ic * h + iy as usize) * w + ix as usize] as f64
                                        * kdata[((oc * cin + ic) * kh + ky) * kw + kx] as f64;
                                }
                            }
                        }
                    }
                    // leaky relu, alpha 0.01
                    let v = acc as f32;
                    out[(oc * oh + oy) * ow + ox] = if v >= 0.0 { v } else { 0.01 * v };
                }
            }
        }
        x = out;
        c = cout;
        hw = oh;
    }

    let head = |name: &str| {
        let (wshape, wdata) = entry(&format!("{name}.weight"));
        let (_, bias) = entry(&format!("{name}.bias"));
        let (m, n) = (wshape[0], wshape[1]);
        assert_eq!(n, x.len());
        (0..m)
            .map(|i| {
                let mut acc = bias[i] as f64;
                for j in 0..n {
                    acc += wdata[i * n + j] as f64 * x[j] as f64;
                }
                acc as f32
            })
            .collect::<Vec<f32>>()
    };
    let mu = head("enc.mu");
    let logvar = head("enc.logvar")
        .into_iter()
        .map(|v| v.clamp(-20.0, 20.0))
        .collect();
    (mu, logvar)
}

/// Average precision by exhaustive threshold enumeration: for every
/// unique score taken as a threshold, recount the whole confusion
/// matrix from scratch.
pub fn auprc_brute_force(scores: &[f32], labels: &[u8]) -> f64 {
    let total_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    assert!(total_pos > 0.0);
    let mut thresholds: Vec<f32> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        let mut tp = 0.0;
        let mut fp = 0.0;
        for (&s, &y) in scores.iter().zip(labels) {
            if s >= t {
                if y == 1 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let precision = tp / (tp + fp);
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// Mean BCE over a batch, direct f64 formula, independent of the
/// production logit-space path.
fn batch_loss_f64(w: &[f64], b: f64, data: &LabeledLatentSet, batch: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in batch {
        let mut z = b;
        for (wi, &xi) in w.iter().zip(&data.latents[i]) {
            z += wi * xi as f64;
        }
        let y = data.labels[i] as f64;
        // stable logit-space BCE, recomputed here from first principles
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    }
    total / batch.len() as f64
}

/// Asserts the analytic gradient (recovered from `grad_step` at lr = 1)
/// against central finite differences on every coordinate. Near-zero
/// gradients fall back to an absolute comparison via the 1e-3 floor in
/// the denominator.
pub fn check_gradient_fd(
    c: &Classifier,
    data: &LabeledLatentSet,
    batch: &[usize],
    h: f64,
    tol: f64,
) {
    let (stepped, _) = grad_step(c, data, batch, 1.0).unwrap();
    let analytic_w: Vec<f64> = c
        .w
        .iter()
        .zip(&stepped.w)
        .map(|(&a, &b)| a as f64 - b as f64)
        .collect();
    let analytic_b = c.b as f64 - stepped.b as f64;

    let w64: Vec<f64> = c.w.iter().map(|&v| v as f64).collect();
    let b64 = c.b as f64;

    let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(1e-3);

    for i in 0..w64.len() {
        let mut wp = w64.clone();
        let mut wm = w64.clone();
        wp[i] += h;
        wm[i] -= h;
        let fd = (batch_loss_f64(&wp, b64, data, batch) - batch_loss_f64(&wm, b64, data, batch))
            / (2.0 * h);
        assert!(
            rel(analytic_w[i], fd) < tol,
            "w[{i}]: analytic {} vs fd {fd}",
            analytic_w[i]
        );
    }
    let fd_b = (batch_loss_f64(&w64, b64 + h, data, batch)
        - batch_loss_f64(&w64, b64 - h, data, batch))
        / (2.0 * h);
    assert!(
        rel(analytic_b, fd_b) < tol,
        "b: analytic {analytic_b} vs fd {fd_b}"
    );
}
