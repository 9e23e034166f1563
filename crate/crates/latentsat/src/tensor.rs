//! Minimal dense-tensor kernel: convolution, affine maps, activations.
//!
//! All operations are pure functions over immutable inputs. Accumulation
//! happens in f64, storage stays f32, so repeat calls on identical inputs
//! are bit-identical. Convolution uses the cross-correlation convention
//! (no kernel flip), matching mainstream deep-learning stacks so weight
//! files stay portable. No broadcasting; shapes must match exactly.

use crate::error::{Error, Result};

/// Dense row-major f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, validating shape/data agreement and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "zero dimension in shape {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                context: "Tensor::new".into(),
                expected: format!("{expected} elements for shape {shape:?}"),
                actual: format!("{} elements", data.len()),
            });
        }
        if let Some(offset) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "Tensor::new".into(),
                offset,
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// 2D convolution (cross-correlation) of `input` [Cin,H,W] with
/// `kernel` [Cout,Cin,kH,kW], zero padding, per-output-channel bias.
///
/// Output spatial dims: H' = floor((H + 2·padding − kH)/stride) + 1,
/// likewise for W'. Each output element is the exact sum of products
/// plus bias, accumulated in f64.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let [cin, h, w] = dims3(input, "conv2d input")?;
    let ks = kernel.shape();
    if ks.len() != 4 {
        return Err(Error::ShapeMismatch {
            context: "conv2d kernel".into(),
            expected: "rank 4 [Cout,Cin,kH,kW]".into(),
            actual: format!("{ks:?}"),
        });
    }
    let (cout, kcin, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
    if kcin != cin {
        return Err(Error::ShapeMismatch {
            context: "conv2d input channels".into(),
            expected: format!("{kcin}"),
            actual: format!("{cin}"),
        });
    }
    if bias.len() != cout {
        return Err(Error::ShapeMismatch {
            context: "conv2d bias".into(),
            expected: format!("{cout}"),
            actual: format!("{}", bias.len()),
        });
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("conv2d stride must be >= 1".into()));
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(Error::InvalidArgument(format!(
            "conv2d: padded input {}x{} smaller than kernel {kh}x{kw}",
            h + 2 * padding,
            w + 2 * padding
        )));
    }

    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    let x = input.data();
    let k = kernel.data();
    let mut out = vec![0.0f32; cout * oh * ow];

    for oc in 0..cout {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[oc] as f64;
                for ic in 0..cin {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            let xv = x[(ic * h + iy as usize) * w + ix as usize] as f64;
                            let kv = k[((oc * cin + ic) * kh + ky) * kw + kx] as f64;
                            acc += xv * kv;
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc as f32;
            }
        }
    }

    Tensor::new(vec![cout, oh, ow], out)
}

/// Affine map: out[i] = Σ_j W[i,j]·x[j] + b[i], with `w` shaped [m,n].
pub fn linear(x: &[f32], w: &Tensor, b: &[f32]) -> Result<Vec<f32>> {
    let ws = w.shape();
    if ws.len() != 2 {
        return Err(Error::ShapeMismatch {
            context: "linear weight".into(),
            expected: "rank 2 [m,n]".into(),
            actual: format!("{ws:?}"),
        });
    }
    let (m, n) = (ws[0], ws[1]);
    if x.len() != n {
        return Err(Error::ShapeMismatch {
            context: "linear input".into(),
            expected: format!("{n}"),
            actual: format!("{}", x.len()),
        });
    }
    if b.len() != m {
        return Err(Error::ShapeMismatch {
            context: "linear bias".into(),
            expected: format!("{m}"),
            actual: format!("{}", b.len()),
        });
    }
    let wd = w.data();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut acc = b[i] as f64;
        for j in 0..n {
            acc += wd[i * n + j] as f64 * x[j] as f64;
        }
        out.push(acc as f32);
    }
    Ok(out)
}

/// Elementwise max(x, alpha·x). Requires alpha >= 0.
pub fn leaky_relu(t: &Tensor, alpha: f32) -> Result<Tensor> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "leaky_relu alpha must be >= 0, got {alpha}"
        )));
    }
    let data = t
        .data()
        .iter()
        .map(|&v| if v >= 0.0 { v } else { alpha * v })
        .collect();
    Ok(Tensor {
        shape: t.shape.clone(),
        data,
    })
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dims3(t: &Tensor, context: &str) -> Result<[usize; 3]> {
    let s = t.shape();
    if s.len() != 3 {
        return Err(Error::ShapeMismatch {
            context: context.into(),
            expected: "rank 3 [C,H,W]".into(),
            actual: format!("{s:?}"),
        });
    }
    Ok([s[0], s[1], s[2]])
}
