//! Portable binary weight format (`.rvwt`) and architecture manifest (`.arch`).
//!
//! `.rvwt` layout, little-endian throughout:
//!
//! ```text
//! magic   "RVWT"          4 bytes
//! version u32             currently 1
//! count   u32             number of entries
//! reserved u32            zero
//! entry*  u32 name_len | name (UTF-8) | u32 rank | u32 dims[rank] | f32 data[prod(dims)]
//! ```
//!
//! The 16-byte header is followed by entries in forward-pass order. The
//! `.arch` manifest is a line-oriented text sidecar describing the layer
//! stack; see [`ArchSpec::to_manifest`].

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const WEIGHT_MAGIC: [u8; 4] = *b"RVWT";
pub const WEIGHT_FORMAT_VERSION: u32 = 1;

/// One named tensor in a weight file.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Ordered, uniquely-named weight tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightSet {
    pub entries: Vec<WeightEntry>,
}

impl WeightSet {
    pub fn new(entries: Vec<WeightEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.name.clone()) {
                return Err(Error::DuplicateEntry(e.name.clone()));
            }
            let expected: usize = e.shape.iter().product();
            if expected != e.data.len() {
                return Err(Error::EntryLengthMismatch {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    len: e.data.len(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, name: &str) -> Option<&WeightEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

pub fn save_weights(ws: &WeightSet, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&WEIGHT_MAGIC);
    buf.extend_from_slice(&WEIGHT_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ws.entries.len() as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for e in &ws.entries {
        buf.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.name.as_bytes());
        buf.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
        for &d in &e.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &e.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, context: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                context: context.into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, context: &str) -> Result<u32> {
        let b = self.take(4, context)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn load_weights(path: &Path) -> Result<WeightSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    load_weights_from_bytes(&bytes, path)
}

/// Parses a weight file image. Never panics on malformed input.
pub fn load_weights_from_bytes(bytes: &[u8], path: &Path) -> Result<WeightSet> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.take(4, "magic")?;
    if magic != WEIGHT_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: WEIGHT_MAGIC,
        });
    }
    let version = r.u32("version")?;
    if version != WEIGHT_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
            supported: WEIGHT_FORMAT_VERSION,
        });
    }
    let count = r.u32("entry count")?;
    r.u32("reserved")?;

    let mut entries = Vec::new();
    for i in 0..count {
        let name_len = r.u32("name length")? as usize;
        // cap before allocation; a name longer than the file is garbage
        if name_len > bytes.len() {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                context: format!("entry {i} name"),
            });
        }
        let name_bytes = r.take(name_len, &format!("entry {i} name"))?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| Error::ManifestParse {
                line: 0,
                message: format!("entry {i} name is not UTF-8"),
            })?
            .to_string();
        let rank = r.u32("rank")? as usize;
        if rank > 8 {
            return Err(Error::InvalidArgument(format!(
                "entry {name:?}: rank {rank} exceeds limit 8"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut numel: usize = 1;
        for _ in 0..rank {
            let d = r.u32("dimension")? as usize;
            numel = numel
                .checked_mul(d)
                .ok_or_else(|| Error::InvalidArgument(format!("entry {name:?}: shape overflow")))?;
            shape.push(d);
        }
        let payload = r.take(numel * 4, &format!("entry {name:?} payload"))?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        entries.push(WeightEntry { name, shape, data });
    }
    WeightSet::new(entries)
}

/// Layer descriptor in forward-pass order.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        name: String,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Leaky ReLU.
    Activation { alpha: f32 },
    Flatten,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadSpec {
    pub name: String,
    pub out: usize,
}

/// Encoder architecture: a conv/activation trunk ending in a flatten,
/// then two parallel linear heads (mu, logvar).
#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub mu_head: HeadSpec,
    pub logvar_head: HeadSpec,
    pub latent_dim: usize,
}

impl ArchSpec {
    /// Walks the shape chain and returns the flattened trunk width.
    pub fn validate(&self) -> Result<usize> {
        let [mut c, mut h, mut w] = self.input_shape;
        let mut flattened: Option<usize> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            if flattened.is_some() {
                return Err(Error::InvalidArgument(format!(
                    "layer {i}: trunk layers after flatten are not supported"
                )));
            }
            match layer {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    if h + 2 * padding < *kernel || w + 2 * padding < *kernel {
                        return Err(Error::InvalidArgument(format!(
                            "layer {i}: kernel {kernel} larger than padded input {h}x{w}"
                        )));
                    }
                    h = (h + 2 * padding - kernel) / stride + 1;
                    w = (w + 2 * padding - kernel) / stride + 1;
                    c = *out_channels;
                }
                LayerSpec::Activation { alpha } => {
                    if alpha.is_nan() || *alpha < 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "layer {i}: negative activation alpha"
                        )));
                    }
                }
                LayerSpec::Flatten => flattened = Some(c * h * w),
            }
        }
        let width = flattened.ok_or_else(|| {
            Error::InvalidArgument("architecture trunk must end with flatten".into())
        })?;
        if self.mu_head.out != self.latent_dim || self.logvar_head.out != self.latent_dim {
            return Err(Error::InvalidArgument(format!(
                "head widths ({}, {}) must equal latent_dim {}",
                self.mu_head.out, self.logvar_head.out, self.latent_dim
            )));
        }
        Ok(width)
    }

    /// Serializes to the line-oriented `.arch` manifest.
    pub fn to_manifest(&self) -> String {
        let mut out = String::from("arch v1\n");
        out.push_str(&format!(
            "input {}x{}x{}\n",
            self.input_shape[0], self.input_shape[1], self.input_shape[2]
        ));
        out.push_str(&format!("latent_dim {}\n", self.latent_dim));
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv2d {
                    name,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => out.push_str(&format!(
                    "conv2d name={name} out={out_channels} kernel={kernel} stride={stride} padding={padding}\n"
                )),
                LayerSpec::Activation { alpha } => {
                    out.push_str(&format!("activation fn=leaky_relu alpha={alpha}\n"))
                }
                LayerSpec::Flatten => out.push_str("flatten\n"),
            }
        }
        out.push_str(&format!(
            "head name={} out={}\n",
            self.mu_head.name, self.mu_head.out
        ));
        out.push_str(&format!(
            "head name={} out={}\n",
            self.logvar_head.name, self.logvar_head.out
        ));
        out
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        fn field<'a>(
            fields: &'a [(&'a str, &'a str)],
            key: &str,
            line: usize,
        ) -> Result<&'a str> {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::ManifestParse {
                    line,
                    message: format!("missing field {key:?}"),
                })
        }
        fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
            s.parse().map_err(|_| Error::ManifestParse {
                line,
                message: format!("bad number {s:?}"),
            })
        }

        let mut input_shape = None;
        let mut latent_dim = None;
        let mut layers = Vec::new();
        let mut heads: Vec<HeadSpec> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let kind = parts.next().unwrap();
            let fields: Vec<(&str, &str)> = parts
                .filter_map(|p| p.split_once('='))
                .collect();
            match kind {
                "arch" => {}
                "input" => {
                    let spec = line.split_whitespace().nth(1).ok_or(Error::ManifestParse {
                        line: line_no,
                        message: "input line needs CxHxW".into(),
                    })?;
                    let dims: Vec<usize> = spec
                        .split('x')
                        .map(|d| parse_num(d, line_no))
                        .collect::<Result<_>>()?;
                    if dims.len() != 3 {
                        return Err(Error::ManifestParse {
                            line: line_no,
                            message: format!("input shape must be CxHxW, got {spec:?}"),
                        });
                    }
                    input_shape = Some([dims[0], dims[1], dims[2]]);
                }
                "latent_dim" => {
                    let v = line.split_whitespace().nth(1).ok_or(Error::ManifestParse {
                        line: line_no,
                        message: "latent_dim needs a value".into(),
                    })?;
                    latent_dim = Some(parse_num(v, line_no)?);
                }
                "conv2d" => layers.push(LayerSpec::Conv2d {
                    name: field(&fields, "name", line_no)?.to_string(),
                    out_channels: parse_num(field(&fields, "out", line_no)?, line_no)?,
                    kernel: parse_num(field(&fields, "kernel", line_no)?, line_no)?,
                    stride: parse_num(field(&fields, "stride", line_no)?, line_no)?,
                    padding: parse_num(field(&fields, "padding", line_no)?, line_no)?,
                }),
                "activation" => layers.push(LayerSpec::Activation {
                    alpha: parse_num(field(&fields, "alpha", line_no)?, line_no)?,
                }),
                "flatten" => layers.push(LayerSpec::Flatten),
                "head" => heads.push(HeadSpec {
                    name: field(&fields, "name", line_no)?.to_string(),
                    out: parse_num(field(&fields, "out", line_no)?, line_no)?,
                }),
                other => {
                    return Err(Error::ManifestParse {
                        line: line_no,
                        message: format!("unknown directive {other:?}"),
                    })
                }
            }
        }

        if heads.len() != 2 {
            return Err(Error::ManifestParse {
                line: 0,
                message: format!("expected exactly 2 head lines, got {}", heads.len()),
            });
        }
        let logvar_head = heads.pop().unwrap();
        let mu_head = heads.pop().unwrap();
        let spec = ArchSpec {
            input_shape: input_shape.ok_or(Error::ManifestParse {
                line: 0,
                message: "missing input line".into(),
            })?,
            layers,
            mu_head,
            logvar_head,
            latent_dim: latent_dim.ok_or(Error::ManifestParse {
                line: 0,
                message: "missing latent_dim line".into(),
            })?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn save_manifest(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_manifest()).map_err(|e| Error::io(path, e))
    }

    pub fn load_manifest(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_manifest(&text)
    }
}

/// A trunk layer with weights resolved.
#[derive(Debug, Clone)]
pub enum BoundLayer {
    Conv2d {
        weight: Tensor,
        bias: Vec<f32>,
        stride: usize,
        padding: usize,
    },
    Activation { alpha: f32 },
    Flatten,
}

#[derive(Debug, Clone)]
pub struct BoundLinear {
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

/// Immutable, forward-ready model. Shareable across threads.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub arch: ArchSpec,
    pub layers: Vec<BoundLayer>,
    pub mu_head: BoundLinear,
    pub logvar_head: BoundLinear,
}

fn resolve(
    ws: &WeightSet,
    layer_name: &str,
    suffix: &str,
    expected_shape: &[usize],
) -> Result<WeightEntry> {
    let name = format!("{layer_name}.{suffix}");
    let entry = ws.get(&name).ok_or_else(|| Error::MissingEntry {
        name: name.clone(),
        layer: layer_name.to_string(),
    })?;
    if entry.shape != expected_shape {
        return Err(Error::ShapeMismatch {
            context: format!("weight entry {name:?} for layer {layer_name:?}"),
            expected: format!("{expected_shape:?}"),
            actual: format!("{:?}", entry.shape),
        });
    }
    Ok(entry.clone())
}

/// Binds weights to an architecture, checking names and exact shapes.
pub fn bind(ws: &WeightSet, arch: &ArchSpec) -> Result<BoundModel> {
    let flat_width = arch.validate()?;
    let mut in_channels = arch.input_shape[0];
    let mut layers = Vec::with_capacity(arch.layers.len());
    for layer in &arch.layers {
        match layer {
            LayerSpec::Conv2d {
                name,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let w = resolve(ws, name, "weight", &[*out_channels, in_channels, *kernel, *kernel])?;
                let b = resolve(ws, name, "bias", &[*out_channels])?;
                layers.push(BoundLayer::Conv2d {
                    weight: Tensor::new(w.shape, w.data)?,
                    bias: b.data,
                    stride: *stride,
                    padding: *padding,
                });
                in_channels = *out_channels;
            }
            LayerSpec::Activation { alpha } => layers.push(BoundLayer::Activation { alpha: *alpha }),
            LayerSpec::Flatten => layers.push(BoundLayer::Flatten),
        }
    }

    let bind_head = |head: &HeadSpec| -> Result<BoundLinear> {
        let w = resolve(ws, &head.name, "weight", &[head.out, flat_width])?;
        let b = resolve(ws, &head.name, "bias", &[head.out])?;
        Ok(BoundLinear {
            weight: Tensor::new(w.shape, w.data)?,
            bias: b.data,
        })
    };

    Ok(BoundModel {
        arch: arch.clone(),
        layers,
        mu_head: bind_head(&arch.mu_head)?,
        logvar_head: bind_head(&arch.logvar_head)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::reference_arch;
    use crate::fixtures::gen_weights;
    use tempfile::tempdir;

    fn small_ws() -> WeightSet {
        WeightSet::new(vec![WeightEntry {
            name: "t".into(),
            shape: vec![2, 2],
            data: vec![1.0, 2.0, 3.0, 4.0],
        }])
        .unwrap()
    }

    #[test]
    fn empty_set_is_header_only_16_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.rvwt");
        save_weights(&WeightSet::default(), &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 16);
        let back = load_weights(&path).unwrap();
        assert!(back.entries.is_empty());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.rvwt");
        let ws = small_ws();
        save_weights(&ws, &path).unwrap();
        let back = load_weights(&path).unwrap();
        assert_eq!(ws, back);
        for (a, b) in ws.entries[0].data.iter().zip(&back.entries[0].data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_magic_is_distinct_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.rvwt");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(matches!(load_weights(&path).unwrap_err(), Error::BadMagic { .. }));
    }

    #[test]
    fn truncated_file_is_distinct_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.rvwt");
        save_weights(&small_ws(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_weights(&path).unwrap_err(), Error::Truncated { .. }));
    }

    #[test]
    fn unsupported_version_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("v9.rvwt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RVWT");
        bytes.extend_from_slice(&9u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_weights(&path).unwrap_err(),
            Error::UnsupportedVersion { found: 9, .. }
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let e = WeightEntry {
            name: "x".into(),
            shape: vec![1],
            data: vec![0.0],
        };
        assert!(matches!(
            WeightSet::new(vec![e.clone(), e]).unwrap_err(),
            Error::DuplicateEntry(_)
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let arch = reference_arch();
        let text = arch.to_manifest();
        let back = ArchSpec::from_manifest(&text).unwrap();
        assert_eq!(arch, back);
    }

    #[test]
    fn manifest_parse_errors_carry_line_numbers() {
        let err = ArchSpec::from_manifest("arch v1\nbogus line here\n").unwrap_err();
        match err {
            Error::ManifestParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bind_reports_missing_entry_with_layer_name() {
        let arch = reference_arch();
        let mut ws = gen_weights(42);
        ws.entries.retain(|e| e.name != "enc.conv1.weight");
        match bind(&ws, &arch).unwrap_err() {
            Error::MissingEntry { name, layer } => {
                assert_eq!(name, "enc.conv1.weight");
                assert_eq!(layer, "enc.conv1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bind_accepts_reference_shapes() {
        let arch = reference_arch();
        let ws = gen_weights(42);
        assert_eq!(ws.get("enc.conv1.weight").unwrap().shape, vec![32, 4, 3, 3]);
        assert!(bind(&ws, &arch).is_ok());
    }

    #[test]
    fn bind_rejects_transposed_linear_weights() {
        let arch = reference_arch();
        let mut ws = gen_weights(42);
        for e in &mut ws.entries {
            if e.name == "enc.mu.weight" {
                e.shape = vec![1024, 128]; // transposed
            }
        }
        assert!(matches!(
            bind(&ws, &arch).unwrap_err(),
            Error::ShapeMismatch { .. }
        ));
    }
}
