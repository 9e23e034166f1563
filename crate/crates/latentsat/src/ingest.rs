//! Scene loading, radiometric normalization, and tiling.
//!
//! `.rvsc` layout, little-endian: magic "RVSC", u32 version, u32 C,
//! u32 H, u32 W, f32 gsd_m, u32 acquisition_index, then C·H·W f32
//! planar (band-major). Normalization divides by 10000 (the usual
//! Sentinel-2 L1C reflectance convention; configurable via
//! [`normalize_with`]) and clamps to [0,1]. Tiling cuts non-overlapping
//! 32x32 patches in row-major order; trailing partial rows/columns are
//! dropped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SCENE_MAGIC: [u8; 4] = *b"RVSC";
pub const SCENE_FORMAT_VERSION: u32 = 1;
pub const TILE_SIZE: usize = 32;
pub const DEFAULT_NORM_DIVISOR: f32 = 10000.0;

/// One multispectral acquisition raster, band-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub gsd_m: f32,
    pub acquisition_index: u32,
    pub data: Vec<f32>,
}

impl Scene {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        gsd_m: f32,
        acquisition_index: u32,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("scene needs at least 1 band".into()));
        }
        if height < TILE_SIZE || width < TILE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "scene {height}x{width} smaller than tile size {TILE_SIZE}"
            )));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                context: "Scene payload".into(),
                expected: format!("{expected} values"),
                actual: format!("{}", data.len()),
            });
        }
        let plane = height * width;
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("scene band {}", i / plane),
                    offset: i % plane,
                });
            }
            if !(0.0..=1e6).contains(&v) {
                return Err(Error::OutOfRange {
                    context: format!("scene band {}", i / plane),
                    offset: i % plane,
                    value: v,
                });
            }
        }
        Ok(Self {
            channels,
            height,
            width,
            gsd_m,
            acquisition_index,
            data,
        })
    }
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(28 + scene.data.len() * 4);
    buf.extend_from_slice(&SCENE_MAGIC);
    buf.extend_from_slice(&SCENE_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(scene.channels as u32).to_le_bytes());
    buf.extend_from_slice(&(scene.height as u32).to_le_bytes());
    buf.extend_from_slice(&(scene.width as u32).to_le_bytes());
    buf.extend_from_slice(&scene.gsd_m.to_le_bytes());
    buf.extend_from_slice(&scene.acquisition_index.to_le_bytes());
    for &v in &scene.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    load_scene_from_bytes(&bytes, path)
}

/// Parses a scene file image. Never panics on malformed input.
pub fn load_scene_from_bytes(bytes: &[u8], path: &Path) -> Result<Scene> {
    let trunc = |context: &str| Error::Truncated {
        path: path.to_path_buf(),
        context: context.into(),
    };
    if bytes.len() < 4 {
        return Err(trunc("magic"));
    }
    if bytes[..4] != SCENE_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: SCENE_MAGIC,
        });
    }
    if bytes.len() < 28 {
        return Err(trunc("header"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != SCENE_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
            supported: SCENE_FORMAT_VERSION,
        });
    }
    let channels = u32_at(8) as usize;
    let height = u32_at(12) as usize;
    let width = u32_at(16) as usize;
    let gsd_m = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let acquisition_index = u32_at(24);

    let numel = channels
        .checked_mul(height)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| Error::InvalidArgument("scene dimensions overflow".into()))?;
    let payload = &bytes[28..];
    if payload.len() < numel * 4 {
        return Err(trunc("pixel payload"));
    }
    let data: Vec<f32> = payload[..numel * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Scene::new(channels, height, width, gsd_m, acquisition_index, data)
}

/// v ↦ clamp(v / divisor, 0, 1), elementwise. A scene whose values all
/// sit in [0,1] already is considered normalized and is only clamped,
/// which makes the operation idempotent.
pub fn normalize_with(scene: &Scene, divisor: f32) -> Scene {
    let already = scene.data.iter().all(|&v| v <= 1.0);
    let d = if already { 1.0 } else { divisor };
    let data = scene
        .data
        .iter()
        .map(|&v| (v / d).clamp(0.0, 1.0))
        .collect();
    Scene {
        data,
        ..scene.clone()
    }
}

/// Standard L1C scaling: divide by 10000, clamp to [0,1].
pub fn normalize(scene: &Scene) -> Scene {
    normalize_with(scene, DEFAULT_NORM_DIVISOR)
}

/// A 32x32xC patch in [0,1], band-major, tagged with its grid position.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTile {
    pub channels: usize,
    pub row: usize,
    pub col: usize,
    pub data: Vec<f32>,
}

impl NormalizedTile {
    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::new(
            vec![self.channels, TILE_SIZE, TILE_SIZE],
            self.data.clone(),
        )
    }
}

/// Row-major grid of normalized tiles cut from one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    pub rows: usize,
    pub cols: usize,
    pub tiles: Vec<NormalizedTile>,
}

/// Cuts a normalized scene into non-overlapping 32x32 tiles, row-major.
/// Partial edge tiles are dropped.
pub fn tile_scene(scene: &Scene) -> Result<TileGrid> {
    if scene.height < TILE_SIZE || scene.width < TILE_SIZE {
        return Err(Error::InvalidArgument(format!(
            "scene {}x{} smaller than tile size {TILE_SIZE}",
            scene.height, scene.width
        )));
    }
    let rows = scene.height / TILE_SIZE;
    let cols = scene.width / TILE_SIZE;
    let (c, h, w) = (scene.channels, scene.height, scene.width);
    let mut tiles = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for col in 0..cols {
            let mut data = Vec::with_capacity(c * TILE_SIZE * TILE_SIZE);
            for band in 0..c {
                for y in 0..TILE_SIZE {
                    let src = (band * h + r * TILE_SIZE + y) * w + col * TILE_SIZE;
                    data.extend_from_slice(&scene.data[src..src + TILE_SIZE]);
                }
            }
            tiles.push(NormalizedTile {
                channels: c,
                row: r,
                col,
                data,
            });
        }
    }
    Ok(TileGrid { rows, cols, tiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use tempfile::tempdir;

    fn random_scene(seed: u64, c: usize, h: usize, w: usize) -> Scene {
        let mut rng = SeededRng::new(seed);
        let data = (0..c * h * w)
            .map(|_| (rng.uniform_f64() * 10000.0) as f32)
            .collect();
        Scene::new(c, h, w, 10.0, 0, data).unwrap()
    }

    #[test]
    fn scene_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.rvsc");
        let scene = random_scene(1, 4, 64, 96);
        save_scene(&scene, &path).unwrap();
        let back = load_scene(&path).unwrap();
        assert_eq!(scene, back);
    }

    #[test]
    fn minimal_32x32_scene_is_valid() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.rvsc");
        let scene = random_scene(2, 4, 32, 32);
        save_scene(&scene, &path).unwrap();
        assert_eq!(load_scene(&path).unwrap().height, 32);
    }

    #[test]
    fn scene_480_loads_with_expected_dims() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("big.rvsc");
        save_scene(&random_scene(3, 4, 480, 480), &path).unwrap();
        let s = load_scene(&path).unwrap();
        assert_eq!((s.channels, s.height, s.width), (4, 480, 480));
    }

    #[test]
    fn nan_pixel_rejected_with_band_and_offset() {
        let mut data = vec![1.0f32; 4 * 32 * 32];
        data[32 * 32 + 5] = f32::NAN; // band 1, offset 5
        match Scene::new(4, 32, 32, 10.0, 0, data).unwrap_err() {
            Error::NonFinite { context, offset } => {
                assert!(context.contains("band 1"));
                assert_eq!(offset, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_pixel_rejected() {
        let mut data = vec![1.0f32; 32 * 32];
        data[0] = -3.0;
        assert!(matches!(
            Scene::new(1, 32, 32, 10.0, 0, data).unwrap_err(),
            Error::OutOfRange { .. }
        ));
    }

    #[test]
    fn payload_shorter_than_header_dims_is_truncated() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.rvsc");
        save_scene(&random_scene(4, 4, 32, 32), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            load_scene(&path).unwrap_err(),
            Error::Truncated { .. }
        ));
    }

    #[test]
    fn normalize_clamps_and_scales() {
        let mut data = vec![0.0f32; 32 * 32];
        data[0] = 0.0;
        data[1] = 10000.0;
        data[2] = 25000.0;
        let scene = Scene::new(1, 32, 32, 10.0, 0, data).unwrap();
        let n = normalize(&scene);
        assert_eq!(n.data[0], 0.0);
        assert_eq!(n.data[1], 1.0);
        assert_eq!(n.data[2], 1.0);
    }

    #[test]
    fn normalize_is_idempotent() {
        let scene = random_scene(5, 2, 32, 32);
        let once = normalize(&scene);
        let twice = normalize(&once);
        assert_eq!(once.data, twice.data);
    }

    #[test]
    fn tiling_counts() {
        let s480 = normalize(&random_scene(6, 4, 480, 480));
        let g = tile_scene(&s480).unwrap();
        assert_eq!((g.rows, g.cols, g.tiles.len()), (15, 15, 225));

        let s32 = normalize(&random_scene(7, 4, 32, 32));
        assert_eq!(tile_scene(&s32).unwrap().tiles.len(), 1);

        let s70 = normalize(&random_scene(8, 4, 70, 70));
        let g70 = tile_scene(&s70).unwrap();
        assert_eq!((g70.rows, g70.cols, g70.tiles.len()), (2, 2, 4));
    }

    #[test]
    fn reassembled_tiles_reproduce_covered_region() {
        let scene = normalize(&random_scene(9, 3, 70, 96));
        let grid = tile_scene(&scene).unwrap();
        for tile in &grid.tiles {
            for band in 0..3 {
                for y in 0..TILE_SIZE {
                    for x in 0..TILE_SIZE {
                        let sv = scene.data[(band * 70 + tile.row * TILE_SIZE + y) * 96
                            + tile.col * TILE_SIZE
                            + x];
                        let tv = tile.data[(band * TILE_SIZE + y) * TILE_SIZE + x];
                        assert_eq!(sv.to_bits(), tv.to_bits());
                    }
                }
            }
        }
    }
}
