//! Synthetic 8-bit phase objects.
//!
//! `ic-layout` draws Manhattan geometry (track arrays and rectangles) in a
//! handful of quantized gray levels; `natural` draws smoothed Gaussian
//! random fields with a broad histogram; `custom` reads 8-bit images from a
//! directory. Every image depends only on `(seed, index)`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::derive_seed;

use super::DOMAIN_OBJECT;

pub const CLASS_NAMES: [&str; 3] = ["ic-layout", "natural", "custom"];

fn default_levels() -> u8 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectSource {
    IcLayout {
        /// Number of quantized gray levels, background included.
        #[serde(default = "default_levels")]
        levels: u8,
    },
    Natural,
    Custom {
        /// Directory of square 8-bit grayscale images (PNG or PNM), used
        /// in file-name order.
        image_dir: PathBuf,
    },
}

impl Default for ObjectSource {
    fn default() -> Self {
        ObjectSource::IcLayout { levels: default_levels() }
    }
}

impl ObjectSource {
    /// Source with default parameters for a class name.
    pub fn from_class(name: &str) -> Result<Self> {
        match name {
            "ic-layout" => Ok(Self::default()),
            "natural" => Ok(Self::Natural),
            "custom" => Err(Error::ConfigInvalid("class `custom` needs an image_dir".into())),
            other => Err(Error::UnknownClass(other.to_owned())),
        }
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            ObjectSource::IcLayout { .. } => "ic-layout",
            ObjectSource::Natural => "natural",
            ObjectSource::Custom { .. } => "custom",
        }
    }
}

/// Produces the object image of any example index.
#[derive(Debug, Clone)]
pub struct ObjectGenerator {
    source: ObjectSource,
    size: usize,
    seed: u64,
    files: Vec<PathBuf>,
}

impl ObjectGenerator {
    pub fn new(source: &ObjectSource, size: usize, seed: u64) -> Result<Self> {
        if size < 8 {
            return Err(Error::ConfigInvalid(format!("object size must be >= 8, got {size}")));
        }
        let files = match source {
            ObjectSource::IcLayout { levels } if !(2..=8).contains(levels) => {
                return Err(Error::ConfigInvalid(format!("ic-layout levels must be 2..=8, got {levels}")));
            }
            ObjectSource::Custom { image_dir } => list_images(image_dir)?,
            _ => Vec::new(),
        };
        Ok(Self {
            source: source.clone(),
            size,
            seed,
            files,
        })
    }

    /// Number of distinct images, when the source is finite.
    pub fn available(&self) -> Option<usize> {
        match self.source {
            ObjectSource::Custom { .. } => Some(self.files.len()),
            _ => None,
        }
    }

    pub fn generate(&self, index: u64) -> Result<Grid<u8>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, DOMAIN_OBJECT, index));
        match &self.source {
            ObjectSource::IcLayout { levels } => Ok(ic_layout(self.size, *levels, &mut rng)),
            ObjectSource::Natural => Ok(natural(self.size, &mut rng)),
            ObjectSource::Custom { image_dir } => {
                let path = self.files.get(index as usize).ok_or_else(|| {
                    Error::ConfigInvalid(format!(
                        "{} holds {} images, example {index} requested",
                        image_dir.display(),
                        self.files.len()
                    ))
                })?;
                load_gray(path, self.size)
            }
        }
    }
}

/// The first `count` objects of a source.
pub fn synth_objects(
    source: &ObjectSource,
    count: usize,
    seed: u64,
    size: usize,
) -> Result<impl Iterator<Item = Result<Grid<u8>>>> {
    if count == 0 {
        return Err(Error::ConfigInvalid("object count must be >= 1".into()));
    }
    let generator = ObjectGenerator::new(source, size, seed)?;
    Ok((0..count as u64).map(move |i| generator.generate(i)))
}

fn ic_layout(size: usize, levels: u8, rng: &mut ChaCha8Rng) -> Grid<u8> {
    // levels stay below 256 so that no two wrap onto the same phase
    let step = 256 / levels as usize;
    let level = |rng: &mut ChaCha8Rng| (rng.random_range(1..levels as usize) * step) as u8;
    let mut img = Grid::filled(size, size, 0u8);
    let span = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| rng.random_range(lo..=hi.max(lo));

    for _ in 0..rng.random_range(1..=3) {
        let v = level(rng);
        let (h, w) = (span(rng, size / 4, size * 2 / 3), span(rng, size / 4, size * 2 / 3));
        let (r0, c0) = (rng.random_range(0..=size - h), rng.random_range(0..=size - w));
        let pitch = span(rng, 3, (size / 10).max(4));
        let width = rng.random_range(1..pitch);
        let horizontal = rng.random_bool(0.5);
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                let t = if horizontal { r - r0 } else { c - c0 };
                if t % pitch < width {
                    img[(r, c)] = v;
                }
            }
        }
    }
    for _ in 0..rng.random_range(2..=8) {
        let v = level(rng);
        let (h, w) = (span(rng, size / 16, size / 3), span(rng, size / 16, size / 3));
        let (h, w) = (h.max(1), w.max(1));
        let (r0, c0) = (rng.random_range(0..=size - h), rng.random_range(0..=size - w));
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                img[(r, c)] = v;
            }
        }
    }
    img
}

fn natural(size: usize, rng: &mut ChaCha8Rng) -> Grid<u8> {
    let noise: Vec<f64> = (0..size * size).map(|_| rng.sample(StandardNormal)).collect();
    let fine = blur_periodic(&noise, size, size as f64 / 24.0);
    let coarse = blur_periodic(&noise, size, size as f64 / 8.0);
    let norm = |v: &[f64]| {
        let s = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        v.iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (fine, coarse) = (norm(&fine), norm(&coarse));
    let field: Vec<f64> = fine.iter().zip(&coarse).map(|(a, b)| 0.5 * a + b).collect();
    let lo = field.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { 250.0 / (hi - lo) } else { 0.0 };
    Grid::from_vec(size, size, field.iter().map(|v| ((v - lo) * scale).round() as u8).collect())
        .expect("size x size values")
}

/// Separable Gaussian blur with periodic boundaries.
fn blur_periodic(src: &[f64], n: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let wrap = |i: isize| i.rem_euclid(n as isize) as usize;
    let mut tmp = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            tmp[r * n + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * src[r * n + wrap(c as isize + k as isize - radius)])
                .sum::<f64>()
                / ksum;
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[wrap(r as isize + k as isize - radius) * n + c])
                .sum::<f64>()
                / ksum;
        }
    }
    out
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "pgm" | "pnm" | "ppm")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::ConfigInvalid(format!("no PNG/PNM images in {}", dir.display())));
    }
    Ok(files)
}

fn load_gray(path: &Path, size: usize) -> Result<Grid<u8>> {
    let img = image::open(path)
        .map_err(|e| Error::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })?
        .into_luma8();
    let (w, h) = img.dimensions();
    if (w as usize, h as usize) != (size, size) {
        return Err(Error::GeometryMismatch(format!(
            "{} is {w}x{h}, objects are {size}x{size}",
            path.display()
        )));
    }
    Grid::from_vec(size, size, img.into_raw())
}
