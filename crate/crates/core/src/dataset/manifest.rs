//! Dataset manifest and read access to a generated dataset.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::{Grid, RealImage};
use crate::sensor::SensorConfig;
use crate::slm::SlmCalibration;

use super::prd::{self, Dtype, PrdArray};
use super::synth::ObjectSource;

pub const FORMAT: &str = "lowlight-dataset/1";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const ARRAY_DIR: &str = "arrays";
pub const SPLIT_NAMES: [&str; 3] = ["train", "validation", "test"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSizes {
    pub const PAPER: Self = Self {
        train: 9500,
        validation: 450,
        test: 50,
    };
    pub const DESK: Self = Self {
        train: 500,
        validation: 50,
        test: 20,
    };

    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }

    /// Consecutive id ranges in train, validation, test order.
    pub fn ranges(&self) -> Vec<SplitRange> {
        let mut first = 0u64;
        SPLIT_NAMES
            .iter()
            .zip([self.train, self.validation, self.test])
            .map(|(name, count)| {
                let r = SplitRange {
                    name: (*name).to_owned(),
                    first_id: first,
                    count,
                };
                first += count as u64;
                r
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRange {
    pub name: String,
    pub first_id: u64,
    pub count: usize,
}

impl SplitRange {
    pub fn ids(&self) -> Range<u64> {
        self.first_id..self.first_id + self.count as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Wrapped ground-truth phase, f32 radians.
    Truth,
    /// Detector counts, u16 (f32 intensity for noiseless datasets).
    Raw,
    /// Approximant phase, f32 radians.
    Approximant,
    /// Raw counts cropped and resized to the object size, f32.
    Resampled,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Truth, Role::Raw, Role::Approximant, Role::Resampled];

    pub fn name(self) -> &'static str {
        match self {
            Role::Truth => "truth",
            Role::Raw => "raw",
            Role::Approximant => "approximant",
            Role::Resampled => "resampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayRecord {
    /// Path relative to the dataset directory.
    pub file: String,
    pub split: String,
    pub role: Role,
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    /// Offset of the first data byte.
    pub byte_offset: usize,
    pub sha256: String,
}

/// SLM tables as used for generation, after any smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTables {
    /// Where the tables came from, for the record.
    pub source: String,
    pub smoothing_window: usize,
    pub phase: Vec<f64>,
    pub amplitude: Vec<f64>,
}

impl CalibrationTables {
    pub fn from_calibration(source: &str, cal: &SlmCalibration) -> Self {
        Self {
            source: source.to_owned(),
            smoothing_window: cal.smoothing_window(),
            phase: cal.phase_lut().to_vec(),
            amplitude: cal.amplitude_lut().to_vec(),
        }
    }

    pub fn calibration(&self) -> Result<SlmCalibration> {
        SlmCalibration::from_tables(&self.phase, &self.amplitude, self.smoothing_window)
    }
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub name: String,
    pub seed: u64,
    /// Illumination setting 1..=6; 0 stores the noiseless intensity.
    pub noise_level: u8,
    pub splits: SplitSizes,
    pub objects: ObjectSource,
    pub geometry: Geometry,
    /// Detector settings at this noise level, seed included.
    pub sensor: SensorConfig,
    pub calibration: CalibrationTables,
}

/// Intensity scaling of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    /// Mean model intensity of the bare beam over the detector.
    pub reference_mean: f64,
    /// Mean incident photons per detector pixel of the bare beam.
    pub incident_photons: f64,
    /// Counts removed before taking square roots.
    pub offset: f64,
    /// Expected mean offset-free signal of the bare beam, in stored units.
    /// One fixed scale for the whole dataset.
    pub signal_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub saturated_pixels: u64,
    pub max_saturated_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub recipe: Recipe,
    pub normalization: Normalization,
    pub diagnostics: Diagnostics,
    pub split: Vec<SplitRange>,
    pub array: Vec<ArrayRecord>,
}

impl DatasetManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigInvalid(format!("manifest serialisation: {e}")))
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })?;
        if m.format != FORMAT {
            return Err(Error::Format {
                path: path.to_owned(),
                reason: format!("unsupported format `{}`", m.format),
            });
        }
        Ok(m)
    }
}

/// Converts a stacked `[n, rows, cols]` array into images.
pub fn images_from_prd(array: &PrdArray) -> Result<Vec<RealImage>> {
    let (n, rows, cols) = match array.shape[..] {
        [n, r, c] => (n, r, c),
        [r, c] => (1, r, c),
        _ => {
            return Err(Error::GeometryMismatch(format!(
                "expected a stack of images, got shape {:?}",
                array.shape
            )))
        }
    };
    let values = array.data.to_f64();
    (0..n)
        .map(|i| Grid::from_vec(rows, cols, values[i * rows * cols..(i + 1) * rows * cols].to_vec()))
        .collect()
}

/// A generated dataset on disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    manifest: DatasetManifest,
}

impl Dataset {
    /// Loads the manifest; arrays are read on demand.
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            root: root.to_owned(),
            manifest: DatasetManifest::from_toml(&text, &path)?,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    /// Checks that every listed array exists with its recorded checksum.
    pub fn verify(&self) -> Result<()> {
        for rec in &self.manifest.array {
            let path = self.root.join(&rec.file);
            let actual = prd::file_checksum(&path)?;
            if actual != rec.sha256 {
                return Err(Error::Checksum {
                    path,
                    expected: rec.sha256.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }

    /// A split with at least one example.
    pub fn split(&self, name: &str) -> Result<&SplitRange> {
        self.manifest
            .split
            .iter()
            .find(|s| s.name == name && s.count > 0)
            .ok_or_else(|| Error::SplitMissing(name.to_owned()))
    }

    pub fn record(&self, split: &str, role: Role) -> Result<&ArrayRecord> {
        self.split(split)?;
        self.manifest
            .array
            .iter()
            .find(|a| a.split == split && a.role == role)
            .ok_or_else(|| Error::SplitMissing(format!("{split}/{}", role.name())))
    }

    pub fn array_path(&self, split: &str, role: Role) -> Result<PathBuf> {
        Ok(self.root.join(&self.record(split, role)?.file))
    }

    pub fn read(&self, split: &str, role: Role) -> Result<Vec<RealImage>> {
        images_from_prd(&prd::read_prd(&self.array_path(split, role)?)?)
    }

    pub fn read_item(&self, split: &str, role: Role, index: usize) -> Result<RealImage> {
        let item = prd::read_prd_item(&self.array_path(split, role)?, index)?;
        images_from_prd(&item).map(|mut v| v.remove(0))
    }
}
