//! Run configuration: one TOML document drives dataset generation,
//! reconstruction and sweeps.
//!
//! ```toml
//! [dataset]
//! name = "ic"
//! noise_levels = [3, 5]      # one dataset per level; 0 is noiseless
//! seed = 7
//! preset = "desk"            # desk (500/50/20) or paper (9500/450/50)
//! objects = { class = "ic-layout" }
//!
//! [geometry]
//! preset = "paper"           # or "compact"; other keys override fields
//!
//! [sensor]
//! offset = 100.0
//!
//! [calibration]
//! kind = "synthetic"
//!
//! [retrieval]
//! max_iter = 100
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::manifest::{CalibrationTables, Recipe, SplitSizes};
use crate::dataset::synth::{ObjectSource, CLASS_NAMES};
use crate::dataset::DOMAIN_SENSOR;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::retrieval::GsOptions;
use crate::rng::derive_seed;
use crate::sensor::{NoiseLevel, SensorConfig};
use crate::slm::{SlmCalibration, DEFAULT_SMOOTHING_WINDOW};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPreset {
    Paper,
    #[default]
    Desk,
}

impl SplitPreset {
    pub fn sizes(self) -> SplitSizes {
        match self {
            SplitPreset::Paper => SplitSizes::PAPER,
            SplitPreset::Desk => SplitSizes::DESK,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("dataset")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(default)]
    pub objects: ObjectSource,
    pub noise_levels: Vec<u8>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub preset: SplitPreset,
    /// Overrides the preset.
    #[serde(default)]
    pub splits: Option<SplitSizes>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl DatasetConfig {
    pub fn split_sizes(&self) -> SplitSizes {
        self.splits.unwrap_or_else(|| self.preset.sizes())
    }

    /// Directory name of the dataset for one noise level.
    pub fn dataset_name(&self, level: u8) -> String {
        if self.noise_levels.len() == 1 {
            self.name.clone()
        } else {
            format!("{}-level{level}", self.name)
        }
    }
}

fn default_window() -> usize {
    DEFAULT_SMOOTHING_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CalibrationSpec {
    Synthetic {
        #[serde(default)]
        ripple_depth: f64,
    },
    /// A `gray phase amplitude` table file.
    Measured {
        path: PathBuf,
        #[serde(default = "default_window")]
        smoothing_window: usize,
    },
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec::Synthetic { ripple_depth: 0.0 }
    }
}

impl CalibrationSpec {
    pub fn load(&self) -> Result<SlmCalibration> {
        match self {
            CalibrationSpec::Synthetic { ripple_depth } => {
                if !(0.0..=1.0).contains(ripple_depth) {
                    return Err(Error::ConfigInvalid(format!(
                        "calibration.ripple_depth must lie in [0, 1], got {ripple_depth}"
                    )));
                }
                Ok(SlmCalibration::synthetic_with_ripple(*ripple_depth))
            }
            CalibrationSpec::Measured { path, smoothing_window } => SlmCalibration::load(path, *smoothing_window),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CalibrationSpec::Synthetic { ripple_depth } if *ripple_depth == 0.0 => "synthetic".into(),
            CalibrationSpec::Synthetic { ripple_depth } => format!("synthetic, ripple depth {ripple_depth}"),
            CalibrationSpec::Measured { path, .. } => path.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub geometry: Geometry,
    pub sensor: SensorConfig,
    pub calibration: CalibrationSpec,
    pub retrieval: GsOptions,
}

/// Document shape; geometry and sensor are merged onto defaults by hand.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: DatasetConfig,
    #[serde(default)]
    geometry: toml::Table,
    #[serde(default)]
    sensor: toml::Table,
    #[serde(default)]
    calibration: CalibrationSpec,
    #[serde(default)]
    retrieval: GsOptions,
}

fn invalid(context: &str, e: impl std::fmt::Display) -> Error {
    Error::ConfigInvalid(format!("{context}: {e}"))
}

fn merge<T: Serialize + for<'de> Deserialize<'de>>(base: &T, overrides: toml::Table, section: &str) -> Result<T> {
    let mut table = toml::Table::try_from(base).map_err(|e| invalid(section, e))?;
    table.extend(overrides);
    T::deserialize(table).map_err(|e| invalid(section, e))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::ConfigInvalid(msg) => Error::ConfigInvalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses a config document; relative paths are joined to `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let doc: toml::Table = text.parse().map_err(|e| invalid("TOML", e))?;
        if let Some(class) = doc
            .get("dataset")
            .and_then(|d| d.get("objects"))
            .and_then(|o| o.get("class"))
            .and_then(|c| c.as_str())
        {
            if !CLASS_NAMES.contains(&class) {
                return Err(Error::UnknownClass(class.to_owned()));
            }
        }
        let raw: RawConfig = toml::from_str(text).map_err(|e| invalid("config", e))?;

        let mut geometry_table = raw.geometry;
        let preset = match geometry_table.remove("preset") {
            None => "paper".to_owned(),
            Some(toml::Value::String(s)) => s,
            Some(v) => return Err(invalid("geometry.preset", format!("expected a string, got {v}"))),
        };
        let geometry_base = match preset.as_str() {
            "paper" => Geometry::paper(),
            "compact" => Geometry::compact(),
            other => return Err(invalid("geometry.preset", format!("unknown preset `{other}`"))),
        };
        let geometry = merge(&geometry_base, geometry_table, "geometry")?;

        if raw.sensor.contains_key("seed") {
            return Err(invalid("sensor.seed", "noise seeds derive from dataset.seed"));
        }
        let sensor = merge(&SensorConfig::default(), raw.sensor, "sensor")?;

        let mut dataset = raw.dataset;
        dataset.output_dir = base_dir.join(&dataset.output_dir);
        if let ObjectSource::Custom { image_dir } = &mut dataset.objects {
            *image_dir = base_dir.join(&*image_dir);
        }
        let mut calibration = raw.calibration;
        if let CalibrationSpec::Measured { path, .. } = &mut calibration {
            *path = base_dir.join(&*path);
        }

        let cfg = Self {
            dataset,
            geometry,
            sensor,
            calibration,
            retrieval: raw.retrieval,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.name.is_empty() || d.name.contains(['/', '\\']) || d.name.starts_with('.') {
            return Err(invalid("dataset.name", format!("`{}` is not a plain directory name", d.name)));
        }
        if d.noise_levels.is_empty() {
            return Err(invalid("dataset.noise_levels", "at least one level is required"));
        }
        let mut seen = BTreeSet::new();
        for &level in &d.noise_levels {
            if level != 0 {
                NoiseLevel::get(level).map_err(|_| invalid("dataset.noise_levels", format!("{level} is not in 0..=6")))?;
            }
            if !seen.insert(level) {
                return Err(invalid("dataset.noise_levels", format!("{level} is listed twice")));
            }
        }
        if d.split_sizes().total() == 0 {
            return Err(invalid("dataset.splits", "no examples requested"));
        }
        if self.retrieval.max_iter == 0 || !(self.retrieval.tol >= 0.0) {
            return Err(invalid("retrieval", "max_iter must be >= 1 and tol >= 0"));
        }
        self.geometry.validate()?;
        self.sensor.validate()?;
        Ok(())
    }

    /// One generation recipe per noise level.
    pub fn recipes(&self) -> Result<Vec<Recipe>> {
        let cal = self.calibration.load()?;
        let tables = CalibrationTables::from_calibration(&self.calibration.describe(), &cal);
        self.dataset
            .noise_levels
            .iter()
            .map(|&level| {
                let seeded = SensorConfig {
                    seed: derive_seed(self.dataset.seed, DOMAIN_SENSOR, level as u64),
                    ..self.sensor.clone()
                };
                let sensor = if level == 0 {
                    seeded
                } else {
                    NoiseLevel::get(level)?.sensor(&seeded)
                };
                Ok(Recipe {
                    name: self.dataset.dataset_name(level),
                    seed: self.dataset.seed,
                    noise_level: level,
                    splits: self.dataset.split_sizes(),
                    objects: self.dataset.objects.clone(),
                    geometry: self.geometry.clone(),
                    sensor,
                    calibration: tables.clone(),
                })
            })
            .collect()
    }
}
