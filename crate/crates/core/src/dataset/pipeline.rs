//! Example generation: object image -> ground truth, detector counts and
//! approximant, and whole datasets written through a single writer.

use std::path::Path;

use rayon::prelude::*;

use crate::beam::{incident_field, Coverage};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::{wrap_phase, ComplexField, Grid, IntensityImage, PhaseImage, RealImage};
use crate::propagation::{propagate, PropagationPlan};
use crate::retrieval::{Approximant, Retriever};
use crate::sensor::{detect_frame, scale_to_photons, NoiseLevel, SensorConfig};
use crate::slm::{object_field_with_incident, SlmCalibration};

use super::manifest::{
    ArrayRecord, Dataset, DatasetManifest, Diagnostics, Normalization, Recipe, Role, SplitRange, ARRAY_DIR, FORMAT,
    MANIFEST_FILE,
};
use super::prd::{header_len, Dtype, PrdWriter};
use super::resample::resample_for_end_to_end;
use super::synth::ObjectGenerator;

/// Mean photons per pixel of the bare beam in noiseless datasets.
pub const NOISELESS_PHOTONS: f64 = 1050.0;

/// Object image to ideal detector intensity.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    geometry: Geometry,
    calibration: SlmCalibration,
    incident: ComplexField,
    plan: PropagationPlan,
    reference_mean: f64,
}

impl ForwardModel {
    pub fn new(geometry: &Geometry, calibration: &SlmCalibration) -> Result<Self> {
        geometry.validate()?;
        let plan = geometry.forward_plan()?;
        let incident = incident_field(
            &geometry.beam,
            (plan.padded_size, plan.padded_size),
            geometry.detector_pitch,
            geometry.wavelength,
            Coverage::FullAperture,
        )?;
        let mut model = Self {
            geometry: geometry.clone(),
            calibration: calibration.clone(),
            incident,
            plan,
            reference_mean: 1.0,
        };
        let blank = Grid::filled(geometry.object_pixels, geometry.object_pixels, 0u8);
        model.reference_mean = model.ideal_intensity(&blank)?.mean();
        if !(model.reference_mean > 0.0) {
            return Err(Error::GeometryMismatch("the beam does not reach the detector".into()));
        }
        Ok(model)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn calibration(&self) -> &SlmCalibration {
        &self.calibration
    }

    /// Mean detector intensity of the bare beam (all-zero object).
    pub fn reference_mean(&self) -> f64 {
        self.reference_mean
    }

    /// `|F_L[u_inc t e^{if}]|^2` over the detector, in model units.
    pub fn ideal_intensity(&self, gray: &Grid<u8>) -> Result<IntensityImage> {
        let field = object_field_with_incident(gray, &self.calibration, &self.incident, &self.geometry)?;
        let out = propagate(&field, &self.plan)?;
        let out = out.crop_center(self.geometry.detector_rows, self.geometry.detector_cols)?;
        Ok(out.intensity())
    }
}

/// How ideal intensities become stored measurements.
#[derive(Debug, Clone, PartialEq)]
pub enum Exposure {
    Noiseless { photons: f64 },
    Detected { sensor: SensorConfig, photons: f64 },
}

impl Exposure {
    /// Exposure of a noise level; `sensor` supplies everything the level
    /// does not set.
    pub fn for_level(level: u8, sensor: &SensorConfig) -> Result<Self> {
        if level == 0 {
            return Ok(Exposure::Noiseless {
                photons: NOISELESS_PHOTONS,
            });
        }
        let l = NoiseLevel::get(level)?;
        let sensor = l.sensor(sensor);
        sensor.validate()?;
        Ok(Exposure::Detected {
            photons: l.incident_photons(sensor.quantum_efficiency),
            sensor,
        })
    }

    pub fn photons(&self) -> f64 {
        match self {
            Exposure::Noiseless { photons } | Exposure::Detected { photons, .. } => *photons,
        }
    }

    pub fn offset(&self) -> f64 {
        match self {
            Exposure::Noiseless { .. } => 0.0,
            Exposure::Detected { sensor, .. } => sensor.offset,
        }
    }

    /// Mean offset-free signal of the bare beam in stored units.
    pub fn signal_scale(&self) -> f64 {
        match self {
            Exposure::Noiseless { photons } => *photons,
            Exposure::Detected { sensor, photons } => {
                photons * sensor.quantum_efficiency * sensor.preamp_gain * sensor.em_gain
            }
        }
    }

    pub fn raw_dtype(&self) -> Dtype {
        match self {
            Exposure::Noiseless { .. } => Dtype::F32,
            Exposure::Detected { .. } => Dtype::U16,
        }
    }
}

/// Shared, read-only state for generating examples of one dataset.
#[derive(Debug, Clone)]
pub struct ExampleContext {
    pub model: ForwardModel,
    pub retriever: Retriever,
    pub exposure: Exposure,
}

impl ExampleContext {
    pub fn new(geometry: &Geometry, calibration: &SlmCalibration, exposure: Exposure) -> Result<Self> {
        Ok(Self {
            model: ForwardModel::new(geometry, calibration)?,
            retriever: Retriever::new(geometry)?,
            exposure,
        })
    }

    pub fn from_recipe(recipe: &Recipe) -> Result<Self> {
        let cal = recipe.calibration.calibration()?;
        let exposure = Exposure::for_level(recipe.noise_level, &recipe.sensor)?;
        Self::new(&recipe.geometry, &cal, exposure)
    }

    /// Stored measurement of `gray` for example `index`, with the number of
    /// saturated pixels.
    pub fn measure(&self, gray: &Grid<u8>, index: u64) -> Result<(IntensityImage, usize)> {
        let ideal = self.model.ideal_intensity(gray)?;
        let photons = scale_to_photons(&ideal, self.model.reference_mean(), self.exposure.photons());
        match &self.exposure {
            Exposure::Noiseless { .. } => Ok((photons, 0)),
            Exposure::Detected { sensor, .. } => {
                let frame = u32::try_from(index)
                    .map_err(|_| Error::ConfigInvalid(format!("example index {index} exceeds u32")))?;
                let d = detect_frame(&photons, sensor, frame)?;
                Ok((d.counts, d.saturated_pixels))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub truth: PhaseImage,
    pub raw: IntensityImage,
    pub approximant: Approximant,
    /// Raw measurement resized for the end-to-end network.
    pub resampled: RealImage,
    pub saturated_pixels: usize,
}

/// Ground truth, measurement and approximant of one object image.
pub fn generate_example(gray: &Grid<u8>, ctx: &ExampleContext, index: u64) -> Result<Example> {
    let lut = ctx.model.calibration().phase_lut();
    let truth = gray.map(|&v| wrap_phase(lut[v as usize]));
    let (raw, saturated_pixels) = ctx.measure(gray, index)?;
    let approximant = ctx.retriever.approximant(&raw, ctx.exposure.offset())?;
    let resampled = resample_for_end_to_end(&raw, ctx.model.geometry().object_pixels)?;
    Ok(Example {
        truth,
        raw,
        approximant,
        resampled,
        saturated_pixels,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GenerateOptions {
    /// Worker threads; all available cores when unset.
    pub threads: Option<usize>,
    /// Replace an existing dataset directory.
    pub force: bool,
}

fn to_f32(img: &RealImage) -> Vec<f32> {
    img.iter().map(|&v| v as f32).collect()
}

struct SplitWriters {
    writers: Vec<(Role, String, Vec<usize>, Dtype, PrdWriter)>,
}

impl SplitWriters {
    fn create(dir: &Path, split: &SplitRange, geometry: &Geometry, raw: Dtype) -> Result<Self> {
        let p = geometry.object_pixels;
        let mut writers = Vec::new();
        for role in Role::ALL {
            let (shape, dtype) = match role {
                Role::Raw => (vec![split.count, geometry.detector_rows, geometry.detector_cols], raw),
                _ => (vec![split.count, p, p], Dtype::F32),
            };
            let file = format!("{ARRAY_DIR}/{}_{}.prd", split.name, role.name());
            let w = PrdWriter::create(&dir.join(&file), &shape, dtype)?;
            writers.push((role, file, shape, dtype, w));
        }
        Ok(Self { writers })
    }

    fn write(&mut self, ex: &Example) -> Result<()> {
        for (role, _, _, dtype, w) in &mut self.writers {
            match role {
                Role::Truth => w.write_f32(&to_f32(&ex.truth))?,
                Role::Approximant => w.write_f32(&to_f32(&ex.approximant.phase))?,
                Role::Resampled => w.write_f32(&to_f32(&ex.resampled))?,
                Role::Raw if *dtype == Dtype::U16 => {
                    // counts are integers already clipped to the bit depth
                    let v: Vec<u16> = ex.raw.iter().map(|&c| c as u16).collect();
                    w.write_u16(&v)?
                }
                Role::Raw => w.write_f32(&to_f32(&ex.raw))?,
            }
        }
        Ok(())
    }

    fn finish(self, split: &str) -> Result<Vec<ArrayRecord>> {
        self.writers
            .into_iter()
            .map(|(role, file, shape, dtype, w)| {
                let byte_offset = header_len(shape.len());
                Ok(ArrayRecord {
                    sha256: w.finish()?,
                    file,
                    split: split.to_owned(),
                    role,
                    shape,
                    dtype,
                    byte_offset,
                })
            })
            .collect()
    }
}

/// Generates `recipe` into `out_root/<name>`. Examples are computed in
/// parallel and written in id order by this thread, so the files do not
/// depend on the thread count.
pub fn generate_dataset(recipe: &Recipe, out_root: &Path, opts: &GenerateOptions) -> Result<Dataset> {
    let dir = out_root.join(&recipe.name);
    if dir.exists() {
        if !opts.force {
            return Err(Error::AlreadyExists(dir));
        }
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let ctx = ExampleContext::from_recipe(recipe)?;
    let objects = ObjectGenerator::new(&recipe.objects, recipe.geometry.object_pixels, recipe.seed)?;
    if let Some(n) = objects.available() {
        if n < recipe.splits.total() {
            return Err(Error::ConfigInvalid(format!(
                "{} examples requested, the image directory holds {n}",
                recipe.splits.total()
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))?;
    let batch = pool.current_num_threads().max(1);

    let arrays_dir = dir.join(ARRAY_DIR);
    std::fs::create_dir_all(&arrays_dir).map_err(|e| Error::io(&arrays_dir, e))?;
    let splits = recipe.splits.ranges();
    let mut records = Vec::new();
    let mut saturated_pixels = 0u64;
    let mut max_saturated_fraction = 0.0f64;
    let detector_pixels = (recipe.geometry.detector_rows * recipe.geometry.detector_cols) as f64;

    for split in splits.iter().filter(|s| s.count > 0) {
        let mut writers = SplitWriters::create(&dir, split, &recipe.geometry, ctx.exposure.raw_dtype())?;
        let ids: Vec<u64> = split.ids().collect();
        for chunk in ids.chunks(batch) {
            let examples: Vec<Result<Example>> = pool.install(|| {
                chunk
                    .par_iter()
                    .map(|&id| generate_example(&objects.generate(id)?, &ctx, id))
                    .collect()
            });
            for ex in examples {
                let ex = ex?;
                saturated_pixels += ex.saturated_pixels as u64;
                max_saturated_fraction = max_saturated_fraction.max(ex.saturated_pixels as f64 / detector_pixels);
                writers.write(&ex)?;
            }
        }
        records.extend(writers.finish(&split.name)?);
    }

    let manifest = DatasetManifest {
        format: FORMAT.to_owned(),
        recipe: recipe.clone(),
        normalization: Normalization {
            reference_mean: ctx.model.reference_mean(),
            incident_photons: ctx.exposure.photons(),
            offset: ctx.exposure.offset(),
            signal_scale: ctx.exposure.signal_scale(),
        },
        diagnostics: Diagnostics {
            saturated_pixels,
            max_saturated_fraction,
        },
        split: splits,
        array: records,
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_toml()?).map_err(|e| Error::io(&path, e))?;
    Dataset::open(&dir)
}
