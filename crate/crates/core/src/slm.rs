//! SLM response: 8-bit gray level to complex transmittance, and the
//! object-plane field built from it.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::beam::{incident_field, BeamModel, Coverage};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::{centered_index, ComplexField, Grid};

pub const LEVELS: usize = 256;
pub const DEFAULT_SMOOTHING_WINDOW: usize = 9;

/// Gray-level lookup tables for phase shift (radians) and intensity
/// ratio, both relative to gray level 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SlmCalibration {
    phase_lut: [f64; LEVELS],
    amplitude_lut: [f64; LEVELS],
    smoothing_window: usize,
}

/// Which part of the SLM response is applied to the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modulation {
    /// Phase and residual intensity modulation.
    #[default]
    Full,
    /// Unit modulus: the object modulates only the phase.
    PhaseOnly,
}

impl SlmCalibration {
    /// Linear phase from 0 to 2 pi over the 256 levels, unit amplitude.
    pub fn synthetic() -> Self {
        Self::synthetic_with_ripple(0.0)
    }

    /// Linear phase plus a residual intensity ripple of the given depth,
    /// `1 - depth * (1 - cos(2 pi v / 85)) / 2`, which keeps level 0 at 1.
    pub fn synthetic_with_ripple(depth: f64) -> Self {
        let mut phase_lut = [0.0; LEVELS];
        let mut amplitude_lut = [0.0; LEVELS];
        for v in 0..LEVELS {
            phase_lut[v] = v as f64 * TAU / 255.0;
            amplitude_lut[v] = 1.0 - depth * (1.0 - (TAU * v as f64 / 85.0).cos()) / 2.0;
        }
        Self {
            phase_lut,
            amplitude_lut,
            smoothing_window: 1,
        }
    }

    /// Builds the final curves from measured mean curves: a centred moving
    /// average with edge clamping, re-referenced so level 0 has phase 0 and
    /// intensity ratio 1.
    pub fn from_measured(phase: &[f64], amplitude: &[f64], window: usize) -> Result<Self> {
        if phase.len() != LEVELS || amplitude.len() != LEVELS {
            return Err(Error::CalibrationMissing(format!(
                "expected {LEVELS} entries, got {} phase and {} amplitude",
                phase.len(),
                amplitude.len()
            )));
        }
        if window == 0 || window % 2 == 0 {
            return Err(Error::CalibrationMissing(format!(
                "smoothing window must be odd and positive, got {window}"
            )));
        }
        if phase.iter().chain(amplitude).any(|v| !v.is_finite()) || amplitude.iter().any(|&a| a < 0.0) {
            return Err(Error::CalibrationMissing("non-finite or negative table entries".into()));
        }
        let mut phase_lut = moving_average(phase, window);
        let mut amplitude_lut = moving_average(amplitude, window);
        let (p0, a0) = (phase_lut[0], amplitude_lut[0]);
        if a0 <= 0.0 {
            return Err(Error::CalibrationMissing("zero intensity ratio at level 0".into()));
        }
        phase_lut.iter_mut().for_each(|p| *p -= p0);
        amplitude_lut.iter_mut().for_each(|a| *a /= a0);
        Ok(Self {
            phase_lut,
            amplitude_lut,
            smoothing_window: window,
        })
    }

    /// Final tables as recorded in a dataset manifest, taken verbatim.
    pub fn from_tables(phase: &[f64], amplitude: &[f64], smoothing_window: usize) -> Result<Self> {
        let (Ok(phase_lut), Ok(amplitude_lut)) = (<[f64; LEVELS]>::try_from(phase), <[f64; LEVELS]>::try_from(amplitude))
        else {
            return Err(Error::CalibrationMissing(format!(
                "expected {LEVELS} entries, got {} phase and {} amplitude",
                phase.len(),
                amplitude.len()
            )));
        };
        if phase_lut.iter().chain(&amplitude_lut).any(|v| !v.is_finite()) || amplitude_lut.iter().any(|&a| a < 0.0) {
            return Err(Error::CalibrationMissing("non-finite or negative table entries".into()));
        }
        Ok(Self {
            phase_lut,
            amplitude_lut,
            smoothing_window,
        })
    }

    /// Reads a `gray phase amplitude` table (256 lines, ascending levels)
    /// and smooths it with `window`.
    pub fn load(path: &Path, window: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::CalibrationMissing(format!("{}: {e}", path.display())))?;
        Self::parse(&text, window)
    }

    pub fn parse(text: &str, window: usize) -> Result<Self> {
        let mut phase = Vec::with_capacity(LEVELS);
        let mut amplitude = Vec::with_capacity(LEVELS);
        for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::CalibrationMissing(format!("line {}: expected `gray phase amplitude`", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let level: usize = fields[0].parse().map_err(|_| bad())?;
            if level != phase.len() {
                return Err(Error::CalibrationMissing(format!(
                    "line {}: gray level {level} out of order, expected {}",
                    lineno + 1,
                    phase.len()
                )));
            }
            phase.push(fields[1].parse::<f64>().map_err(|_| bad())?);
            amplitude.push(fields[2].parse::<f64>().map_err(|_| bad())?);
        }
        Self::from_measured(&phase, &amplitude, window)
    }

    pub fn to_table_string(&self) -> String {
        let mut s = String::new();
        for v in 0..LEVELS {
            let _ = writeln!(s, "{v} {:.17e} {:.17e}", self.phase_lut[v], self.amplitude_lut[v]);
        }
        s
    }

    pub fn phase_lut(&self) -> &[f64; LEVELS] {
        &self.phase_lut
    }

    pub fn amplitude_lut(&self) -> &[f64; LEVELS] {
        &self.amplitude_lut
    }

    pub fn smoothing_window(&self) -> usize {
        self.smoothing_window
    }

    pub fn transmittance(&self, level: u8, modulation: Modulation) -> Complex64 {
        let amp = match modulation {
            Modulation::Full => self.amplitude_lut[level as usize].sqrt(),
            Modulation::PhaseOnly => 1.0,
        };
        Complex64::from_polar(amp, self.phase_lut[level as usize])
    }

    /// Ground-truth phase of an 8-bit object image.
    pub fn phase_of(&self, gray: &Grid<u8>) -> Grid<f64> {
        gray.map(|&v| self.phase_lut[v as usize])
    }
}

fn moving_average(values: &[f64], window: usize) -> [f64; LEVELS] {
    let half = (window / 2) as isize;
    let mut out = [0.0; LEVELS];
    for (i, o) in out.iter_mut().enumerate() {
        let sum: f64 = (-half..=half)
            .map(|k| values[(i as isize + k).clamp(0, LEVELS as isize - 1) as usize])
            .sum();
        *o = sum / window as f64;
    }
    out
}

/// Per-pixel complex transmittance of a gray-level image.
pub fn slm_transmittance(
    gray: &Grid<u8>,
    cal: &SlmCalibration,
    modulation: Modulation,
    pitch: f64,
    wavelength: f64,
) -> Result<ComplexField> {
    let table: Vec<Complex64> = (0..LEVELS).map(|v| cal.transmittance(v as u8, modulation)).collect();
    ComplexField::new(gray.map(|&v| table[v as usize]), pitch, wavelength)
}

/// Object-plane field `u_inc * t * exp(i f)` on the forward-model grid.
pub fn object_field(
    gray: &Grid<u8>,
    cal: &SlmCalibration,
    beam: &BeamModel,
    geometry: &Geometry,
) -> Result<ComplexField> {
    let n = geometry.forward_window()?;
    let incident = incident_field(
        beam,
        (n, n),
        geometry.detector_pitch,
        geometry.wavelength,
        Coverage::FullAperture,
    )?;
    object_field_with_incident(gray, cal, &incident, geometry)
}

/// As [`object_field`], reusing a precomputed incident field. The SLM
/// image is demagnified to the object pitch and bilinearly resampled
/// (real and imaginary parts independently) onto the incident grid;
/// outside the image the SLM shows level 0.
pub fn object_field_with_incident(
    gray: &Grid<u8>,
    cal: &SlmCalibration,
    incident: &ComplexField,
    geometry: &Geometry,
) -> Result<ComplexField> {
    let op = geometry.object_pixels;
    if gray.shape() != (op, op) {
        return Err(Error::GeometryMismatch(format!(
            "object image is {}x{}, expected {op}x{op}",
            gray.rows(),
            gray.cols()
        )));
    }
    let t = slm_transmittance(gray, cal, geometry.modulation, geometry.object_pitch(), geometry.wavelength)?;
    let background = cal.transmittance(0, geometry.modulation);
    let resampled = resample_bilinear(t.data(), geometry.object_pitch(), incident, background);
    let data = Grid::from_vec(
        incident.shape().0,
        incident.shape().1,
        resampled
            .into_vec()
            .into_iter()
            .zip(incident.data().iter())
            .map(|(a, b)| a * b)
            .collect(),
    )?;
    ComplexField::new(data, incident.pitch(), incident.wavelength())
}

/// Samples a centred `src` grid of pitch `src_pitch` at the pixel centres
/// of `target`, with `fill` beyond the source edge.
fn resample_bilinear(src: &Grid<Complex64>, src_pitch: f64, target: &ComplexField, fill: Complex64) -> Grid<Complex64> {
    let (sr, sc) = src.shape();
    // source padded with one ring of fill so edges blend into the background
    let padded = src.embed(sr + 2, sc + 2, fill).expect("larger grid");
    let (tr, tc) = target.shape();
    let scale = target.pitch() / src_pitch;
    // continuous index into `padded` of a target pixel
    let coord = |i: usize, tn: usize, sn: usize| centered_index(i, tn) * scale + (sn / 2) as f64 + 1.0;
    let cols: Vec<f64> = (0..tc).map(|c| coord(c, tc, sc)).collect();
    Grid::from_fn(tr, tc, |r, c| {
        let (y, x) = (coord(r, tr, sr), cols[c]);
        if y < 0.0 || x < 0.0 || y > (sr + 1) as f64 || x > (sc + 1) as f64 {
            return fill;
        }
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(sr + 1), (x0 + 1).min(sc + 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        padded[(y0, x0)] * ((1.0 - fy) * (1.0 - fx))
            + padded[(y0, x1)] * ((1.0 - fy) * fx)
            + padded[(y1, x0)] * (fy * (1.0 - fx))
            + padded[(y1, x1)] * (fy * fx)
    })
}
