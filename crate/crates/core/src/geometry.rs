//! Optical constants of the simulated apparatus and the grid sizes
//! derived from them.

use serde::{Deserialize, Serialize};

use crate::beam::BeamModel;
use crate::error::{Error, Result};
use crate::propagation::{min_padded_size, single_transform_pitch, single_transform_size, PropagationPlan};
use crate::slm::Modulation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Metres.
    pub wavelength: f64,
    /// Object (image) plane to detector, metres.
    pub distance: f64,
    pub slm_pitch: f64,
    /// Telescope reduction from the SLM to the image plane.
    pub demagnification: f64,
    /// Side of the square object image in SLM pixels.
    pub object_pixels: usize,
    pub detector_rows: usize,
    pub detector_cols: usize,
    pub detector_pitch: f64,
    /// Object-plane pitch of reconstructions (approximant and GS).
    pub reconstruction_pitch: f64,
    pub beam: BeamModel,
    #[serde(default)]
    pub modulation: Modulation,
    /// Forward-model window; the smallest admissible power of two if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_window: Option<usize>,
}

impl Default for Geometry {
    fn default() -> Self {
        Self::paper()
    }
}

impl Geometry {
    /// The experimental apparatus: HeNe source, 36 um SLM pixels reduced
    /// 2.3x, 1004x1002 EM-CCD with 8 um pixels at 400 mm, 8.5 mm beam.
    pub fn paper() -> Self {
        Self {
            wavelength: 632.8e-9,
            distance: 0.4,
            slm_pitch: 36e-6,
            demagnification: 2.3,
            object_pixels: 256,
            detector_rows: 1004,
            detector_cols: 1002,
            detector_pitch: 8e-6,
            reconstruction_pitch: 4e-3 / 256.0,
            beam: BeamModel::bessel(8.5e-3),
            modulation: Modulation::Full,
            forward_window: None,
        }
    }

    /// A scaled-down apparatus for tests and quick runs: 32-pixel objects,
    /// a 128x126 detector at 30 mm and a 0.5 mm beam. Same optical
    /// regime, roughly 60x fewer pixels.
    pub fn compact() -> Self {
        Self {
            wavelength: 632.8e-9,
            distance: 0.03,
            slm_pitch: 36e-6,
            demagnification: 2.3,
            object_pixels: 32,
            detector_rows: 128,
            detector_cols: 126,
            detector_pitch: 8e-6,
            reconstruction_pitch: 0.5e-3 / 32.0,
            beam: BeamModel::bessel(0.5e-3),
            modulation: Modulation::Full,
            forward_window: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("distance", self.distance),
            ("slm_pitch", self.slm_pitch),
            ("demagnification", self.demagnification),
            ("detector_pitch", self.detector_pitch),
            ("reconstruction_pitch", self.reconstruction_pitch),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ConfigInvalid(format!("geometry.{name} must be > 0, got {v}")));
            }
        }
        if self.object_pixels < 2 || self.detector_rows < 2 || self.detector_cols < 2 {
            return Err(Error::ConfigInvalid("geometry grid sizes must be >= 2".into()));
        }
        self.beam.validate()?;
        let window = self.approximant_window();
        if window < self.detector_rows.max(self.detector_cols) {
            return Err(Error::ConfigInvalid(format!(
                "approximant window {window} is smaller than the detector"
            )));
        }
        if window < self.object_pixels {
            return Err(Error::ConfigInvalid(format!(
                "approximant window {window} is smaller than the object"
            )));
        }
        self.forward_window()?;
        Ok(())
    }

    /// Image-plane pitch of one SLM pixel.
    pub fn object_pitch(&self) -> f64 {
        self.slm_pitch / self.demagnification
    }

    pub fn object_extent(&self) -> f64 {
        self.object_pixels as f64 * self.object_pitch()
    }

    /// Forward-model window at the detector pitch: holds the detector,
    /// the aperture and the object, and satisfies the transfer-function
    /// sampling bound.
    pub fn forward_window(&self) -> Result<usize> {
        let bound = min_padded_size(self.distance, self.detector_pitch, self.wavelength);
        let aperture = self
            .beam
            .radius()
            .map(|r| 2 * (r / self.detector_pitch).ceil() as usize + 4)
            .unwrap_or(0);
        let object = (self.object_extent() / self.detector_pitch).ceil() as usize + 4;
        let need = bound
            .max(aperture)
            .max(object)
            .max(self.detector_rows)
            .max(self.detector_cols);
        match self.forward_window {
            None => Ok(need.next_power_of_two()),
            Some(n) if n >= need => Ok(n),
            Some(n) => Err(Error::ConfigInvalid(format!(
                "geometry.forward_window = {n} is below the required {need}"
            ))),
        }
    }

    pub fn forward_plan(&self) -> Result<PropagationPlan> {
        Ok(PropagationPlan::transfer_function(self.distance, self.forward_window()?))
    }

    /// Zero-padded detector window whose single-transform back-propagation
    /// lands on `reconstruction_pitch`.
    pub fn approximant_window(&self) -> usize {
        single_transform_size(self.distance, self.detector_pitch, self.reconstruction_pitch, self.wavelength)
    }

    /// Exact object-plane pitch produced by [`Geometry::approximant_window`].
    pub fn approximant_pitch(&self) -> f64 {
        single_transform_pitch(self.distance, self.approximant_window(), self.detector_pitch, self.wavelength)
    }
}
