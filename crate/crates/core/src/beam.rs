//! Illumination beam in the object (image) plane.
//!
//! The default beam is the central lobe of a `J0` Bessel profile whose
//! outer rings are removed by a hard aperture at the first zero.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_index, ComplexField, Grid};

/// First zero of the Bessel function `J0`.
pub const BESSEL_J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum BeamProfile {
    /// Amplitude `J0(a0 r / R)` for `r <= R`, zero outside.
    Bessel { radius: f64 },
    /// Constant amplitude over the whole grid.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamModel {
    #[serde(flatten)]
    pub profile: BeamProfile,
    #[serde(default = "one")]
    pub peak_amplitude: f64,
}

fn one() -> f64 {
    1.0
}

/// Whether an incident-field grid must contain the whole aperture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    FullAperture,
    CentralCrop,
}

impl BeamModel {
    pub fn bessel(radius: f64) -> Self {
        Self {
            profile: BeamProfile::Bessel { radius },
            peak_amplitude: 1.0,
        }
    }

    pub fn uniform() -> Self {
        Self {
            profile: BeamProfile::Uniform,
            peak_amplitude: 1.0,
        }
    }

    pub fn a0(&self) -> f64 {
        BESSEL_J0_FIRST_ZERO
    }

    pub fn radius(&self) -> Option<f64> {
        match self.profile {
            BeamProfile::Bessel { radius } => Some(radius),
            BeamProfile::Uniform => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BeamProfile::Bessel { radius } = self.profile {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::GeometryMismatch(format!("beam radius must be > 0, got {radius}")));
            }
        }
        if !self.peak_amplitude.is_finite() || self.peak_amplitude < 0.0 {
            return Err(Error::GeometryMismatch("peak amplitude must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Field amplitude at radial distance `r` (metres).
    pub fn amplitude_at(&self, r: f64) -> f64 {
        match self.profile {
            BeamProfile::Uniform => self.peak_amplitude,
            BeamProfile::Bessel { radius } if r <= radius => {
                // J0 rounds to about -1e-17 at the rim
                self.peak_amplitude * libm::j0(BESSEL_J0_FIRST_ZERO * r / radius).max(0.0)
            }
            BeamProfile::Bessel { .. } => 0.0,
        }
    }

    /// Fraction of the beam power falling on a centred `width x height`
    /// rectangle (metres).
    ///
    /// The total power over the disc is `pi R^2 J1(a0)^2`; the rectangle
    /// is integrated with a composite Gauss-Legendre rule on one quadrant.
    pub fn capture_fraction(&self, width: f64, height: f64) -> f64 {
        let radius = match self.profile {
            BeamProfile::Uniform => return 1.0,
            BeamProfile::Bessel { radius } => radius,
        };
        let total = std::f64::consts::PI * radius * radius * libm::j1(BESSEL_J0_FIRST_ZERO).powi(2);
        let (hx, hy) = ((width / 2.0).min(radius), (height / 2.0).min(radius));
        let intensity = |x: f64, y: f64| {
            let r = x.hypot(y);
            if r <= radius {
                libm::j0(BESSEL_J0_FIRST_ZERO * r / radius).powi(2)
            } else {
                0.0
            }
        };
        let quarter = gauss_legendre_2d(intensity, hx, hy, 400);
        (4.0 * quarter / total).min(1.0)
    }
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1]
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn gauss_legendre_2d(f: impl Fn(f64, f64) -> f64, hx: f64, hy: f64, panels: usize) -> f64 {
    let (dx, dy) = (hx / panels as f64, hy / panels as f64);
    let mut acc = 0.0;
    for i in 0..panels {
        let cx = (i as f64 + 0.5) * dx;
        for j in 0..panels {
            let cy = (j as f64 + 0.5) * dy;
            for (nx, wx) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                for (ny, wy) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                    acc += wx * wy * f(cx + nx * dx / 2.0, cy + ny * dy / 2.0);
                }
            }
        }
    }
    acc * dx * dy / 4.0
}

/// Samples the incident beam on a centred `rows x cols` grid. The field
/// is real, non-negative and has zero phase.
pub fn incident_field(
    beam: &BeamModel,
    (rows, cols): (usize, usize),
    pitch: f64,
    wavelength: f64,
    coverage: Coverage,
) -> Result<ComplexField> {
    beam.validate()?;
    if !(pitch > 0.0) {
        return Err(Error::GeometryMismatch(format!("pitch must be > 0, got {pitch}")));
    }
    if let (Coverage::FullAperture, Some(radius)) = (coverage, beam.radius()) {
        // the outermost samples must lie beyond the aperture on both axes
        let reach = (rows.min(cols) / 2 - 1) as f64 * pitch;
        if reach < radius {
            return Err(Error::GeometryMismatch(format!(
                "{rows}x{cols} grid at {pitch} m does not cover a {radius} m aperture"
            )));
        }
    }
    let col_x: Vec<f64> = (0..cols).map(|c| centered_index(c, cols) * pitch).collect();
    let grid = Grid::from_fn(rows, cols, |r, c| {
        let y = centered_index(r, rows) * pitch;
        Complex64::new(beam.amplitude_at(y.hypot(col_x[c])), 0.0)
    });
    ComplexField::new(grid, pitch, wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centre_and_edge_values() {
        let b = BeamModel::bessel(8.5e-3);
        assert_eq!(b.amplitude_at(0.0), 1.0);
        assert!(b.amplitude_at(8.5e-3).abs() < 1e-15);
        assert_eq!(b.amplitude_at(8.6e-3), 0.0);
        assert!(b.a0() > 2.40 && b.a0() < 2.41);
        assert!(libm::j0(BESSEL_J0_FIRST_ZERO).abs() < 1e-15);
    }

    #[test]
    fn pixel_at_center_has_peak_amplitude() {
        let b = BeamModel {
            profile: BeamProfile::Bessel { radius: 1e-3 },
            peak_amplitude: 3.0,
        };
        let f = incident_field(&b, (301, 301), 8e-6, 632.8e-9, Coverage::FullAperture).unwrap();
        assert_eq!(f.data()[(150, 150)], Complex64::new(3.0, 0.0));
        assert!(f.data().iter().all(|z| z.im == 0.0 && z.re >= 0.0));
    }

    #[test]
    fn point_symmetric_on_odd_grid() {
        let b = BeamModel::bessel(0.4e-3);
        let n = 121;
        let f = incident_field(&b, (n, n), 8e-6, 632.8e-9, Coverage::FullAperture).unwrap();
        for r in 0..n {
            for c in 0..n {
                assert_eq!(f.data()[(r, c)], f.data()[(n - 1 - r, n - 1 - c)]);
            }
        }
    }

    #[test]
    fn small_grid_requires_crop_flag() {
        let b = BeamModel::bessel(8.5e-3);
        let err = incident_field(&b, (1004, 1002), 8e-6, 632.8e-9, Coverage::FullAperture);
        assert!(matches!(err, Err(Error::GeometryMismatch(_))));
        assert!(incident_field(&b, (1004, 1002), 8e-6, 632.8e-9, Coverage::CentralCrop).is_ok());
        assert!(incident_field(&b, (16, 16), 0.0, 632.8e-9, Coverage::CentralCrop).is_err());
    }

    #[test]
    fn uniform_beam_is_flat() {
        let f = incident_field(&BeamModel::uniform(), (8, 6), 1e-6, 1e-6, Coverage::FullAperture).unwrap();
        assert!(f.data().iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert_eq!(BeamModel::uniform().capture_fraction(1e-3, 1e-3), 1.0);
    }

    #[test]
    fn capture_fraction_of_whole_disc_is_one() {
        let b = BeamModel::bessel(1e-3);
        assert!((b.capture_fraction(2e-3, 2e-3) - 1.0).abs() < 1e-9);
        assert!((b.capture_fraction(5e-3, 5e-3) - 1.0).abs() < 1e-9);
    }
}
