//! Gerchberg-Saxton reconstruction and the GS-approximant.
//!
//! Both work on a square window of `N = geometry.approximant_window()`
//! pixels. The detector plane is sampled at the detector pitch, the object
//! plane at `lambda L / (N p_det)`, and the two planes are linked by a
//! pair of single-transform Fresnel propagations. The detector image sits
//! in the centre of the window.
//!
//! One iteration is: object estimate -> detector plane, impose the
//! measured amplitude, -> object plane, impose the incident amplitude.
//! The approximant stops that first iteration before the last step, with
//! the unmeasured part of the detector window set to zero.

use std::ops::Range;

use num_complex::Complex64;

use crate::beam::{incident_field, Coverage};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::geometry::Geometry;
use crate::grid::{centered_index, wrap_phase, ComplexField, Grid, IntensityImage, PhaseImage};
use crate::fft::Sparsity;
use crate::propagation::SingleTransform;

/// What the detector-plane projection does with pixels the camera did
/// not record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unmeasured {
    /// Keep the current estimate there.
    #[default]
    Free,
    /// Force them to zero, as zero-padding the measurement does.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GsOptions {
    pub max_iter: usize,
    /// Stop once the relative change of the residual falls below this.
    pub tol: f64,
    /// Counts subtracted from the measurement before the square root.
    pub offset: f64,
    pub unmeasured: Unmeasured,
}

impl Default for GsOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            offset: 0.0,
            unmeasured: Unmeasured::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GsStatus {
    Converged,
    /// The iteration budget ran out before the tolerance was met.
    MaxIterations,
    /// The measurement carries no signal; the phase is all zeros.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsResult {
    /// Object-plane phase over the object support, wrapped to (-pi, pi].
    pub phase: PhaseImage,
    /// Relative RMS distance to the detector constraint at each iteration.
    pub residual_history: Vec<f64>,
    pub iterations_run: usize,
    pub status: GsStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Approximant {
    pub phase: PhaseImage,
}

/// Precomputed operators for one geometry and incident beam.
#[derive(Debug, Clone)]
pub struct Retriever {
    n: usize,
    detector_shape: (usize, usize),
    object_pixels: usize,
    fft: Fft2,
    to_detector: SingleTransform,
    to_object: SingleTransform,
    incident_amplitude: Vec<f64>,
    /// Incident beam propagated to the detector plane.
    incident_at_detector: Vec<Complex64>,
    live_rows: Range<usize>,
    background: Vec<usize>,
}

/// Relative incident amplitude above which an off-object pixel counts as
/// background for phase referencing.
const BACKGROUND_THRESHOLD: f64 = 0.1;
/// Pixels of clearance between the object support and the background.
const BACKGROUND_MARGIN: usize = 2;

impl Retriever {
    /// Builds the operators with the incident beam of `geometry`.
    pub fn new(geometry: &Geometry) -> Result<Self> {
        let n = geometry.approximant_window();
        let incident = incident_field(
            &geometry.beam,
            (n, n),
            geometry.approximant_pitch(),
            geometry.wavelength,
            Coverage::CentralCrop,
        )?;
        Self::with_incident(geometry, &incident)
    }

    /// Builds the operators for an explicit object-plane incident field,
    /// which must be `N x N` at the reconstruction pitch.
    pub fn with_incident(geometry: &Geometry, incident: &ComplexField) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.approximant_window();
        let pitch = geometry.approximant_pitch();
        if incident.shape() != (n, n) {
            return Err(Error::GeometryMismatch(format!(
                "incident field is {:?}, reconstruction window is {n}x{n}",
                incident.shape()
            )));
        }
        if (incident.pitch() - pitch).abs() > 1e-9 * pitch {
            return Err(Error::GeometryMismatch(format!(
                "incident pitch {} m differs from reconstruction pitch {pitch} m",
                incident.pitch()
            )));
        }
        let fft = Fft2::new(n);
        let to_detector = SingleTransform::new(n, geometry.distance, pitch, geometry.wavelength);
        let to_object = SingleTransform::new(n, -geometry.distance, geometry.detector_pitch, geometry.wavelength);

        let incident_amplitude: Vec<f64> = incident.data().iter().map(|z| z.norm()).collect();
        let live = |r: &usize| incident_amplitude[r * n..(r + 1) * n].iter().any(|&a| a > 0.0);
        let first = (0..n).find(live).unwrap_or(0);
        let last = (0..n).rev().find(live).map_or(0, |r| r + 1);
        let live_rows = first..last.max(first);

        let mut incident_at_detector: Vec<Complex64> = incident.data().as_slice().to_vec();
        to_detector.apply(&mut incident_at_detector, &fft, Sparsity::InputRows(live_rows.clone()));

        let peak = incident_amplitude.iter().cloned().fold(0.0, f64::max);
        let half = (geometry.object_pixels / 2 + BACKGROUND_MARGIN) as f64;
        let background = (0..n * n)
            .filter(|&i| {
                let (y, x) = (centered_index(i / n, n), centered_index(i % n, n));
                (y.abs() > half || x.abs() > half) && incident_amplitude[i] > BACKGROUND_THRESHOLD * peak
            })
            .collect::<Vec<_>>();
        if background.is_empty() {
            return Err(Error::GeometryMismatch("no illuminated background around the object".into()));
        }

        Ok(Self {
            n,
            detector_shape: (geometry.detector_rows, geometry.detector_cols),
            object_pixels: geometry.object_pixels,
            fft,
            to_detector,
            to_object,
            incident_amplitude,
            incident_at_detector,
            live_rows,
            background,
        })
    }

    pub fn window(&self) -> usize {
        self.n
    }

    /// Measured amplitude `sqrt(max(m - offset, 0))` on the full window,
    /// with a mask of the measured pixels.
    fn detector_amplitude(&self, measurement: &IntensityImage, offset: f64) -> Result<(Vec<f64>, Vec<bool>)> {
        if measurement.shape() != self.detector_shape {
            return Err(Error::GeometryMismatch(format!(
                "measurement is {:?}, detector is {:?}",
                measurement.shape(),
                self.detector_shape
            )));
        }
        let cols = measurement.cols();
        if let Some((i, &v)) = measurement.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeIntensity {
                row: i / cols,
                col: i % cols,
                value: v,
            });
        }
        let amp = measurement.map(|&v| (v - offset).max(0.0).sqrt());
        let amp = amp.embed(self.n, self.n, 0.0)?.into_vec();
        let mask = Grid::filled(measurement.rows(), cols, true)
            .embed(self.n, self.n, false)?
            .into_vec();
        Ok((amp, mask))
    }

    /// Imposes the measured amplitude in place and returns the squared
    /// distance between the field and its projection.
    fn project_detector(&self, field: &mut [Complex64], amp: &[f64], mask: &[bool], unmeasured: Unmeasured) -> f64 {
        let mut dist2 = 0.0;
        for ((z, &a), &m) in field.iter_mut().zip(amp).zip(mask) {
            if m {
                let norm = z.norm_sqr().sqrt();
                dist2 += (norm - a) * (norm - a);
                *z = if norm > 0.0 {
                    *z * (a / norm)
                } else {
                    Complex64::new(a, 0.0)
                };
            } else if unmeasured == Unmeasured::Zero {
                dist2 += z.norm_sqr();
                *z = Complex64::default();
            }
        }
        dist2
    }

    /// Incident beam at the detector, scaled so that its energy over the
    /// measured pixels equals that of the measurement, and the scale.
    fn initial_field(&self, amp: &[f64], mask: &[bool]) -> (Vec<Complex64>, f64) {
        let measured: f64 = amp.iter().map(|a| a * a).sum();
        let model: f64 = self
            .incident_at_detector
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        let scale = if model > 0.0 { (measured / model).sqrt() } else { 1.0 };
        (self.incident_at_detector.iter().map(|z| z * scale).collect(), scale)
    }

    fn impose_incident(&self, field: &mut [Complex64], scale: f64) {
        for (z, &a) in field.iter_mut().zip(&self.incident_amplitude) {
            let a = a * scale;
            let norm = z.norm_sqr().sqrt();
            *z = if norm > 0.0 {
                *z * (a / norm)
            } else {
                Complex64::new(a, 0.0)
            };
        }
    }

    /// Phase offset of the illuminated background: the circular mean fixes
    /// the branch, then the median of the residual deviations refines it.
    fn background_phase(&self, field: &[Complex64]) -> f64 {
        let sum: Complex64 = self.background.iter().map(|&i| {
            let z = field[i];
            let norm = z.norm_sqr().sqrt();
            if norm > 0.0 { z / norm } else { Complex64::default() }
        }).sum();
        let center = sum.arg();
        let mut dev: Vec<f64> = self
            .background
            .iter()
            .map(|&i| wrap_phase(field[i].arg() - center))
            .collect();
        let mid = dev.len() / 2;
        let (_, m, _) = dev.select_nth_unstable_by(mid, f64::total_cmp);
        center + *m
    }

    /// Background-referenced, wrapped phase over the object support.
    fn object_phase(&self, field: &[Complex64]) -> PhaseImage {
        let offset = self.background_phase(field);
        let n = self.n;
        let p = self.object_pixels;
        let start = n / 2 - p / 2;
        Grid::from_fn(p, p, |r, c| wrap_phase(field[(start + r) * n + start + c].arg() - offset))
    }

    /// Back-propagates `sqrt(measurement)` carrying the phase of the
    /// incident beam at the detector, with zeros outside the detector.
    pub fn approximant(&self, measurement: &IntensityImage, offset: f64) -> Result<Approximant> {
        let (amp, mask) = self.detector_amplitude(measurement, offset)?;
        let (mut field, _) = self.initial_field(&amp, &mask);
        self.project_detector(&mut field, &amp, &mask, Unmeasured::Zero);
        self.to_object.apply(&mut field, &self.fft, Sparsity::OutputRows(self.live_rows.clone()));
        Ok(Approximant {
            phase: self.object_phase(&field),
        })
    }

    pub fn gs_reconstruct(&self, measurement: &IntensityImage, opts: &GsOptions) -> Result<GsResult> {
        let (amp, mask) = self.detector_amplitude(measurement, opts.offset)?;
        let norm2: f64 = amp.iter().map(|a| a * a).sum();
        if norm2 == 0.0 {
            return Ok(GsResult {
                phase: Grid::filled(self.object_pixels, self.object_pixels, 0.0),
                residual_history: Vec::new(),
                iterations_run: 0,
                status: GsStatus::Degenerate,
            });
        }
        let norm = norm2.sqrt();
        let mut history = Vec::with_capacity(opts.max_iter);
        let mut status = GsStatus::MaxIterations;
        let (mut field, scale) = self.initial_field(&amp, &mask);
        for k in 0..opts.max_iter {
            if k > 0 {
                self.impose_incident(&mut field, scale);
                self.to_detector.apply(&mut field, &self.fft, Sparsity::InputRows(self.live_rows.clone()));
            }
            let residual = self.project_detector(&mut field, &amp, &mask, opts.unmeasured).sqrt() / norm;
            // the object-plane projection that follows keeps this phase
            self.to_object.apply(&mut field, &self.fft, Sparsity::OutputRows(self.live_rows.clone()));
            let previous = history.last().copied();
            history.push(residual);
            let settled = match previous {
                Some(p) if p > 0.0 => ((p - residual) / p).abs() < opts.tol,
                _ => residual == 0.0,
            };
            if settled {
                status = GsStatus::Converged;
                break;
            }
        }
        let phase = if history.is_empty() {
            Grid::filled(self.object_pixels, self.object_pixels, 0.0)
        } else {
            self.object_phase(&field)
        };
        Ok(GsResult {
            phase,
            iterations_run: history.len(),
            residual_history: history,
            status,
        })
    }
}

/// GS reconstruction with an explicit incident field (see [`Retriever`]).
pub fn gs_reconstruct(
    measurement: &IntensityImage,
    incident: &ComplexField,
    geometry: &Geometry,
    opts: &GsOptions,
) -> Result<GsResult> {
    Retriever::with_incident(geometry, incident)?.gs_reconstruct(measurement, opts)
}

/// GS-approximant with an explicit incident field (see [`Retriever`]).
pub fn gs_approximant(
    measurement: &IntensityImage,
    incident: &ComplexField,
    geometry: &Geometry,
    offset: f64,
) -> Result<Approximant> {
    Retriever::with_incident(geometry, incident)?.approximant(measurement, offset)
}
