//! Fresnel propagation with FFTs.
//!
//! Two discretisations are provided:
//!
//! * [`Method::TransferFunction`]: multiply the angular spectrum by the
//!   Fresnel kernel `exp(-i pi lambda L (fx^2 + fy^2))`. The output keeps
//!   the input pitch. The sampled kernel does not alias as long as
//!   `|L| <= N dx^2 / lambda`.
//! * [`Method::SingleTransform`]: chirp, one centred DFT, chirp. The
//!   output pitch becomes `lambda |L| / (N dx)`, which is how a detector
//!   image is resampled onto the object grid in a single step.
//!
//! Both are unitary on the `N x N` computational window, drop the global
//! `exp(i k L)` factor, and return the full window.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{Fft2, Sparsity};
use crate::grid::{centered_index, ComplexField, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TransferFunction,
    SingleTransform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPlan {
    /// Propagation distance in metres; negative propagates backwards.
    pub distance: f64,
    /// Side of the square computational window in pixels.
    pub padded_size: usize,
    pub method: Method,
}

/// Smallest window for which the transfer-function kernel is alias free.
pub fn min_padded_size(distance: f64, pitch: f64, wavelength: f64) -> usize {
    let n = wavelength * distance.abs() / (pitch * pitch);
    // 632.8 nm * 0.4 m / (8 um)^2 is 3955 exactly but evaluates just above it
    let r = n.round();
    if (n - r).abs() <= 1e-9 * n {
        r as usize
    } else {
        n.ceil() as usize
    }
}

/// Largest distance the transfer-function method supports on a window.
pub fn max_transfer_distance(padded_size: usize, pitch: f64, wavelength: f64) -> f64 {
    padded_size as f64 * pitch * pitch / wavelength
}

/// Output pitch of a single-transform propagation.
pub fn single_transform_pitch(distance: f64, padded_size: usize, pitch: f64, wavelength: f64) -> f64 {
    wavelength * distance.abs() / (padded_size as f64 * pitch)
}

/// Window size that makes a single-transform propagation land on
/// `pitch_out`, rounded to the nearest integer.
pub fn single_transform_size(distance: f64, pitch_in: f64, pitch_out: f64, wavelength: f64) -> usize {
    (wavelength * distance.abs() / (pitch_in * pitch_out)).round() as usize
}

impl PropagationPlan {
    pub fn transfer_function(distance: f64, padded_size: usize) -> Self {
        Self {
            distance,
            padded_size,
            method: Method::TransferFunction,
        }
    }

    pub fn single_transform(distance: f64, padded_size: usize) -> Self {
        Self {
            distance,
            padded_size,
            method: Method::SingleTransform,
        }
    }

    /// Transfer-function plan on the smallest power-of-two window that
    /// holds the field and satisfies the sampling bound.
    pub fn auto(field: &ComplexField, distance: f64) -> Self {
        let (rows, cols) = field.shape();
        let need = min_padded_size(distance, field.pitch(), field.wavelength())
            .max(rows)
            .max(cols);
        Self::transfer_function(distance, need.next_power_of_two())
    }

    pub fn output_pitch(&self, pitch: f64, wavelength: f64) -> f64 {
        match self.method {
            Method::TransferFunction => pitch,
            Method::SingleTransform => {
                single_transform_pitch(self.distance, self.padded_size, pitch, wavelength)
            }
        }
    }

    pub fn validate(&self, field: &ComplexField) -> Result<()> {
        let (rows, cols) = field.shape();
        if rows > self.padded_size || cols > self.padded_size {
            return Err(Error::GeometryMismatch(format!(
                "{rows}x{cols} field does not fit a {}-pixel window",
                self.padded_size
            )));
        }
        if self.method == Method::TransferFunction {
            let bound = max_transfer_distance(self.padded_size, field.pitch(), field.wavelength());
            if self.distance.abs() > bound * (1.0 + 1e-12) {
                return Err(Error::SamplingViolation {
                    distance: self.distance,
                    bound,
                    padded_size: self.padded_size,
                });
            }
        }
        Ok(())
    }
}

/// Propagates `field` by `plan.distance`.
///
/// The field is centred in the `padded_size` window and the whole window
/// is returned. A zero distance returns the input unchanged.
pub fn propagate(field: &ComplexField, plan: &PropagationPlan) -> Result<ComplexField> {
    plan.validate(field)?;
    if plan.distance == 0.0 {
        return Ok(field.clone());
    }
    let n = plan.padded_size;
    let mut buf = field.data().embed(n, n, Complex64::default())?.into_vec();
    let fft = Fft2::new(n);
    let out_pitch = match plan.method {
        Method::TransferFunction => {
            transfer_function_in_place(&mut buf, &fft, plan.distance, field.pitch(), field.wavelength());
            field.pitch()
        }
        Method::SingleTransform => {
            let q = SingleTransform::new(n, plan.distance, field.pitch(), field.wavelength());
            q.apply(&mut buf, &fft, Sparsity::Dense);
            q.pitch_out
        }
    };
    Ok(field.with_data(Grid::from_vec(n, n, buf)?, out_pitch))
}

pub(crate) fn transfer_function_in_place(
    buf: &mut [Complex64],
    fft: &Fft2,
    distance: f64,
    pitch: f64,
    wavelength: f64,
) {
    let n = fft.size();
    fft.forward(buf);
    let df = 1.0 / (n as f64 * pitch);
    let k1: Vec<Complex64> = (0..n)
        .map(|i| {
            let f = centered_index(i, n) * df;
            Complex64::from_polar(1.0, -PI * wavelength * distance * f * f)
        })
        .collect();
    for (r, row) in buf.chunks_exact_mut(n).enumerate() {
        let kr = k1[r];
        for (z, kc) in row.iter_mut().zip(&k1) {
            *z *= kr * kc;
        }
    }
    fft.inverse(buf);
}

/// Precomputed separable chirps of a single-transform propagation.
#[derive(Debug, Clone)]
pub(crate) struct SingleTransform {
    n: usize,
    forward: bool,
    chirp_in: Vec<Complex64>,
    chirp_out: Vec<Complex64>,
    prefactor: Complex64,
    pub(crate) pitch_out: f64,
}

impl SingleTransform {
    pub(crate) fn new(n: usize, distance: f64, pitch: f64, wavelength: f64) -> Self {
        let pitch_out = single_transform_pitch(distance, n, pitch, wavelength);
        let forward = distance > 0.0;
        // The centred DFT sum_m x[m] exp(s 2 pi i (k - c)(m - c) / n) is a
        // plain DFT between two linear phase ramps and a constant; the
        // ramps ride along with the chirps so no array shifts are needed.
        let c = n / 2;
        let s = if forward { -1.0 } else { 1.0 };
        let ramp = |i: usize| Complex64::from_polar(1.0, -s * TAU * ((c * i) % n) as f64 / n as f64);
        let chirp = |dx: f64| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let x = centered_index(i, n) * dx;
                    Complex64::from_polar(1.0, PI * x * x / (wavelength * distance)) * ramp(i)
                })
                .collect()
        };
        let centre = Complex64::from_polar(1.0, s * TAU * ((2 * c * c) % n) as f64 / n as f64);
        // 1 / (i sign(L)), the phase of the Fresnel prefactor
        let sign = if forward {
            Complex64::new(0.0, -1.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        Self {
            n,
            forward,
            chirp_in: chirp(pitch),
            chirp_out: chirp(pitch_out),
            prefactor: sign * centre,
            pitch_out,
        }
    }

    /// Applies the propagation in place. `InputRows` promises the input is
    /// zero elsewhere; `OutputRows` computes only those rows and zeroes
    /// the rest.
    pub(crate) fn apply(&self, buf: &mut [Complex64], fft: &Fft2, sparsity: Sparsity) {
        let n = self.n;
        debug_assert_eq!(fft.size(), n);
        let input = match &sparsity {
            Sparsity::InputRows(rows) => rows.clone(),
            _ => 0..n,
        };
        for r in input {
            let cr = self.chirp_in[r];
            for (z, cc) in buf[r * n..(r + 1) * n].iter_mut().zip(&self.chirp_in) {
                *z *= cr * cc;
            }
        }
        let output = match &sparsity {
            Sparsity::OutputRows(rows) => rows.clone(),
            _ => 0..n,
        };
        fft.transform_raw(buf, !self.forward, sparsity);
        let scale = self.prefactor / n as f64;
        for r in output {
            let cr = self.chirp_out[r] * scale;
            for (z, cc) in buf[r * n..(r + 1) * n].iter_mut().zip(&self.chirp_out) {
                *z *= cr * cc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 632.8e-9;

    fn random_field(n: usize, pitch: f64, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Grid::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        ComplexField::new(g, pitch, LAMBDA).unwrap()
    }

    fn rel_rms(a: &Grid<Complex64>, b: &Grid<Complex64>) -> f64 {
        let num: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn paper_geometry_bound() {
        let n = min_padded_size(0.4, 8e-6, LAMBDA);
        assert_eq!(n, 3955);
        let f = ComplexField::new(Grid::filled(1004, 1002, Complex64::new(1.0, 0.0)), 8e-6, LAMBDA).unwrap();
        let plan = PropagationPlan::auto(&f, 0.4);
        assert_eq!(plan.padded_size, 4096);
        assert!(plan.validate(&f).is_ok());
        let tight = PropagationPlan::transfer_function(0.4, 3954);
        assert!(matches!(tight.validate(&f), Err(Error::SamplingViolation { .. })));
    }

    #[test]
    fn approximant_window_size() {
        assert_eq!(single_transform_size(0.4, 8e-6, 15.625e-6, LAMBDA), 2025);
        let p = single_transform_pitch(-0.4, 2025, 8e-6, LAMBDA);
        assert!((p - 15.625e-6).abs() / 15.625e-6 < 1e-4);
    }

    #[test]
    fn field_larger_than_window_is_rejected() {
        let f = random_field(16, 1e-6, 1);
        let plan = PropagationPlan::single_transform(0.01, 8);
        assert!(matches!(propagate(&f, &plan), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn plane_wave_is_eigenfunction() {
        let n = 64;
        let f = ComplexField::new(Grid::filled(n, n, Complex64::new(1.0, 0.0)), 10e-6, LAMBDA).unwrap();
        let out = propagate(&f, &PropagationPlan::transfer_function(0.01, n)).unwrap();
        let z0 = out.data()[(0, 0)];
        for z in out.data().iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            assert!((z - z0).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_distance_is_identity() {
        let f = random_field(20, 5e-6, 2);
        for plan in [
            PropagationPlan::transfer_function(0.0, 32),
            PropagationPlan::single_transform(0.0, 32),
        ] {
            assert_eq!(propagate(&f, &plan).unwrap(), f);
        }
    }

    #[test]
    fn single_transform_round_trip_and_pitch() {
        let f = random_field(45, 15.625e-6, 3);
        let n = 45;
        let fwd = propagate(&f, &PropagationPlan::single_transform(0.4, n)).unwrap();
        let want = single_transform_pitch(0.4, n, 15.625e-6, LAMBDA);
        assert_eq!(fwd.pitch(), want);
        assert!((fwd.energy() - f.energy()).abs() / f.energy() < 1e-12);
        let back = propagate(&fwd, &PropagationPlan::single_transform(-0.4, n)).unwrap();
        assert!((back.pitch() - f.pitch()).abs() / f.pitch() < 1e-12);
        assert!(rel_rms(back.data(), f.data()) < 1e-12);
    }

    #[test]
    fn single_transform_agrees_with_transfer_function() {
        // a Gaussian small enough that both discretisations are accurate
        let n = 256;
        let dx = 10e-6;
        let w = 60e-6;
        let g = Grid::from_fn(n, n, |r, c| {
            let (x, y) = (centered_index(r, n) * dx, centered_index(c, n) * dx);
            Complex64::new((-(x * x + y * y) / (w * w)).exp(), 0.0)
        });
        let f = ComplexField::new(g, dx, LAMBDA).unwrap();
        // choose L so the single-transform output pitch equals the input pitch
        let l = n as f64 * dx * dx / LAMBDA;
        let tf = propagate(&f, &PropagationPlan::transfer_function(l, n)).unwrap();
        let st = propagate(&f, &PropagationPlan::single_transform(l, n)).unwrap();
        assert!((st.pitch() - dx).abs() / dx < 1e-12);
        assert!(rel_rms(st.data(), tf.data()) < 1e-6, "{}", rel_rms(st.data(), tf.data()));
    }
}
