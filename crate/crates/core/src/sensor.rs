//! Photon-limited EM-CCD detection.
//!
//! Each pixel of an ideal intensity image (mean photons per exposure) is
//! turned into digital counts by
//!
//! ```text
//! p  ~ Poisson(phi T)
//! e  ~ Binomial(p, Q)
//! s  = s0 + g G F e + eta,   F ~ N(1, sigma_F),  eta ~ N(0, sigma_dark)
//! ```
//!
//! then rounded and clipped to the ADC range. All draws for a pixel come
//! from a Philox stream keyed by the seed and `(row, col, frame)`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, IntensityImage};
use crate::rng::CellStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub quantum_efficiency: f64,
    /// Seconds.
    pub integration_time: f64,
    /// Counts per electron.
    pub preamp_gain: f64,
    pub em_gain: f64,
    /// Relative standard deviation of the multiplicative gain noise F.
    pub excess_noise_sigma: f64,
    /// Counts; defaults from the EM gain when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dark_noise_sigma: Option<f64>,
    /// Counts.
    pub offset: f64,
    pub bit_depth: u32,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            quantum_efficiency: 0.6,
            integration_time: 2e-3,
            preamp_gain: 1.0,
            em_gain: 1.0,
            excess_noise_sigma: 0.3,
            dark_noise_sigma: None,
            offset: 100.0,
            bit_depth: 14,
            seed: 0,
        }
    }
}

/// Default dark noise (counts) at an EM gain. The magnitudes are
/// placeholders that grow with the gain.
pub fn default_dark_noise(em_gain: f64) -> f64 {
    if em_gain < 2.0 {
        2.0
    } else if em_gain < 20.0 {
        4.0
    } else {
        10.0
    }
}

impl SensorConfig {
    /// Noise-free electronics: every photon counted, unit gain, no offset.
    pub fn ideal(seed: u64) -> Self {
        Self {
            quantum_efficiency: 1.0,
            preamp_gain: 1.0,
            em_gain: 1.0,
            excess_noise_sigma: 0.0,
            dark_noise_sigma: Some(0.0),
            offset: 0.0,
            bit_depth: 16,
            seed,
            ..Self::default()
        }
    }

    pub fn dark_sigma(&self) -> f64 {
        self.dark_noise_sigma.unwrap_or_else(|| default_dark_noise(self.em_gain))
    }

    pub fn max_count(&self) -> f64 {
        ((1u64 << self.bit_depth) - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.quantum_efficiency;
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(q > 0.0 && q <= 1.0) {
            return bad(format!("sensor.quantum_efficiency must lie in (0, 1], got {q}"));
        }
        if !(self.integration_time > 0.0) {
            return bad("sensor.integration_time must be > 0".into());
        }
        if !(self.em_gain >= 1.0) {
            return bad(format!("sensor.em_gain must be >= 1, got {}", self.em_gain));
        }
        if !(self.preamp_gain > 0.0) {
            return bad("sensor.preamp_gain must be > 0".into());
        }
        if !(self.excess_noise_sigma >= 0.0) || !(self.dark_sigma() >= 0.0) {
            return bad("sensor noise sigmas must be >= 0".into());
        }
        if !(self.offset >= 0.0) {
            return bad("sensor.offset must be >= 0".into());
        }
        if !(1..=16).contains(&self.bit_depth) {
            return bad(format!("sensor.bit_depth must lie in 1..=16, got {}", self.bit_depth));
        }
        Ok(())
    }
}

/// Poisson sample: inversion by sequential search below 30, Hörmann's
/// transformed rejection (PTRS) at and above.
pub fn sample_poisson(lambda: f64, rng: &mut CellStream) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < 30.0 {
        let u = rng.open01();
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
            if p < f64::MIN_POSITIVE && k as f64 > lambda {
                // cumulative rounding left u above the representable cdf
                break;
            }
        }
        return k;
    }
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.open01() - 0.5;
        let v = rng.open01();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -lambda + k * loglam - libm::lgamma(k + 1.0) {
            return k as u64;
        }
    }
}

/// Count image plus saturation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Integer-valued digital counts.
    pub counts: IntensityImage,
    pub saturated_pixels: usize,
}

impl Detection {
    pub fn saturated_fraction(&self) -> f64 {
        self.saturated_pixels as f64 / self.counts.len() as f64
    }
}

/// Detects one frame (frame index 0).
pub fn detect(ideal: &IntensityImage, cfg: &SensorConfig) -> Result<Detection> {
    detect_frame(ideal, cfg, 0)
}

/// Detects `ideal` (mean photons per pixel over the exposure) as frame
/// `frame`. Pixels are independent and the result does not depend on the
/// rayon thread count.
pub fn detect_frame(ideal: &IntensityImage, cfg: &SensorConfig, frame: u32) -> Result<Detection> {
    cfg.validate()?;
    let cols = ideal.cols();
    if let Some((i, &v)) = ideal.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::NegativeIntensity {
            row: i / cols,
            col: i % cols,
            value: v,
        });
    }
    let gain = cfg.preamp_gain * cfg.em_gain;
    let dark = cfg.dark_sigma();
    let max = cfg.max_count();
    let q = cfg.quantum_efficiency;
    let counts: Vec<(f64, bool)> = ideal
        .as_slice()
        .par_iter()
        .enumerate()
        .map(|(i, &phi_t)| {
            let mut rng = CellStream::new(cfg.seed, (i / cols) as u32, (i % cols) as u32, frame);
            let photons = sample_poisson(phi_t, &mut rng);
            let electrons = if q >= 1.0 || photons == 0 {
                photons
            } else {
                Binomial::new(photons, q).expect("0 < q < 1").sample(&mut rng)
            };
            let f = if cfg.excess_noise_sigma > 0.0 {
                1.0 + cfg.excess_noise_sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                1.0
            };
            let eta = if dark > 0.0 {
                dark * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let s = (cfg.offset + gain * f * electrons as f64 + eta).round();
            (s.clamp(0.0, max), s > max)
        })
        .collect();
    let saturated_pixels = counts.iter().filter(|(_, sat)| *sat).count();
    let counts = Grid::from_vec(ideal.rows(), cols, counts.into_iter().map(|(s, _)| s).collect())?;
    Ok(Detection {
        counts,
        saturated_pixels,
    })
}

/// Scales an ideal intensity so that `reference_mean` maps to `photons`.
pub fn scale_to_photons(ideal: &IntensityImage, reference_mean: f64, photons: f64) -> IntensityImage {
    let s = photons / reference_mean;
    ideal.map(|v| v * s)
}

/// Photon budget of one illumination setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonBudget {
    /// Watts, measured before the last lens.
    pub total_beam_power: f64,
    pub filter_attenuation: f64,
    /// Fractional loss of the last lens.
    pub l4_loss: f64,
    /// Fraction of the beam power landing on the detector.
    pub capture_fraction: f64,
    /// Joules.
    pub photon_energy: f64,
    pub pixel_count: u64,
}

impl PhotonBudget {
    pub fn with_power(total_beam_power: f64, filter_attenuation: f64) -> Self {
        Self {
            total_beam_power,
            filter_attenuation,
            l4_loss: 0.015,
            capture_fraction: 0.69,
            photon_energy: 3.139e-19,
            pixel_count: 1_006_008,
        }
    }
}

/// Mean photoelectrons per pixel delivered by `budget` in one exposure.
pub fn photoelectrons_per_pixel(budget: &PhotonBudget, cfg: &SensorConfig) -> f64 {
    budget.total_beam_power * (1.0 - budget.l4_loss) * budget.capture_fraction * cfg.integration_time * cfg.quantum_efficiency
        / (budget.photon_energy * budget.pixel_count as f64)
}

/// One of the six illumination settings of the experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    pub id: u8,
    pub em_gain: f64,
    /// Mean photoelectrons per pixel of the unmodulated beam.
    pub photon_count: f64,
    pub reported_snr: f64,
    pub limit_snr: f64,
    pub filter_attenuation: f64,
    /// Watts.
    pub beam_power: f64,
}

pub const NOISE_LEVELS: [NoiseLevel; 6] = [
    NoiseLevel { id: 1, em_gain: 1.0, photon_count: 1050.0, reported_snr: 20.0, limit_snr: 32.0, filter_attenuation: 1.00e2, beam_power: 4.0e-7 },
    NoiseLevel { id: 2, em_gain: 1.0, photon_count: 85.0, reported_snr: 2.7, limit_snr: 9.2, filter_attenuation: 1.23e3, beam_power: 3.3e-8 },
    NoiseLevel { id: 3, em_gain: 1.0, photon_count: 44.0, reported_snr: 1.45, limit_snr: 6.6, filter_attenuation: 2.38e3, beam_power: 1.7e-8 },
    NoiseLevel { id: 4, em_gain: 4.8, photon_count: 9.9, reported_snr: 0.9, limit_snr: 3.1, filter_attenuation: 1.06e4, beam_power: 3.8e-9 },
    NoiseLevel { id: 5, em_gain: 54.0, photon_count: 1.1, reported_snr: 0.5, limit_snr: 1.0, filter_attenuation: 1.00e5, beam_power: 4.0e-10 },
    NoiseLevel { id: 6, em_gain: 54.0, photon_count: 0.25, reported_snr: 0.24, limit_snr: 0.5, filter_attenuation: 4.15e5, beam_power: 9.6e-11 },
];

impl NoiseLevel {
    pub fn get(id: u8) -> Result<Self> {
        NOISE_LEVELS
            .iter()
            .find(|l| l.id == id)
            .copied()
            .ok_or_else(|| Error::ConfigInvalid(format!("noise level must be 1..=6, got {id}")))
    }

    pub fn budget(&self) -> PhotonBudget {
        PhotonBudget::with_power(self.beam_power, self.filter_attenuation)
    }

    /// Sensor settings of this level on top of `base` (gain and its dark
    /// noise; everything else kept).
    pub fn sensor(&self, base: &SensorConfig) -> SensorConfig {
        SensorConfig {
            em_gain: self.em_gain,
            dark_noise_sigma: base.dark_noise_sigma.or(Some(default_dark_noise(self.em_gain))),
            ..base.clone()
        }
    }

    /// Mean incident photons per pixel that produce `photon_count`
    /// photoelectrons at quantum efficiency `q`.
    pub fn incident_photons(&self, q: f64) -> f64 {
        self.photon_count / q
    }
}

/// Signal-to-noise estimate; `degenerate` marks a zero-variance input
/// (the value is then infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrEstimate {
    pub value: f64,
    pub degenerate: bool,
}

/// Temporal SNR: per-pixel mean over std across frames (after removing
/// `offset`), averaged over pixels with non-zero variance.
pub fn measured_snr(frames: &[IntensityImage], offset: f64) -> Result<SnrEstimate> {
    if frames.len() < 2 {
        return Err(Error::InsufficientFrames(frames.len()));
    }
    let shape = frames[0].shape();
    if frames.iter().any(|f| f.shape() != shape) {
        return Err(Error::GeometryMismatch("frames differ in shape".into()));
    }
    let n = frames.len() as f64;
    let mut sum = 0.0;
    let mut used = 0usize;
    for i in 0..frames[0].len() {
        let mean = frames.iter().map(|f| f.as_slice()[i]).sum::<f64>() / n;
        let var = frames.iter().map(|f| (f.as_slice()[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var > 0.0 {
            sum += (mean - offset) / var.sqrt();
            used += 1;
        }
    }
    Ok(if used == 0 {
        SnrEstimate {
            value: f64::INFINITY,
            degenerate: true,
        }
    } else {
        SnrEstimate {
            value: sum / used as f64,
            degenerate: false,
        }
    })
}

/// Single-frame spatial SNR of a flat region: mean over std of the pixel
/// values after removing `offset`.
pub fn spatial_snr(frame: &IntensityImage, offset: f64) -> SnrEstimate {
    let n = frame.len() as f64;
    let mean = frame.iter().map(|v| v - offset).sum::<f64>() / n;
    let var = frame.iter().map(|v| (v - offset - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var > 0.0 {
        SnrEstimate {
            value: mean / var.sqrt(),
            degenerate: false,
        }
    } else {
        SnrEstimate {
            value: f64::INFINITY,
            degenerate: true,
        }
    }
}
