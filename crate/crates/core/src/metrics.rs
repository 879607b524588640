//! Pearson-correlation scoring and histogram-based scale recovery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RealImage;

/// Negative Pearson correlation coefficient of two equally sized images.
///
/// `-1` is a perfect (positively affine) match. A constant image has no
/// correlation and yields [`Error::DegenerateImage`].
pub fn npcc(a: &RealImage, b: &RealImage) -> Result<f64> {
    Ok(-pcc(a, b)?)
}

pub fn pcc(a: &RealImage, b: &RealImage) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::PairingError(format!(
            "image shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    pcc_slices(a.as_slice(), b.as_slice())
}

pub fn pcc_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::PairingError("slices must be equal and non-empty".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateImage("constant image has zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Score of one reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub example_id: u64,
    pub split: String,
    pub noise_level: u8,
    pub method: String,
    pub pcc: f64,
    pub npcc: f64,
    pub scale_factor: f64,
}

impl MetricsRecord {
    pub fn new(example_id: u64, split: &str, noise_level: u8, method: &str, pcc: f64, scale_factor: f64) -> Self {
        Self {
            example_id,
            split: split.to_owned(),
            noise_level,
            method: method.to_owned(),
            pcc,
            npcc: -pcc,
            scale_factor,
        }
    }
}

/// Linear-interpolation quantile (type 7) of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn pooled_quantiles(images: &[RealImage]) -> Result<Vec<f64>> {
    let mut pool: Vec<f64> = images.iter().flat_map(|i| i.iter().copied()).collect();
    if pool.is_empty() {
        return Err(Error::PairingError("empty image set".into()));
    }
    pool.sort_by(f64::total_cmp);
    if pool.first() == pool.last() {
        return Err(Error::DegenerateImage("constant pixel pool".into()));
    }
    Ok((1..=99).map(|p| quantile_sorted(&pool, p as f64 / 100.0)).collect())
}

/// Multiplicative factor `alpha` that best maps reconstruction pixel
/// values onto ground-truth values: least squares between the 1%..99%
/// quantiles of the pooled truth pixels and `alpha` times those of the
/// pooled reconstruction pixels.
pub fn recover_scale(ground_truths: &[RealImage], reconstructions: &[RealImage]) -> Result<f64> {
    if ground_truths.len() != reconstructions.len() {
        return Err(Error::PairingError(format!(
            "{} ground truths vs {} reconstructions",
            ground_truths.len(),
            reconstructions.len()
        )));
    }
    let t = pooled_quantiles(ground_truths)?;
    let r = pooled_quantiles(reconstructions)?;
    let num: f64 = t.iter().zip(&r).map(|(a, b)| a * b).sum();
    let den: f64 = r.iter().map(|b| b * b).sum();
    if den == 0.0 {
        return Err(Error::DegenerateImage("reconstruction quantiles are all zero".into()));
    }
    Ok(num / den)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn ramp() -> RealImage {
        Grid::from_fn(4, 5, |r, c| (r * 5 + c) as f64 * 0.3 + ((r * c) as f64).sin())
    }

    #[test]
    fn identities() {
        let a = ramp();
        assert!((npcc(&a, &a).unwrap() + 1.0).abs() < 1e-15);
        let neg = a.map(|v| -v);
        assert!((npcc(&a, &neg).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_image_is_degenerate() {
        let a = ramp();
        let c = Grid::filled(4, 5, 2.0);
        assert!(matches!(npcc(&a, &c), Err(Error::DegenerateImage(_))));
        assert!(matches!(npcc(&c, &a), Err(Error::DegenerateImage(_))));
    }

    #[test]
    fn shape_mismatch_is_pairing_error() {
        let a = ramp();
        let b = Grid::filled(5, 4, 1.0);
        assert!(matches!(npcc(&a, &b), Err(Error::PairingError(_))));
    }

    #[test]
    fn record_sign_convention() {
        let r = MetricsRecord::new(3, "test", 5, "gs", 0.42, 1.0);
        assert_eq!(r.npcc, -r.pcc);
    }

    #[test]
    fn scale_exact_cases() {
        let t = vec![ramp(), ramp().map(|v| v * 2.0 - 1.0)];
        let half: Vec<_> = t.iter().map(|i| i.map(|v| 0.5 * v)).collect();
        assert!((recover_scale(&t, &half).unwrap() - 2.0).abs() < 1e-12);
        assert!((recover_scale(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(recover_scale(&t, &half[..1]).is_err());
        let flat = vec![Grid::filled(3, 3, 1.0)];
        assert!(matches!(recover_scale(&flat, &flat), Err(Error::DegenerateImage(_))));
    }

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&s, 0.5), 1.5);
        assert_eq!(quantile_sorted(&s, 1.0), 3.0);
        assert_eq!(quantile_sorted(&s, 0.0), 0.0);
    }

    #[test]
    fn mean_std_basic() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }
}
