//! Input preparation for the end-to-end network: the raw measurement is
//! cropped to a centred square and bilinearly shrunk to the object size.

use crate::error::{Error, Result};
use crate::grid::{Grid, RealImage};

/// Central `min(rows, cols)` square crop, then bilinear interpolation to
/// `size x size`.
pub fn resample_for_end_to_end(measurement: &RealImage, size: usize) -> Result<RealImage> {
    if size == 0 || measurement.is_empty() {
        return Err(Error::GeometryMismatch(format!(
            "cannot resample {:?} to {size}x{size}",
            measurement.shape()
        )));
    }
    let side = measurement.rows().min(measurement.cols());
    let square = measurement.crop_center(side, side)?;
    Ok(bilinear(&square, size, size))
}

/// Bilinear resize with pixel-centre alignment; samples beyond the edge
/// are clamped to it.
pub fn bilinear(src: &RealImage, rows: usize, cols: usize) -> RealImage {
    let (sr, sc) = src.shape();
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|i| {
                let x = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = x.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, x - i0 as f64)
            })
            .collect()
    };
    let ys = axis(rows, sr);
    let xs = axis(cols, sc);
    Grid::from_fn(rows, cols, |r, c| {
        let (y0, y1, fy) = ys[r];
        let (x0, x1, fx) = xs[c];
        let top = src[(y0, x0)] * (1.0 - fx) + src[(y0, x1)] * fx;
        let bottom = src[(y1, x0)] * (1.0 - fx) + src[(y1, x1)] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let m = Grid::filled(1004, 1002, 7.5);
        let out = resample_for_end_to_end(&m, 256).unwrap();
        assert_eq!(out.shape(), (256, 256));
        assert!(out.iter().all(|&v| v == 7.5));
    }

    #[test]
    fn affine_ramp_is_reproduced() {
        // value at pixel centre (r, c) of the square is a + b r + c c
        let (a, b, c) = (3.0, 0.25, -0.125);
        let m = Grid::from_fn(104, 100, |r, col| a + b * (r as f64 - 2.0) + c * col as f64);
        let out = resample_for_end_to_end(&m, 20).unwrap();
        let scale = 100.0 / 20.0;
        for r in 0..20 {
            for col in 0..20 {
                let y = (r as f64 + 0.5) * scale - 0.5;
                let x = (col as f64 + 0.5) * scale - 0.5;
                assert!((out[(r, col)] - (a + b * y + c * x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn crop_is_centred() {
        let m = Grid::from_fn(6, 4, |r, c| (r * 10 + c) as f64);
        let out = resample_for_end_to_end(&m, 4).unwrap();
        assert_eq!(out[(0, 0)], 10.0);
        assert_eq!(out[(3, 3)], 43.0);
        assert!(resample_for_end_to_end(&m, 0).is_err());
    }

    #[test]
    fn mean_of_smooth_image_is_kept() {
        use std::f64::consts::PI;
        let n = 1002;
        let f = |y: f64, x: f64| 2.0 + (2.0 * PI * y).sin() * (PI * x).cos() + (-(x - 0.5).powi(2) * 8.0).exp();
        let m = Grid::from_fn(1004, n, |r, c| f((r as f64 - 1.0) / n as f64, (c as f64 + 0.5) / n as f64));
        let out = resample_for_end_to_end(&m, 256).unwrap();
        // dense midpoint quadrature over the unit square
        let q = 2000;
        let mut exact = 0.0;
        for i in 0..q {
            for j in 0..q {
                exact += f((i as f64 + 0.5) / q as f64, (j as f64 + 0.5) / q as f64);
            }
        }
        exact /= (q * q) as f64;
        assert!((out.mean() - exact).abs() / exact < 0.02);
    }
}
