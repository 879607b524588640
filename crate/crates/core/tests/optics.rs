use std::f64::consts::TAU;

use lowlight::{incident_field, slm_transmittance, BeamModel, Coverage, Geometry, Grid, Modulation, SlmCalibration};
use proptest::prelude::*;

#[test]
fn detector_captures_69_percent_of_the_beam() {
    let g = Geometry::paper();
    let beam = g.beam;
    let quad = beam.capture_fraction(g.detector_cols as f64 * 8e-6, g.detector_rows as f64 * 8e-6);

    // pixel sums at 4 um over the whole disc and over the detector
    let pitch = 4e-6;
    let n = 4400;
    let f = incident_field(&beam, (n, n), pitch, g.wavelength, Coverage::FullAperture).unwrap();
    let (h, w) = (2 * g.detector_rows, 2 * g.detector_cols);
    let (r0, c0) = (n / 2 - h / 2, n / 2 - w / 2);
    let mut total = 0.0;
    let mut inside = 0.0;
    for r in 0..n {
        for c in 0..n {
            let i = f.data().get(r, c).norm_sqr();
            total += i;
            if (r0..r0 + h).contains(&r) && (c0..c0 + w).contains(&c) {
                inside += i;
            }
        }
    }
    let pixel_sum = inside / total;
    assert!((pixel_sum - 0.69).abs() <= 0.01, "pixel sum {pixel_sum}");
    assert!((quad - pixel_sum).abs() < 2e-3, "quadrature {quad} vs pixel sum {pixel_sum}");
}

#[test]
fn beam_peaks_at_centre_and_vanishes_at_the_rim() {
    let beam = BeamModel::bessel(8.5e-3);
    assert_eq!(beam.amplitude_at(0.0), 1.0);
    assert!(beam.amplitude_at(8.5e-3).abs() < 1e-15);
    assert_eq!(beam.amplitude_at(9e-3), 0.0);
}

#[test]
fn synthetic_calibration_values() {
    let cal = SlmCalibration::synthetic();
    assert_eq!(cal.phase_lut()[0], 0.0);
    assert_eq!(cal.amplitude_lut()[0], 1.0);
    assert!((cal.phase_lut()[128] - 128.0 * TAU / 255.0).abs() < 1e-15);
}

#[test]
fn object_extent_in_the_image_plane() {
    let g = Geometry::paper();
    // 256 * 36 um / 2.3
    assert!((g.object_extent() - 4.006_956_5e-3).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transmittance_is_a_pixelwise_lookup(
        pixels in prop::collection::vec(any::<u8>(), 48),
        perm in Just((0..48usize).collect::<Vec<_>>()).prop_shuffle(),
        ripple in 0.0..0.5f64,
    ) {
        let cal = SlmCalibration::synthetic_with_ripple(ripple);
        let a = Grid::from_vec(6, 8, pixels.clone()).unwrap();
        let b = Grid::from_vec(6, 8, perm.iter().map(|&i| pixels[i]).collect()).unwrap();
        let ta = slm_transmittance(&a, &cal, Modulation::Full, 1e-5, 6e-7).unwrap();
        let tb = slm_transmittance(&b, &cal, Modulation::Full, 1e-5, 6e-7).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(tb.data().as_slice()[k], ta.data().as_slice()[i]);
        }
        let pure = slm_transmittance(&a, &cal, Modulation::PhaseOnly, 1e-5, 6e-7).unwrap();
        for z in pure.data().iter() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn incident_beam_is_point_symmetric(half_r in 3usize..40, half_c in 3usize..40, radius_px in 2.0..30.0f64) {
        let (rows, cols) = (2 * half_r + 1, 2 * half_c + 1);
        let pitch = 1e-5;
        let beam = BeamModel::bessel(radius_px * pitch);
        let f = incident_field(&beam, (rows, cols), pitch, 6e-7, Coverage::CentralCrop).unwrap();
        for r in 0..rows {
            for c in 0..cols {
                let z = f.data().get(r, c);
                prop_assert_eq!(z, f.data().get(rows - 1 - r, cols - 1 - c));
                prop_assert!(z.im == 0.0 && z.re >= 0.0);
            }
        }
    }
}
