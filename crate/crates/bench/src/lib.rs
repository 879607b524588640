//! Inputs shared by the benchmarks.

use lowlight::dataset::{ForwardModel, ObjectGenerator, ObjectSource};
use lowlight::{ComplexField, Geometry, Grid, IntensityImage, SlmCalibration};
use num_complex::Complex64;

/// A smooth, non-trivial `n x n` field at 8 um pitch.
pub fn test_field(n: usize) -> ComplexField {
    let c = n as f64 / 2.0;
    let data = Grid::from_fn(n, n, |r, col| {
        let (x, y) = ((col as f64 - c) / c, (r as f64 - c) / c);
        let a = (-(x * x + y * y) * 8.0).exp();
        Complex64::from_polar(a, 3.0 * x * y)
    });
    ComplexField::new(data, 8e-6, 632.8e-9).expect("valid field")
}

/// Noiseless detector image of one synthetic chip layout.
pub fn measurement(geometry: &Geometry) -> IntensityImage {
    let model = ForwardModel::new(geometry, &SlmCalibration::synthetic()).expect("forward model");
    let objects = ObjectGenerator::new(&ObjectSource::IcLayout { levels: 8 }, geometry.object_pixels, 1)
        .expect("object generator");
    let gray = objects.generate(0).expect("object");
    model.ideal_intensity(&gray).expect("intensity")
}
