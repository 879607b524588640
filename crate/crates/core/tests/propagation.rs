use std::f64::consts::PI;

use lowlight::propagation::{max_transfer_distance, min_padded_size};
use lowlight::{propagate, ComplexField, Grid, PropagationPlan};
use num_complex::Complex64;
use proptest::prelude::*;

const PITCH: f64 = 8e-6;
const LAMBDA: f64 = 632.8e-9;

fn field(n: usize, values: &[(f64, f64)]) -> ComplexField {
    let data = values.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    ComplexField::new(Grid::from_vec(n, n, data).unwrap(), PITCH, LAMBDA).unwrap()
}

fn energy(f: &ComplexField) -> f64 {
    f.data().iter().map(|z| z.norm_sqr()).sum()
}

fn rel_rms(a: &ComplexField, b: &ComplexField) -> f64 {
    let num: f64 = a.data().iter().zip(b.data().iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    (num / energy(b)).sqrt()
}

/// A square random field with its side.
fn random_field() -> impl Strategy<Value = ComplexField> {
    (8usize..40).prop_flat_map(|n| {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n).prop_map(move |v| field(n, &v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transfer_function_is_unitary(f in random_field(), pad in 0usize..24, t in -1.0..1.0f64) {
        let n = f.shape().0 + pad;
        let l = t * max_transfer_distance(n, PITCH, LAMBDA);
        let out = propagate(&f, &PropagationPlan::transfer_function(l, n)).unwrap();
        let (e0, e1) = (energy(&f), energy(&out));
        prop_assert!((e1 - e0).abs() / e0 <= 1e-10, "energy {e0} -> {e1}");
    }

    #[test]
    fn back_propagation_inverts(f in random_field(), t in -1.0..1.0f64) {
        let n = f.shape().0;
        let l = t * max_transfer_distance(n, PITCH, LAMBDA);
        let there = propagate(&f, &PropagationPlan::transfer_function(l, n)).unwrap();
        let back = propagate(&there, &PropagationPlan::transfer_function(-l, n)).unwrap();
        prop_assert!(rel_rms(&back, &f) <= 1e-10);
    }

    #[test]
    fn distances_add(f in random_field(), a in -0.5..0.5f64, b in -0.5..0.5f64) {
        let n = f.shape().0;
        let bound = max_transfer_distance(n, PITCH, LAMBDA);
        let (l1, l2) = (a * bound, b * bound);
        let plan = |l| PropagationPlan::transfer_function(l, n);
        let two_steps = propagate(&propagate(&f, &plan(l1)).unwrap(), &plan(l2)).unwrap();
        let one_step = propagate(&f, &plan(l1 + l2)).unwrap();
        prop_assert!(rel_rms(&two_steps, &one_step) <= 1e-8);
    }

    #[test]
    fn gaussian_beam_matches_closed_form(w_px in 6.0..12.0f64, l in 0.005..0.05f64) {
        let n = 512;
        prop_assume!(l <= max_transfer_distance(n, PITCH, LAMBDA));
        let w0 = w_px * PITCH;
        let c = (n / 2) as f64;
        let r2 = |r: usize, col: usize| ((r as f64 - c).powi(2) + (col as f64 - c).powi(2)) * PITCH * PITCH;
        let start = Grid::from_fn(n, n, |r, col| Complex64::new((-r2(r, col) / (w0 * w0)).exp(), 0.0));
        let start = ComplexField::new(start, PITCH, LAMBDA).unwrap();
        let out = propagate(&start, &PropagationPlan::transfer_function(l, n)).unwrap();

        // u(r, L) = exp(-r^2 / (w0^2 q)) / q with q = 1 + i L / zR
        let z_r = PI * w0 * w0 / LAMBDA;
        let q = Complex64::new(1.0, l / z_r);
        let peak = 1.0 / q.norm();
        let max_err = (0..n)
            .flat_map(|r| (0..n).map(move |col| (r, col)))
            .map(|(r, col)| {
                let want = (-r2(r, col) / (w0 * w0 * q)).exp() / q;
                (out.data().get(r, col) - want).norm()
            })
            .fold(0.0f64, f64::max);
        prop_assert!(max_err / peak <= 1e-6, "pointwise error {}", max_err / peak);

        let on_axis = out.data().get(n / 2, n / 2).norm();
        prop_assert!((on_axis - peak).abs() / peak <= 1e-6);

        // intensity exp(-2 r^2 / w^2) has <x^2> = w^2 / 4
        let (mut m0, mut m2) = (0.0, 0.0);
        for r in 0..n {
            for col in 0..n {
                let i = out.data().get(r, col).norm_sqr();
                m0 += i;
                m2 += i * (col as f64 - c).powi(2) * PITCH * PITCH;
            }
        }
        let width = 2.0 * (m2 / m0).sqrt();
        let want = w0 * (1.0 + (l / z_r).powi(2)).sqrt();
        prop_assert!((width - want).abs() / want <= 1e-6, "width {width} vs {want}");
    }
}

#[test]
fn paper_geometry_minimum_window() {
    // lambda L / dx^2 = 0.4 * 632.8e-9 / 64e-12
    assert_eq!(min_padded_size(0.4, PITCH, LAMBDA), 3955);
    let f = field(4, &[(1.0, 0.0); 16]);
    assert!(propagate(&f, &PropagationPlan::transfer_function(0.4, 3954)).is_err());
    assert!(PropagationPlan::transfer_function(0.4, 3955).validate(&f).is_ok());
}
