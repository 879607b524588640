use lowlight::{npcc, pcc, recover_scale, Error, Grid, RealImage};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

/// Pairs of same-shape images that are not constant.
fn image_pair() -> impl Strategy<Value = (RealImage, RealImage)> {
    (2usize..12, 2usize..12).prop_flat_map(|(r, c)| {
        let img = prop::collection::vec(-10.0..10.0f64, r * c)
            .prop_map(move |v| Grid::from_vec(r, c, v).unwrap())
            .prop_filter("non-constant", |g| g.iter().any(|&x| (x - g.as_slice()[0]).abs() > 1e-3));
        (img.clone(), img)
    })
}

fn affine(img: &RealImage, a: f64, b: f64) -> RealImage {
    img.map(|&x| a * x + b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn npcc_is_symmetric_and_bounded((a, b) in image_pair()) {
        let ab = npcc(&a, &b).unwrap();
        let ba = npcc(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 4.0 * f64::EPSILON);
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert_eq!(pcc(&a, &b).unwrap(), -ab);
    }

    #[test]
    fn npcc_ignores_positive_affine_maps(
        (a, b) in image_pair(),
        alpha in 0.01..100.0f64, beta in 0.01..100.0f64,
        c in -50.0..50.0f64, d in -50.0..50.0f64,
    ) {
        let base = npcc(&a, &b).unwrap();
        let moved = npcc(&affine(&a, alpha, c), &affine(&b, beta, d)).unwrap();
        prop_assert!((base - moved).abs() <= 1e-9);
    }

    #[test]
    fn self_and_negated_correlation((a, _) in image_pair()) {
        prop_assert!((npcc(&a, &a).unwrap() + 1.0).abs() <= 1e-12);
        prop_assert!((npcc(&a, &affine(&a, -1.0, 0.0)).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn recovered_scale_is_equivariant((a, b) in image_pair(), k in 0.05..20.0f64) {
        let truths = vec![a];
        let recons = vec![b];
        let alpha = recover_scale(&truths, &recons).unwrap();
        prop_assume!(alpha.abs() > 1e-6);
        let scaled: Vec<RealImage> = recons.iter().map(|r| affine(r, k, 0.0)).collect();
        let alpha_k = recover_scale(&truths, &scaled).unwrap();
        prop_assert!((alpha_k * k - alpha).abs() <= 1e-9 * alpha.abs());
    }
}

#[test]
fn scale_of_half_size_reconstructions() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let u = Uniform::new(-3.0, 3.0).unwrap();
    let truths: Vec<RealImage> = (0..10).map(|_| Grid::from_fn(32, 32, |_, _| u.sample(&mut rng))).collect();
    let half: Vec<RealImage> = truths.iter().map(|t| affine(t, 0.5, 0.0)).collect();
    assert!((recover_scale(&truths, &half).unwrap() - 2.0).abs() < 1e-6);
    assert!((recover_scale(&truths, &truths).unwrap() - 1.0).abs() < 1e-12);

    let noise = Normal::new(0.0, 0.01).unwrap();
    for _ in 0..20 {
        let noisy: Vec<RealImage> = half.iter().map(|h| h.map(|&x| x + noise.sample(&mut rng))).collect();
        let alpha = recover_scale(&truths, &noisy).unwrap();
        assert!((alpha - 2.0).abs() <= 0.05, "alpha {alpha}");
    }
}

#[test]
fn constant_images_are_degenerate() {
    let flat = Grid::filled(4, 4, 2.0);
    let ramp = Grid::from_fn(4, 4, |r, c| (r + c) as f64);
    assert!(matches!(npcc(&flat, &ramp), Err(Error::DegenerateImage(_))));
    assert!(matches!(recover_scale(&[ramp], &[flat]), Err(Error::DegenerateImage(_))));
}
