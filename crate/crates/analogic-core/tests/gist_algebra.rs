//! Exact-algebra contracts of the gist module: worked arithmetic examples,
//! endpoint exactness, linearity, and inversion round-trips.

use analogic_core::gist::{
    apply_gist, interpolate_domain, invert_gist, Domainness, Gist, DOMAINNESS_PRESETS,
};
use analogic_core::{CoreError, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn px(v: f64) -> Tensor<f64> {
    Tensor::scalar(v)
}

#[test]
fn identity_gist_is_a_no_op() {
    let x = Tensor::full([1, 3, 4, 4], 0.5);
    let g = Gist::identity(x.shape());
    let y = apply_gist(&x, &g).unwrap();
    assert_eq!(y, x);
}

#[test]
fn single_pixel_arithmetic() {
    let g = Gist::new(px(0.5), px(0.5)).unwrap();
    let y = apply_gist(&px(0.8), &g).unwrap();
    assert!((y.item() - 0.9).abs() < 1e-15);
}

#[test]
fn interpolation_midpoint_arithmetic() {
    // x = 1.0, m = 0.6, n = 0.2, z = 0.5 → 1.0·(−0.4·0.5 + 1) + 0.1 = 0.9
    let g = Gist::new(px(0.6), px(0.2)).unwrap();
    let y = interpolate_domain(&px(1.0), &g, Domainness::new(0.5).unwrap()).unwrap();
    assert!((y.item() - 0.9).abs() < 1e-15);
}

#[test]
fn interpolation_endpoints_are_bitwise_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for _ in 0..20 {
        let shape = [1, 3, 5, 7];
        let x = Tensor::from_fn(shape, |_| rng.random::<f64>());
        // Awkward alignment values on purpose: (m−1)+1 loses bits for m
        // outside [0.5, 2], so the endpoints must not go through the
        // interpolation formula at all.
        let m = Tensor::from_fn(shape, |_| 0.05 + 3.0 * rng.random::<f64>());
        let n = Tensor::from_fn(shape, |_| rng.random::<f64>() - 0.5);
        let g = Gist::new(m, n).unwrap();
        let at0 = interpolate_domain(&x, &g, Domainness::new(0.0).unwrap()).unwrap();
        let at1 = interpolate_domain(&x, &g, Domainness::new(1.0).unwrap()).unwrap();
        assert_eq!(at0, x, "z = 0 must return the image bit-for-bit");
        assert_eq!(
            at1,
            apply_gist(&x, &g).unwrap(),
            "z = 1 must equal the full translation bit-for-bit"
        );
    }
}

#[test]
fn interpolation_is_the_convex_combination() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let shape = [1, 3, 6, 4];
    for _ in 0..25 {
        let x = Tensor::from_fn(shape, |_| rng.random::<f64>());
        let m = Tensor::from_fn(shape, |_| 0.1 + 2.0 * rng.random::<f64>());
        let n = Tensor::from_fn(shape, |_| rng.random::<f64>() - 0.5);
        let g = Gist::new(m, n).unwrap();
        let z = rng.random::<f64>();
        let lhs = interpolate_domain(&x, &g, Domainness::new(z).unwrap()).unwrap();
        let full = apply_gist(&x, &g).unwrap();
        let rhs = Tensor::from_fn(shape, |i| (1.0 - z) * x.data()[i] + z * full.data()[i]);
        assert!(lhs.max_abs_diff(&rhs) < 1e-10, "affine-in-z identity failed");
    }
}

#[test]
fn application_is_linear_in_the_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let shape = [1, 3, 4, 5];
    for _ in 0..25 {
        let x1 = Tensor::from_fn(shape, |_| rng.random::<f64>());
        let x2 = Tensor::from_fn(shape, |_| rng.random::<f64>());
        let m = Tensor::from_fn(shape, |_| 0.1 + 2.0 * rng.random::<f64>());
        let n = Tensor::from_fn(shape, |_| rng.random::<f64>() - 0.5);
        let g0 = Gist::new(m, Tensor::zeros(shape)).unwrap();
        let a = rng.random::<f64>();
        let mix = Tensor::from_fn(shape, |i| a * x1.data()[i] + (1.0 - a) * x2.data()[i]);
        let lhs = apply_gist(&mix, &g0).unwrap();
        let y1 = apply_gist(&x1, &g0).unwrap();
        let y2 = apply_gist(&x2, &g0).unwrap();
        let rhs = Tensor::from_fn(shape, |i| a * y1.data()[i] + (1.0 - a) * y2.data()[i]);
        assert!(lhs.max_abs_diff(&rhs) < 1e-9, "homogeneous part must be linear");
        // With the additive part back in, affine combination still matches.
        let gn = Gist::new(g0.m().clone(), n).unwrap();
        let lhs = apply_gist(&mix, &gn).unwrap();
        let y1 = apply_gist(&x1, &gn).unwrap();
        let y2 = apply_gist(&x2, &gn).unwrap();
        let rhs = Tensor::from_fn(shape, |i| a * y1.data()[i] + (1.0 - a) * y2.data()[i]);
        assert!(lhs.max_abs_diff(&rhs) < 1e-9, "affine combination must match");
    }
}

#[test]
fn inversion_algebra() {
    let g = Gist::new(px(1.0), px(0.0)).unwrap();
    let gi = invert_gist(&g).unwrap();
    assert_eq!(gi.m().item(), 1.0);
    assert_eq!(gi.n().item(), 0.0);

    let g = Gist::new(px(0.5), px(0.5)).unwrap();
    let gi = invert_gist(&g).unwrap();
    assert!((gi.m().item() - 2.0).abs() < 1e-15);
    assert!((gi.n().item() + 1.0).abs() < 1e-15);
}

#[test]
fn inversion_round_trips_100_random_gists() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let shape = [1, 3, 8, 6];
    for _ in 0..100 {
        let x = Tensor::from_fn(shape, |_| rng.random::<f64>());
        let m = Tensor::from_fn(shape, |_| 0.1 + 1.9 * rng.random::<f64>());
        let n = Tensor::from_fn(shape, |_| rng.random::<f64>() - 0.5);
        let g = Gist::new(m, n).unwrap();
        let gi = invert_gist(&g).unwrap();
        let fwd = apply_gist(&x, &g).unwrap();
        let back = apply_gist(&fwd, &gi).unwrap();
        assert!(
            back.max_abs_diff(&x) < 1e-10,
            "forward-then-inverse must reproduce the image"
        );
    }
}

#[test]
fn domainness_presets_and_range() {
    assert_eq!(DOMAINNESS_PRESETS, [0.88, 0.90]);
    assert!(Domainness::new(0.0).is_ok());
    assert!(Domainness::new(1.0).is_ok());
    assert!(matches!(
        Domainness::new(1.0001),
        Err(CoreError::DomainViolation(_))
    ));
    assert!(matches!(
        Domainness::new(-0.2),
        Err(CoreError::DomainViolation(_))
    ));
    assert!(Domainness::new(f64::NAN).is_err());
}

#[test]
fn invalid_gists_are_rejected() {
    let m = Tensor::full([1, 3, 2, 2], 0.5);
    let n = Tensor::zeros([1, 3, 2, 3]);
    assert!(matches!(
        Gist::new(m.clone(), n),
        Err(CoreError::ShapeMismatch(_))
    ));

    let mut bad = Tensor::full([1, 3, 2, 2], 0.5);
    bad.data_mut()[3] = 0.0;
    assert!(matches!(
        Gist::new(bad, Tensor::zeros([1, 3, 2, 2])),
        Err(CoreError::DomainViolation(_))
    ));

    let x: Tensor<f64> = Tensor::zeros([1, 3, 4, 4]);
    let g = Gist::identity([1, 3, 2, 2]);
    assert!(matches!(
        apply_gist(&x, &g),
        Err(CoreError::ShapeMismatch(_))
    ));
}
