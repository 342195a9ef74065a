//! Fog optics against its limits and worked values, the closed-form gist
//! against the renderer, and the determinism/shape/style contracts of the
//! procedural scenes.

use analogic_core::fog::{oracle_gist, render_fog, FogParams};
use analogic_core::gist::{apply_gist, invert_gist};
use analogic_core::scene::{generate_scene, SceneSpec, Style, NEAR_DEPTH};
use analogic_core::{CoreError, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(seed: u64, style: Style) -> SceneSpec {
    SceneSpec {
        seed,
        width: 64,
        height: 32,
        object_count: 6,
        style,
        far_plane: 10.0,
    }
}

#[test]
fn no_fog_limit_returns_clear_image() {
    let (clear, _) = generate_scene(&spec(1, Style::Source)).unwrap();
    let depth = Tensor::full([1, 1, 32, 64], 0.1);
    let p = FogParams::new(1e-9, [0.9, 0.9, 0.9]).unwrap();
    let foggy = render_fog(&clear, &depth, p).unwrap();
    assert!(foggy.max_abs_diff(&clear) < 1e-9);
}

#[test]
fn deep_fog_limit_returns_airlight() {
    let (clear, _) = generate_scene(&spec(2, Style::Source)).unwrap();
    let depth = Tensor::full([1, 1, 32, 64], 1e6);
    let p = FogParams::new(0.01, [0.82, 0.85, 0.9]).unwrap();
    let foggy = render_fog(&clear, &depth, p).unwrap();
    for ch in 0..3 {
        for i in 0..32 * 64 {
            assert!((foggy.data()[ch * 32 * 64 + i] - p.airlight[ch]).abs() < 1e-4);
        }
    }
}

#[test]
fn half_transmittance_arithmetic() {
    // clear 0.8 at one meter with β = ln 2 and white airlight → 0.9
    let clear = Tensor::full([1, 3, 1, 1], 0.8);
    let depth = Tensor::full([1, 1, 1, 1], 1.0);
    let p = FogParams::new(std::f64::consts::LN_2, [1.0, 1.0, 1.0]).unwrap();
    let foggy = render_fog(&clear, &depth, p).unwrap();
    for &v in foggy.data() {
        assert!((v - 0.9).abs() < 1e-12);
    }

    let g = oracle_gist(&depth, p).unwrap();
    for &v in g.m().data() {
        assert!((v - 0.5).abs() < 1e-12);
    }
    for &v in g.n().data() {
        assert!((v - 0.5).abs() < 1e-12);
    }
    // Reverse direction: defogging gist is (2, −1).
    let gi = invert_gist(&g).unwrap();
    for &v in gi.m().data() {
        assert!((v - 2.0).abs() < 1e-12);
    }
    for &v in gi.n().data() {
        assert!((v + 1.0).abs() < 1e-12);
    }
}

#[test]
fn oracle_gist_vanishes_at_zero_depth() {
    let depth = Tensor::full([1, 1, 2, 2], 1e-12);
    let p = FogParams::new(0.8, [0.8, 0.8, 0.8]).unwrap();
    let g = oracle_gist(&depth, p).unwrap();
    for &v in g.m().data() {
        assert!((v - 1.0).abs() < 1e-9);
    }
    for &v in g.n().data() {
        assert!(v.abs() < 1e-9);
    }
}

#[test]
fn oracle_gist_reproduces_renderer_on_100_scenes() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for i in 0..100 {
        let style = if i % 2 == 0 { Style::Source } else { Style::Target };
        let (clear, depth) = generate_scene(&spec(1000 + i, style)).unwrap();
        let p = FogParams::new(
            0.3 + 1.2 * rng.random::<f64>(),
            [
                0.7 + 0.3 * rng.random::<f64>(),
                0.7 + 0.3 * rng.random::<f64>(),
                0.7 + 0.3 * rng.random::<f64>(),
            ],
        )
        .unwrap();
        let via_renderer = render_fog(&clear, &depth, p).unwrap();
        let via_gist = apply_gist(&clear, &oracle_gist(&depth, p).unwrap()).unwrap();
        assert!(
            via_gist.max_abs_diff(&via_renderer) < 1e-12,
            "closed-form gist must reproduce the renderer (scene {i})"
        );
    }
}

#[test]
fn fog_deviation_grows_with_depth() {
    // On a depth ramp, |foggy − clear| is non-decreasing wherever the clear
    // pixel differs from the airlight.
    let w = 64;
    let clear = Tensor::full([1, 3, 1, w], 0.2);
    let depth = Tensor::from_fn([1, 1, 1, w], |i| 0.5 + 0.2 * i as f64);
    let p = FogParams::new(0.7, [0.9, 0.9, 0.9]).unwrap();
    let foggy = render_fog(&clear, &depth, p).unwrap();
    for ch in 0..3 {
        let mut prev = -1.0;
        for i in 0..w {
            let dev = (foggy.data()[ch * w + i] - 0.2).abs();
            assert!(dev >= prev - 1e-12, "deviation must not shrink with depth");
            prev = dev;
        }
    }
}

#[test]
fn scenes_are_deterministic_and_correctly_shaped() {
    let s = spec(77, Style::Target);
    let (img1, dep1) = generate_scene(&s).unwrap();
    let (img2, dep2) = generate_scene(&s).unwrap();
    assert_eq!(img1, img2, "same spec must render bit-identically");
    assert_eq!(dep1, dep2);
    assert_eq!(img1.shape(), [1, 3, 32, 64]);
    assert_eq!(dep1.shape(), [1, 1, 32, 64]);
    assert!(img1.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(dep1.data().iter().all(|&d| (NEAR_DEPTH..=10.0).contains(&d)));
}

#[test]
fn styles_share_geometry_but_differ_in_color() {
    let (src, dsrc) = generate_scene(&spec(5, Style::Source)).unwrap();
    let (tgt, dtgt) = generate_scene(&spec(5, Style::Target)).unwrap();
    assert_eq!(dsrc, dtgt, "style must not move geometry");
    let hw = 32 * 64;
    for ch in 0..3 {
        let mut acc = 0.0;
        for i in 0..hw {
            acc += (src.data()[ch * hw + i] - tgt.data()[ch * hw + i]).abs();
        }
        let mean = acc / hw as f64;
        assert!(
            mean > 0.05,
            "channel {ch}: styles too similar (mean abs diff {mean:.4})"
        );
    }
}

#[test]
fn degenerate_scene_specs_are_rejected() {
    let mut s = spec(1, Style::Source);
    s.width = 0;
    assert!(matches!(
        generate_scene(&s),
        Err(CoreError::InvalidConfig(_))
    ));
    let mut s = spec(1, Style::Source);
    s.far_plane = 0.5;
    assert!(generate_scene(&s).is_err());
}

#[test]
fn invalid_fog_params_and_depth_are_rejected() {
    assert!(FogParams::new(0.0, [0.5, 0.5, 0.5]).is_err());
    assert!(FogParams::new(-1.0, [0.5, 0.5, 0.5]).is_err());
    assert!(FogParams::new(0.5, [1.2, 0.5, 0.5]).is_err());

    let clear = Tensor::full([1, 3, 2, 2], 0.5);
    let mut depth = Tensor::full([1, 1, 2, 2], 1.0);
    depth.data_mut()[1] = 0.0;
    let p = FogParams::new(0.5, [0.8, 0.8, 0.8]).unwrap();
    assert!(matches!(
        render_fog(&clear, &depth, p),
        Err(CoreError::DomainViolation(_))
    ));
}
