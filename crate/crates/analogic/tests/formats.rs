//! Round-trip and validation tests for the on-disk formats: PNG codecs,
//! the dataset manifest, and the checkpoint container.

use analogic::checkpoint::{load_checkpoint, save_checkpoint};
use analogic::manifest::{
    load_manifest, save_manifest, DepthQuantization, Entry, FogSpec, Manifest, Split,
};
use analogic::pngio::{load_depth16, load_rgb, save_depth16, save_rgb, save_strip, DepthRange};
use analogic::AppError;
use analogic_core::net::{build_model, ArchConfig};
use analogic_core::train::{make_optimizers, TrainConfig};
use analogic_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_arch() -> ArchConfig {
    ArchConfig {
        width: 4,
        res_blocks: 1,
        downsamples: 1,
        image_h: 8,
        image_w: 8,
        enc_kernel: 3,
        disc_width: 4,
        disc_layers: 1,
        disc_kernel: 3,
    }
}

#[test]
fn rgb_png_round_trips_quantized_values_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.png");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Values already on the 8-bit grid survive the codec bit-for-bit.
    let x = Tensor::from_fn([1, 3, 6, 5], |_| {
        (rng.random_range(0.0f32..1.0) * 255.0).round() / 255.0
    });
    save_rgb(&path, &x).unwrap();
    let back = load_rgb(&path).unwrap();
    assert_eq!(back.shape(), x.shape());
    assert_eq!(back.data(), x.data());
}

#[test]
fn rgb_png_quantization_error_is_at_most_half_a_level() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.png");
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = Tensor::from_fn([1, 3, 7, 9], |_| rng.random_range(0.0f32..1.0));
    save_rgb(&path, &x).unwrap();
    let back = load_rgb(&path).unwrap();
    assert!(back.max_abs_diff(&x) <= 0.5 / 255.0 + 1e-7);
}

#[test]
fn depth_png_round_trips_on_the_16_bit_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.png");
    let range = DepthRange::new(0.1, 40.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let d = Tensor::from_fn([1, 1, 6, 6], |_| rng.random_range(0.1..40.0));
    save_depth16(&path, &d, range).unwrap();
    let back = load_depth16(&path, range).unwrap();
    // One 16-bit step spans (40 − 0.1)/65535 ≈ 6.1e-4 m.
    assert!(back.max_abs_diff(&d) <= 0.5 * (40.0 - 0.1) / 65535.0 + 1e-12);
    // A second trip through the codec is exact: the first trip already
    // snapped to the grid.
    save_depth16(&path, &back, range).unwrap();
    let again = load_depth16(&path, range).unwrap();
    assert_eq!(again.data(), back.data());
}

#[test]
fn depth_range_rejects_degenerate_bounds() {
    assert!(DepthRange::new(1.0, 1.0).is_err());
    assert!(DepthRange::new(2.0, 1.0).is_err());
    assert!(DepthRange::new(f64::NAN, 1.0).is_err());
}

#[test]
fn strip_concatenates_widths_and_demands_equal_heights() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("strip.png");
    let a = Tensor::<f32>::full([1, 3, 4, 5], 0.25);
    let b = Tensor::<f32>::full([1, 3, 4, 7], 0.75);
    save_strip(&path, &[&a, &b]).unwrap();
    let img = image::open(&path).unwrap();
    // Two panels plus the 2-px divider.
    assert_eq!(img.width(), 5 + 2 + 7);
    assert_eq!(img.height(), 4);

    let c = Tensor::<f32>::full([1, 3, 3, 5], 0.5);
    assert!(save_strip(&path, &[&a, &c]).is_err());
}

fn sample_manifest(dir: &std::path::Path) -> Manifest {
    let range = DepthRange::new(0.1, 40.0).unwrap();
    let clear = Tensor::<f32>::full([1, 3, 4, 4], 0.5);
    let depth = Tensor::<f64>::full([1, 1, 4, 4], 10.0);
    let mut entries = Vec::new();
    for (i, split) in [Split::Source, Split::TargetTrain, Split::HeldoutOracle]
        .into_iter()
        .enumerate()
    {
        let id = format!("e{i}");
        let clear_rel = format!("{id}_clear.png");
        let depth_rel = format!("{id}_depth.png");
        save_rgb(&dir.join(&clear_rel), &clear).unwrap();
        save_depth16(&dir.join(&depth_rel), &depth, range).unwrap();
        let foggy_rel = if split == Split::TargetTrain {
            None
        } else {
            let rel = format!("{id}_foggy.png");
            save_rgb(&dir.join(&rel), &clear).unwrap();
            Some(rel)
        };
        entries.push(Entry {
            id,
            split,
            clear_path: clear_rel,
            depth_path: depth_rel,
            foggy_path: foggy_rel,
            fog: FogSpec {
                beta: 0.1,
                airlight: [0.9, 0.9, 0.9],
            },
        });
    }
    Manifest {
        schema: "analogic-manifest/1".into(),
        image_h: 4,
        image_w: 4,
        far_plane: 40.0,
        depth_quantization: DepthQuantization {
            min_depth: 0.1,
            max_depth: 40.0,
            bits: 16,
        },
        entries,
    }
}

#[test]
fn manifest_round_trips_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let m = sample_manifest(dir.path());
    let path = dir.path().join("manifest.json");
    save_manifest(&path, &m).unwrap();
    let loaded = load_manifest(&path).unwrap();
    assert_eq!(loaded.manifest, m);
    assert_eq!(loaded.manifest.count(Split::Source), 1);
}

#[test]
fn manifest_rejects_schema_and_split_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    // Bypass save-side validation so the load path is what's under test
    // (simulating a hand-edited file).
    let write_raw = |m: &Manifest| {
        std::fs::write(&path, serde_json::to_string(m).unwrap()).unwrap();
    };

    let mut bad_schema = sample_manifest(dir.path());
    bad_schema.schema = "analogic-manifest/2".into();
    write_raw(&bad_schema);
    assert!(matches!(load_manifest(&path), Err(AppError::Mismatch(_))));
    // Saving validates the same invariants.
    assert!(save_manifest(&path, &bad_schema).is_err());

    // A target-train entry carrying a foggy render breaks the zero-shot
    // layout.
    let mut leaky = sample_manifest(dir.path());
    leaky.entries[1].foggy_path = Some(leaky.entries[0].foggy_path.clone().unwrap());
    write_raw(&leaky);
    assert!(load_manifest(&path).is_err());

    // A held-out entry without its oracle render is unevaluable.
    let mut missing = sample_manifest(dir.path());
    missing.entries[2].foggy_path = None;
    write_raw(&missing);
    assert!(load_manifest(&path).is_err());

    let mut dup = sample_manifest(dir.path());
    dup.entries[1].id = dup.entries[0].id.clone();
    write_raw(&dup);
    assert!(load_manifest(&path).is_err());
}

#[test]
fn manifest_rejects_dangling_file_references() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = sample_manifest(dir.path());
    m.entries[0].clear_path = "nope.png".into();
    let path = dir.path().join("manifest.json");
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    assert!(load_manifest(&path).is_err());
}

#[test]
fn checkpoint_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt_3.analogic");
    let cfg = TrainConfig {
        arch: tiny_arch(),
        ..TrainConfig::default()
    };
    let mut model = build_model::<f32>(&cfg.arch, 5).unwrap();
    let (mut og, mut od) = make_optimizers(&model, &cfg).unwrap();
    // Touch the optimizer state so moments are non-trivial.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for p in 0..model.params.len() {
        let t = model.params.get_mut(analogic_core::graph::ParamId(p));
        for v in t.data_mut() {
            *v += rng.random_range(-0.01..0.01);
        }
    }
    save_checkpoint(&path, &model, &og, &od, 3, &cfg).unwrap();

    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.step, 3);
    assert_eq!(loaded.train, cfg);
    for p in 0..model.params.len() {
        let id = analogic_core::graph::ParamId(p);
        assert_eq!(
            loaded.model.params.get(id).data(),
            model.params.get(id).data(),
            "parameter {} differs",
            model.params.name(id)
        );
    }
    let (m0, v0, t0) = og.state();
    let (m1, v1, t1) = loaded.opt_gen.state();
    assert_eq!(t0, t1);
    for (a, b) in m0.iter().zip(m1) {
        assert_eq!(a.data(), b.data());
    }
    for (a, b) in v0.iter().zip(v1) {
        assert_eq!(a.data(), b.data());
    }
    let (_, _, td) = od.state();
    let (_, _, td1) = loaded.opt_disc.state();
    assert_eq!(td, td1);

    // Saving the loaded state again reproduces the file byte-for-byte.
    let path2 = dir.path().join("again.analogic");
    save_checkpoint(
        &path2,
        &loaded.model,
        &loaded.opt_gen,
        &loaded.opt_disc,
        loaded.step,
        &loaded.train,
    )
    .unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap()
    );
}

#[test]
fn checkpoint_rejects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.analogic");
    let cfg = TrainConfig {
        arch: tiny_arch(),
        ..TrainConfig::default()
    };
    let model = build_model::<f32>(&cfg.arch, 5).unwrap();
    let (og, od) = make_optimizers(&model, &cfg).unwrap();
    save_checkpoint(&path, &model, &og, &od, 1, &cfg).unwrap();

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xFF;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(AppError::Mismatch(_))));
    bytes[0] ^= 0xFF;

    // Truncated tensor payload.
    std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
    assert!(load_checkpoint(&path).is_err());
}
