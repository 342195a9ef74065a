//! Procedural dataset builder: paired clear/foggy source samples, clear-only
//! target samples, and a held-out target split that carries the ground-truth
//! foggy render for evaluation only.
//!
//! Everything stored is quantized — images to 8 bits, depth to 16 bits over
//! `[0.1, far]` — and the foggy renders are computed *from the quantized*
//! clear image and depth map, so a consumer re-rendering from the files
//! reproduces the stored foggy PNG up to its own 8-bit rounding. Builds are
//! pure functions of the config: rebuilding yields byte-identical files.

use std::fs;
use std::path::Path;

use analogic_core::fog::{render_fog, FogParams};
use analogic_core::scene::{generate_scene, SceneSpec, Style};
use analogic_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::manifest::{save_manifest, DepthQuantization, Entry, FogSpec, Manifest, Split, SCHEMA};
use crate::pngio::{save_depth16, save_rgb, DepthRange};

/// Meter value of depth code 0 in stored 16-bit maps.
pub const DEPTH_QUANT_MIN: f64 = 0.1;

/// Total downsampling factor of the toy generator; dataset resolutions
/// must divide by it or training would reject every image.
pub const SIZE_DIVISOR: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub source_pairs: usize,
    pub target_train: usize,
    pub heldout: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub seed: u64,
    /// Scene far plane, meters; also the depth quantization maximum.
    pub far_plane: f64,
    /// Fog density sampled uniformly per entry. The default spans light
    /// haze to near-opaque at the far plane (optical depth β·far from 3
    /// to 15, matching a dense-fog testbed at this scene scale).
    pub beta_range: [f64; 2],
    /// Airlight intensity sampled uniformly per entry, gray (equal
    /// channels).
    pub airlight_range: [f64; 2],
    /// Scene clutter, sampled uniformly inclusive.
    pub object_count_range: [usize; 2],
    /// Multiplicative noise amplitude on *stored target-train depth only*,
    /// emulating estimated rather than exact depth. 0 keeps depth exact.
    pub target_depth_noise: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source_pairs: 256,
            target_train: 256,
            heldout: 64,
            image_h: 32,
            image_w: 64,
            seed: 7,
            far_plane: 40.0,
            beta_range: [0.075, 0.375],
            airlight_range: [0.85, 0.95],
            object_count_range: [3, 8],
            target_depth_noise: 0.0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.source_pairs == 0 || self.target_train == 0 || self.heldout == 0 {
            return Err(AppError::Config(
                "every split needs at least one entry".into(),
            ));
        }
        if !self.image_h.is_multiple_of(SIZE_DIVISOR) || !self.image_w.is_multiple_of(SIZE_DIVISOR)
        {
            return Err(AppError::Config(format!(
                "image size {}x{} is not divisible by the generator's downsampling factor {SIZE_DIVISOR}",
                self.image_w, self.image_h
            )));
        }
        if !(self.far_plane.is_finite() && self.far_plane > DEPTH_QUANT_MIN) {
            return Err(AppError::Config(format!(
                "far plane {} must exceed {DEPTH_QUANT_MIN} m",
                self.far_plane
            )));
        }
        let [b0, b1] = self.beta_range;
        if !(b0 > 0.0 && b1 >= b0 && b1.is_finite()) {
            return Err(AppError::Config(format!(
                "beta range [{b0}, {b1}] must be positive and non-decreasing"
            )));
        }
        let [a0, a1] = self.airlight_range;
        if !(a0 > 0.0 && a1 >= a0 && a1 <= 1.0) {
            return Err(AppError::Config(format!(
                "airlight range [{a0}, {a1}] must lie in (0, 1] and be non-decreasing"
            )));
        }
        let [o0, o1] = self.object_count_range;
        if o0 == 0 || o1 < o0 {
            return Err(AppError::Config(format!(
                "object count range [{o0}, {o1}] must be positive and non-decreasing"
            )));
        }
        if !(0.0..=0.5).contains(&self.target_depth_noise) {
            return Err(AppError::Config(format!(
                "target depth noise {} outside [0, 0.5]",
                self.target_depth_noise
            )));
        }
        Ok(())
    }

    fn depth_range(&self) -> Result<DepthRange> {
        DepthRange::new(DEPTH_QUANT_MIN, self.far_plane)
    }
}

/// Snaps a unit-interval image onto the 8-bit grid the PNG will store.
fn quantize8(x: &Tensor<f64>) -> Tensor<f64> {
    x.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

/// Snaps depth onto the 16-bit storage grid.
fn quantize_depth(d: &Tensor<f64>, range: DepthRange) -> Tensor<f64> {
    let span = range.max - range.min;
    d.map(|v| {
        let t = ((v - range.min) / span).clamp(0.0, 1.0);
        range.min + (t * 65535.0).round() / 65535.0 * span
    })
}

struct EntryDraw {
    scene_seed: u64,
    object_count: usize,
    fog: FogSpec,
}

/// Per-entry scenario draws, in a fixed order so the build is a pure
/// function of the config.
fn draw(rng: &mut ChaCha8Rng, cfg: &DatasetConfig) -> EntryDraw {
    let scene_seed = rng.random::<u64>();
    let [o0, o1] = cfg.object_count_range;
    let object_count = rng.random_range(o0..=o1);
    let beta = rng.random_range(cfg.beta_range[0]..=cfg.beta_range[1]);
    let a = rng.random_range(cfg.airlight_range[0]..=cfg.airlight_range[1]);
    EntryDraw {
        scene_seed,
        object_count,
        fog: FogSpec {
            beta,
            airlight: [a, a, a],
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn write_entry(
    out_dir: &Path,
    sub: &str,
    index: usize,
    split: Split,
    style: Style,
    draw: EntryDraw,
    cfg: &DatasetConfig,
    depth_noise: Option<&mut ChaCha8Rng>,
    with_foggy: bool,
) -> Result<Entry> {
    let range = cfg.depth_range()?;
    let spec = SceneSpec {
        seed: draw.scene_seed,
        width: cfg.image_w,
        height: cfg.image_h,
        object_count: draw.object_count,
        style,
        far_plane: cfg.far_plane,
    };
    let (clear, depth) = generate_scene(&spec)?;
    let clear = quantize8(&clear);
    let mut depth = quantize_depth(&depth, range);

    if let Some(rng) = depth_noise {
        if cfg.target_depth_noise > 0.0 {
            let a = cfg.target_depth_noise;
            for v in depth.data_mut() {
                let eps = rng.random_range(-a..=a);
                *v = (*v * (1.0 + eps)).clamp(range.min, range.max);
            }
            depth = quantize_depth(&depth, range);
        }
    }

    let id = format!("{sub}_{index:04}");
    let clear_rel = format!("{sub}/{index:04}_clear.png");
    let depth_rel = format!("{sub}/{index:04}_depth.png");
    save_rgb(&out_dir.join(&clear_rel), &clear.cast())?;
    save_depth16(&out_dir.join(&depth_rel), &depth, range)?;

    let foggy_path = if with_foggy {
        let params: FogParams = draw.fog.params()?;
        let foggy = render_fog(&clear, &depth, params)?;
        let rel = format!("{sub}/{index:04}_foggy.png");
        save_rgb(&out_dir.join(&rel), &foggy.cast())?;
        Some(rel)
    } else {
        None
    };

    Ok(Entry {
        id,
        split,
        clear_path: clear_rel,
        depth_path: depth_rel,
        foggy_path,
        fog: draw.fog,
    })
}

/// Builds the full dataset under `out_dir` and returns the manifest path.
pub fn build_dataset(cfg: &DatasetConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    for sub in ["src", "tgt", "held"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| AppError::io(&d, e))?;
    }

    // Scenario draws and depth noise come from separate streams so the
    // noise option cannot shift every scene after the first noisy entry.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6e6f_6973_655f_7267);

    let mut entries = Vec::with_capacity(cfg.source_pairs + cfg.target_train + cfg.heldout);
    for i in 0..cfg.source_pairs {
        let d = draw(&mut rng, cfg);
        entries.push(write_entry(
            out_dir,
            "src",
            i,
            Split::Source,
            Style::Source,
            d,
            cfg,
            None,
            true,
        )?);
    }
    for i in 0..cfg.target_train {
        let d = draw(&mut rng, cfg);
        entries.push(write_entry(
            out_dir,
            "tgt",
            i,
            Split::TargetTrain,
            Style::Target,
            d,
            cfg,
            Some(&mut noise_rng),
            false,
        )?);
    }
    for i in 0..cfg.heldout {
        let d = draw(&mut rng, cfg);
        entries.push(write_entry(
            out_dir,
            "held",
            i,
            Split::HeldoutOracle,
            Style::Target,
            d,
            cfg,
            None,
            true,
        )?);
    }

    let manifest = Manifest {
        schema: SCHEMA.to_string(),
        image_h: cfg.image_h,
        image_w: cfg.image_w,
        far_plane: cfg.far_plane,
        depth_quantization: DepthQuantization {
            min_depth: DEPTH_QUANT_MIN,
            max_depth: cfg.far_plane,
            bits: 16,
        },
        entries,
    };
    let path = out_dir.join("manifest.json");
    save_manifest(&path, &manifest)?;
    Ok(manifest)
}
