//! Deterministic procedural scenes: the desk-scale stand-in for outdoor
//! driving footage.
//!
//! Each scene is a 2.5-D layered composition — a sky band at the far plane,
//! a ground plane whose depth grows hyperbolically toward the horizon
//! (constant-slope ground under pinhole projection), and flat-shaded
//! billboard objects standing on the ground, so an object's vertical
//! position is a faithful monocular depth cue. The depth map is exact by
//! construction, which is what makes closed-form fog supervision possible.
//!
//! The two domain styles share all geometry and differ only in appearance:
//! the target style remaps the palette and overlays low-frequency value
//! noise. Geometry draws and color draws come from one seeded stream
//! consumed identically for both styles, so a source/target pair with the
//! same seed depicts the same scene.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::scalar::sample_uniform;
use crate::tensor::Tensor;

/// Appearance domain of a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Style {
    Source,
    Target,
}

/// Full description of one scene; generation is a pure function of this.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub object_count: usize,
    pub style: Style,
    /// Sky distance in meters; also the maximum ground depth.
    pub far_plane: f64,
}

/// Closest ground depth (bottom image row), meters.
pub const NEAR_DEPTH: f64 = 1.0;

/// Amplitude of the target style's value noise, intensity units.
const TARGET_NOISE_AMPLITUDE: f64 = 0.08;
/// Lattice pitch of the value noise, pixels.
const TARGET_NOISE_CELL: usize = 8;

struct ObjectDraw {
    depth: f64,
    cx: f64,
    y_base: usize,
    half_w: f64,
    height_px: f64,
    elliptical: bool,
    color: [f64; 3],
}

/// Renders a scene and its exact depth map.
///
/// Returns `(image [1,3,h,w] in [0,1], depth [1,1,h,w] in meters)`.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Tensor<f64>, Tensor<f64>), CoreError> {
    if spec.width == 0 || spec.height == 0 {
        return Err(CoreError::InvalidConfig(
            "scene must have positive area".into(),
        ));
    }
    if !(spec.far_plane > NEAR_DEPTH) || !spec.far_plane.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "far plane must be finite and > {NEAR_DEPTH}, got {}",
            spec.far_plane
        )));
    }
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Every random draw happens up front, in a fixed order independent of
    // style and of whether a shape ends up clipped, so streams stay aligned.
    let horizon_frac: f64 = sample_uniform(&mut rng, 0.35, 0.48);
    let sky_zenith = jitter(&mut rng, [0.40, 0.56, 0.82], 0.05);
    let sky_horizon = jitter(&mut rng, [0.66, 0.74, 0.86], 0.04);
    let ground_base = jitter(&mut rng, [0.34, 0.42, 0.30], 0.06);

    const OBJECT_PALETTE: [[f64; 3]; 6] = [
        [0.62, 0.26, 0.22], // brick
        [0.35, 0.38, 0.45], // slate
        [0.72, 0.58, 0.26], // ochre
        [0.22, 0.52, 0.50], // teal
        [0.46, 0.30, 0.52], // plum
        [0.72, 0.72, 0.70], // pale gray
    ];
    let mut draws: Vec<ObjectDraw> = Vec::with_capacity(spec.object_count);
    let horizon = ((h as f64 - 1.0) * horizon_frac).round() as usize;
    let focal = 0.55 * h as f64; // pixels per meter of extent at 1 m depth
    for _ in 0..spec.object_count {
        let t_pos: f64 = sample_uniform(&mut rng, 0.10, 0.92);
        let cx = sample_uniform::<f64, _>(&mut rng, 0.05, 0.95) * (w as f64 - 1.0);
        let world_h: f64 = sample_uniform(&mut rng, 0.9, 2.4);
        let world_w: f64 = sample_uniform(&mut rng, 0.6, 2.2);
        let elliptical = rng.random::<bool>();
        let color_idx = rng.random_range(0..OBJECT_PALETTE.len());
        let color = jitter(&mut rng, OBJECT_PALETTE[color_idx], 0.05);

        let depth = ground_depth(t_pos, spec.far_plane);
        let y_base = horizon + (t_pos * (h - 1 - horizon.min(h - 1)) as f64).round() as usize;
        draws.push(ObjectDraw {
            depth,
            cx,
            y_base: y_base.min(h - 1),
            half_w: 0.5 * focal * world_w / depth,
            height_px: focal * world_h / depth,
            elliptical,
            color,
        });
    }

    // Background: sky above the horizon, shaded ground below.
    let mut img = Tensor::zeros([1, 3, h, w]);
    let mut dep = Tensor::zeros([1, 1, h, w]);
    for y in 0..h {
        if y <= horizon || h - 1 == horizon {
            let t = if horizon == 0 { 1.0 } else { y as f64 / horizon as f64 };
            let col = lerp3(sky_zenith, sky_horizon, t);
            for x in 0..w {
                put(&mut img, x, y, col);
                *dep.at_mut(0, 0, y, x) = spec.far_plane;
            }
        } else {
            let t = (y - horizon) as f64 / (h - 1 - horizon) as f64;
            let d = ground_depth(t, spec.far_plane);
            // Mild brightening toward the viewer doubles as a depth cue.
            let shade = 0.55 + 0.45 * NEAR_DEPTH / d;
            let col = [
                ground_base[0] * shade,
                ground_base[1] * shade,
                ground_base[2] * shade,
            ];
            for x in 0..w {
                put(&mut img, x, y, col);
                *dep.at_mut(0, 0, y, x) = d;
            }
        }
    }

    // Objects, painter's order (far first).
    draws.sort_by(|a, b| b.depth.partial_cmp(&a.depth).unwrap());
    for o in &draws {
        let y_top = (o.y_base as f64 - o.height_px).ceil().max(0.0) as usize;
        let x_lo = (o.cx - o.half_w).ceil().max(0.0) as usize;
        let x_hi = ((o.cx + o.half_w).floor() as usize).min(w - 1);
        let cy = o.y_base as f64 - 0.5 * o.height_px;
        let ry = (0.5 * o.height_px).max(0.5);
        let rx = o.half_w.max(0.5);
        for y in y_top..=o.y_base.min(h - 1) {
            for x in x_lo..=x_hi.min(w.saturating_sub(1)) {
                if o.elliptical {
                    let dx = (x as f64 - o.cx) / rx;
                    let dy = (y as f64 - cy) / ry;
                    if dx * dx + dy * dy > 1.0 {
                        continue;
                    }
                }
                put(&mut img, x, y, o.color);
                *dep.at_mut(0, 0, y, x) = o.depth;
            }
        }
    }

    if spec.style == Style::Target {
        apply_target_style(&mut img, spec.seed);
    }
    for v in img.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok((img, dep))
}

/// Ground depth under pinhole projection of a flat plane: the *inverse*
/// depth is linear in screen row, from the far plane at the horizon down to
/// [`NEAR_DEPTH`] at the bottom edge. `t` runs 0 (horizon) to 1 (bottom).
fn ground_depth(t: f64, far_plane: f64) -> f64 {
    let inv = (1.0 - t) / far_plane + t / NEAR_DEPTH;
    1.0 / inv
}

/// Remaps the palette (a convex rotation through the channel permutation
/// R←G←B←R plus a warm cast) and overlays smooth value noise. Both effects
/// leave geometry untouched and keep the shift large enough that the two
/// domains are unmistakably different in color statistics.
fn apply_target_style(img: &mut Tensor<f64>, seed: u64) {
    let [_, _, h, w] = img.shape();
    let hw = h * w;
    for i in 0..hw {
        let r = img.data()[i];
        let g = img.data()[hw + i];
        let b = img.data()[2 * hw + i];
        img.data_mut()[i] = (0.25 * r + 0.75 * g) * 1.06;
        img.data_mut()[hw + i] = (0.25 * g + 0.75 * b) * 0.97;
        img.data_mut()[2 * hw + i] = (0.25 * b + 0.75 * r) * 0.90;
    }

    // Value noise from its own stream so it cannot disturb geometry draws.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let gw = w.div_ceil(TARGET_NOISE_CELL) + 1;
    let gh = h.div_ceil(TARGET_NOISE_CELL) + 1;
    let mut lattice = Vec::with_capacity(gw * gh);
    for _ in 0..gw * gh {
        lattice.push(sample_uniform::<f64, _>(&mut rng, -1.0, 1.0));
    }
    for y in 0..h {
        let fy = y as f64 / TARGET_NOISE_CELL as f64;
        let (y0, ty) = (fy as usize, fy.fract());
        for x in 0..w {
            let fx = x as f64 / TARGET_NOISE_CELL as f64;
            let (x0, tx) = (fx as usize, fx.fract());
            let v00 = lattice[y0 * gw + x0];
            let v01 = lattice[y0 * gw + x0 + 1];
            let v10 = lattice[(y0 + 1) * gw + x0];
            let v11 = lattice[(y0 + 1) * gw + x0 + 1];
            let v = (v00 * (1.0 - tx) + v01 * tx) * (1.0 - ty)
                + (v10 * (1.0 - tx) + v11 * tx) * ty;
            let dv = TARGET_NOISE_AMPLITUDE * v;
            for c in 0..3 {
                img.data_mut()[c * hw + y * w + x] += dv;
            }
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, base: [f64; 3], amount: f64) -> [f64; 3] {
    [
        base[0] + sample_uniform::<f64, _>(rng, -amount, amount),
        base[1] + sample_uniform::<f64, _>(rng, -amount, amount),
        base[2] + sample_uniform::<f64, _>(rng, -amount, amount),
    ]
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

#[inline]
fn put(img: &mut Tensor<f64>, x: usize, y: usize, col: [f64; 3]) {
    for c in 0..3 {
        *img.at_mut(0, c, y, x) = col[c];
    }
}
