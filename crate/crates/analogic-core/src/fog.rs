//! Physics of the fog testbed: homogeneous atmospheric scattering with a
//! constant airlight, and its closed-form gist.
//!
//! The model is the classical single-scattering form
//! `out = clear·e^{−β·d} + A·(1 − e^{−β·d})`: transmittance decays
//! exponentially with optical depth `β·d` and the lost contrast is replaced
//! by airlight. Because that is affine in the clear image, fogging *is* a
//! gist — [`oracle_gist`] returns it in closed form, which is what lets the
//! whole training pipeline be checked against ground truth on this testbed.
//!
//! All reference math here is `f64`; training casts down to its own dtype
//! after rendering.

use alloc::format;

use crate::error::CoreError;
use crate::gist::Gist;
use crate::tensor::Tensor;

/// Scattering parameters of one foggy rendering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FogParams {
    /// Attenuation coefficient, 1/meters.
    pub beta: f64,
    /// Horizon color the image decays toward, RGB in [0, 1].
    pub airlight: [f64; 3],
}

impl FogParams {
    pub fn new(beta: f64, airlight: [f64; 3]) -> Result<Self, CoreError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "attenuation must be finite and > 0, got {beta}"
            )));
        }
        if airlight.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(CoreError::InvalidConfig(format!(
                "airlight components must lie in [0, 1], got {airlight:?}"
            )));
        }
        Ok(Self { beta, airlight })
    }
}

fn check_depth(depth: &Tensor<f64>) -> Result<(), CoreError> {
    if depth.c() != 1 {
        return Err(CoreError::ShapeMismatch(format!(
            "depth map must have one channel, got {}",
            depth.shape_str()
        )));
    }
    if !depth.is_finite() || depth.data().iter().any(|&d| d <= 0.0) {
        return Err(CoreError::DomainViolation(
            "depth must be finite and strictly positive".into(),
        ));
    }
    Ok(())
}

/// Renders fog over a clear image.
///
/// `clear` is `[n, 3, h, w]`, `depth` is `[n, 1, h, w]` in meters. Output
/// stays in `[0, 1]` whenever the inputs do (it is a convex combination of
/// clear pixel and airlight).
pub fn render_fog(
    clear: &Tensor<f64>,
    depth: &Tensor<f64>,
    p: FogParams,
) -> Result<Tensor<f64>, CoreError> {
    check_depth(depth)?;
    let [n, c, h, w] = clear.shape();
    if c != 3 || depth.shape() != [n, 1, h, w] {
        return Err(CoreError::ShapeMismatch(format!(
            "clear {} vs depth {}",
            clear.shape_str(),
            depth.shape_str()
        )));
    }
    let hw = h * w;
    let mut out = Tensor::zeros(clear.shape());
    for b in 0..n {
        for ch in 0..3 {
            let a = p.airlight[ch];
            for i in 0..hw {
                let d = depth.data()[b * hw + i];
                let t = (-p.beta * d).exp();
                out.data_mut()[(b * 3 + ch) * hw + i] =
                    clear.data()[(b * 3 + ch) * hw + i] * t + a * (1.0 - t);
            }
        }
    }
    Ok(out)
}

/// The closed-form gist of a fog rendering: `m = e^{−β·d}` broadcast over
/// channels, `n = airlight·(1 − e^{−β·d})`.
///
/// Applying this gist to a clear image reproduces [`render_fog`] exactly;
/// that identity is what grounds every learned-gist evaluation.
pub fn oracle_gist(depth: &Tensor<f64>, p: FogParams) -> Result<Gist<f64>, CoreError> {
    check_depth(depth)?;
    let [n, _, h, w] = depth.shape();
    let hw = h * w;
    let mut m = Tensor::zeros([n, 3, h, w]);
    let mut nn = Tensor::zeros([n, 3, h, w]);
    for b in 0..n {
        for ch in 0..3 {
            let a = p.airlight[ch];
            for i in 0..hw {
                let t = (-p.beta * depth.data()[b * hw + i]).exp();
                m.data_mut()[(b * 3 + ch) * hw + i] = t;
                nn.data_mut()[(b * 3 + ch) * hw + i] = a * (1.0 - t);
            }
        }
    }
    Gist::new(m, nn)
}
