//! The gist decomposition: the shared, domain-invariant part of an
//! image-to-image translation, factored as a multiplicative alignment map
//! and an additive residual map.
//!
//! A translation carrying image `x` to `x'` is represented as
//! `x' = x ⊙ M + N`. For fog, `M` is the transmittance and `N` the airlight
//! buildup, but nothing in this module knows about optics — it is pure
//! algebra: applying a gist, inverting one, and sliding an image along the
//! source→target axis by a *domainness* factor `z`.
//!
//! All functions are clamp-free. Clamping to displayable range happens at
//! image export only; doing it here would break the linearity and inversion
//! properties this module promises.

use alloc::format;

use crate::error::CoreError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Domainness presets used when sweeping translations for inspection; chosen
/// slightly inside the target endpoint, where interpolated fog looks densest
/// without saturating.
pub const DOMAINNESS_PRESETS: [f64; 2] = [0.88, 0.90];

/// A translation gist: `x' = x ⊙ m + n`.
///
/// `m` is dimensionless and strictly positive — positivity is what makes the
/// reverse translation expressible as another gist (defogging needs
/// `1/transmittance > 1`), and it keeps [`invert_gist`] free of division
/// blowups. `n` is in intensity units and may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct Gist<F> {
    m: Tensor<F>,
    n: Tensor<F>,
}

impl<F: Scalar> Gist<F> {
    /// Validates shape agreement, finiteness, and strict positivity of `m`.
    pub fn new(m: Tensor<F>, n: Tensor<F>) -> Result<Self, CoreError> {
        if m.shape() != n.shape() {
            return Err(CoreError::ShapeMismatch(format!(
                "gist maps disagree: m {} vs n {}",
                m.shape_str(),
                n.shape_str()
            )));
        }
        if !m.is_finite() || !n.is_finite() {
            return Err(CoreError::NonFinite("gist maps".into()));
        }
        if m.data().iter().any(|&v| v <= F::zero()) {
            return Err(CoreError::DomainViolation(
                "alignment map must be strictly positive".into(),
            ));
        }
        Ok(Self { m, n })
    }

    /// The identity translation: `m ≡ 1`, `n ≡ 0`.
    pub fn identity(shape: [usize; 4]) -> Self {
        Self {
            m: Tensor::full(shape, F::one()),
            n: Tensor::zeros(shape),
        }
    }

    pub fn m(&self) -> &Tensor<F> {
        &self.m
    }

    pub fn n(&self) -> &Tensor<F> {
        &self.n
    }

    pub fn shape(&self) -> [usize; 4] {
        self.m.shape()
    }
}

/// How far along the source→target axis an interpolated image sits:
/// 0 is the untranslated image, 1 the full translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domainness(f64);

impl Domainness {
    pub fn new(z: f64) -> Result<Self, CoreError> {
        if !(0.0..=1.0).contains(&z) || z.is_nan() {
            return Err(CoreError::DomainViolation(format!(
                "domainness must lie in [0, 1], got {z}"
            )));
        }
        Ok(Self(z))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_shapes<F: Scalar>(x: &Tensor<F>, g: &Gist<F>) -> Result<(), CoreError> {
    if x.shape() != g.shape() {
        return Err(CoreError::ShapeMismatch(format!(
            "image {} vs gist {}",
            x.shape_str(),
            g.m.shape_str()
        )));
    }
    Ok(())
}

/// Applies a gist: `x ⊙ m + n`, elementwise, no clamping.
pub fn apply_gist<F: Scalar>(x: &Tensor<F>, g: &Gist<F>) -> Result<Tensor<F>, CoreError> {
    check_shapes(x, g)?;
    Ok(Tensor::from_fn(x.shape(), |i| {
        x.data()[i] * g.m.data()[i] + g.n.data()[i]
    }))
}

/// Slides `x` along the translation axis: `x ⊙ ((m − 1)·z + 1) + n·z`.
///
/// The endpoints are exact by construction, not merely close: `z = 0`
/// returns `x` bit-for-bit and `z = 1` returns exactly [`apply_gist`]'s
/// output. The general formula only guarantees that up to rounding, so the
/// endpoints are special-cased.
pub fn interpolate_domain<F: Scalar>(
    x: &Tensor<F>,
    g: &Gist<F>,
    z: Domainness,
) -> Result<Tensor<F>, CoreError> {
    check_shapes(x, g)?;
    if z.0 == 0.0 {
        return Ok(x.clone());
    }
    if z.0 == 1.0 {
        return apply_gist(x, g);
    }
    let zf = F::from_f64(z.0);
    let one = F::one();
    Ok(Tensor::from_fn(x.shape(), |i| {
        x.data()[i] * ((g.m.data()[i] - one) * zf + one) + g.n.data()[i] * zf
    }))
}

/// The algebraic inverse translation: `(1/m, −n/m)`.
///
/// Composing [`apply_gist`] with the inverted gist is the identity on
/// images to machine precision.
pub fn invert_gist<F: Scalar>(g: &Gist<F>) -> Result<Gist<F>, CoreError> {
    if g.m.data().iter().any(|&v| v <= F::zero()) {
        return Err(CoreError::DomainViolation(
            "cannot invert a gist with non-positive alignment entries".into(),
        ));
    }
    let m_inv = g.m.map(|v| v.recip());
    let n_inv = Tensor::from_fn(g.n.shape(), |i| -g.n.data()[i] / g.m.data()[i]);
    Gist::new(m_inv, n_inv)
}
