//! Float abstraction so the same model code runs in `f32` (training) and
//! `f64` (finite-difference gradient verification).

use core::fmt::{Debug, Display};
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::Rng;

/// Element type of tensors and graphs.
///
/// `f32` is the training dtype; `f64` exists because central differences with
/// step `1e-5` drown in `f32` rounding noise, so the gradient checker
/// instantiates the whole engine at double precision instead of loosening its
/// tolerance.
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    fn from_f32(v: f32) -> Self {
        Self::from_f64(v as f64)
    }
}

impl Scalar for f32 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Standard-normal draw via Box–Muller.
///
/// Sampling happens in `f64` and is cast afterwards, so an `f32` and an `f64`
/// model built from the same seed start from the same numbers (up to
/// rounding). Keeping the transform local also spares the core crate a
/// distributions dependency.
pub fn sample_normal<F: Scalar, R: Rng + ?Sized>(rng: &mut R) -> F {
    // u1 ∈ (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let z = (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos();
    F::from_f64(z)
}

/// Uniform draw from `[lo, hi)`, performed in `f64` for the same
/// dtype-stability reason as [`sample_normal`].
pub fn sample_uniform<F: Scalar, R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> F {
    let u: f64 = rng.random::<f64>();
    F::from_f64(lo + (hi - lo) * u)
}
