//! Dense NCHW tensors.
//!
//! The engine only ever needs rank-4 arrays (batch, channels, height, width);
//! scalars and per-channel vectors are carried as degenerate shapes like
//! `[1, 1, 1, 1]` and `[1, c, 1, 1]`. Keeping the rank fixed makes shape
//! checks cheap and the conv kernels free of stride arithmetic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;

/// A dense rank-4 tensor in NCHW layout, row-major, contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    shape: [usize; 4],
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    /// Builds a tensor from a shape and matching data buffer.
    ///
    /// # Panics
    /// If `data.len()` does not equal the shape's element count. Callers
    /// constructing tensors from untrusted sizes should check first.
    pub fn new(shape: [usize; 4], data: Vec<F>) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Self { shape, data }
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: [usize; 4], value: F) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    /// Wraps a single value as a `[1,1,1,1]` tensor.
    pub fn scalar(value: F) -> Self {
        Self {
            shape: [1, 1, 1, 1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize) -> F) -> Self {
        let numel = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for i in 0..numel {
            data.push(f(i));
        }
        Self { shape, data }
    }

    #[inline(always)]
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    #[inline(always)]
    pub fn n(&self) -> usize {
        self.shape[0]
    }
    #[inline(always)]
    pub fn c(&self) -> usize {
        self.shape[1]
    }
    #[inline(always)]
    pub fn h(&self) -> usize {
        self.shape[2]
    }
    #[inline(always)]
    pub fn w(&self) -> usize {
        self.shape[3]
    }

    #[inline(always)]
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline(always)]
    pub fn data(&self) -> &[F] {
        &self.data
    }

    #[inline(always)]
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Flat index of `(n, c, h, w)`.
    #[inline(always)]
    pub fn idx(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    #[inline(always)]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> F {
        self.data[self.idx(n, c, h, w)]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, n: usize, c: usize, h: usize, w: usize) -> &mut F {
        let i = self.idx(n, c, h, w);
        &mut self.data[i]
    }

    /// The contained value of a one-element tensor.
    ///
    /// # Panics
    /// If the tensor has more than one element.
    pub fn item(&self) -> F {
        assert_eq!(
            self.numel(),
            1,
            "item() called on tensor of shape {:?}",
            self.shape
        );
        self.data[0]
    }

    /// Elementwise map into a new tensor of the same shape.
    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Mean absolute difference against another tensor of the same shape.
    pub fn mean_abs_diff(&self, other: &Self) -> F {
        assert_eq!(
            self.shape, other.shape,
            "mean_abs_diff between shapes {:?} and {:?}",
            self.shape, other.shape
        );
        let mut acc = F::zero();
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            acc += (a - b).abs();
        }
        acc / F::from_f64(self.numel() as f64)
    }

    /// Largest absolute difference against another tensor of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> F {
        assert_eq!(
            self.shape, other.shape,
            "max_abs_diff between shapes {:?} and {:?}",
            self.shape, other.shape
        );
        let mut m = F::zero();
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            let d = (a - b).abs();
            if d > m {
                m = d;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Casts every element through `f64` into another scalar type.
    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| G::from_f64(v.as_f64())).collect(),
        }
    }

    /// Human-readable shape string for error messages.
    pub fn shape_str(&self) -> alloc::string::String {
        let [n, c, h, w] = self.shape;
        format!("[{n}, {c}, {h}, {w}]")
    }
}
