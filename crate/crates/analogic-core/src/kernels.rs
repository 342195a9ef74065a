//! Convolution plumbing: im2col lowering and small blocked GEMM kernels.
//!
//! Everything the networks need — strided convolution, transposed
//! convolution, and both of their backward passes — reduces to three slice
//! primitives (`im2col`, `col2im_acc`, and two GEMM variants) plus a weight
//! repack. The GEMMs are written so the hot inner loops run over contiguous
//! rows and auto-vectorize; on the single-core budget this crate trains
//! under, the difference against naive loops is roughly an order of
//! magnitude.
//!
//! Tensor-level wrappers at the bottom of the module own the scratch buffers
//! and the batch loop; the autodiff graph calls only those.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Output spatial extent of a convolution (floor division, PyTorch-style).
#[inline]
pub fn conv_out_dim(i: usize, k: usize, stride: usize, pad: usize) -> usize {
    assert!(
        i + 2 * pad >= k,
        "conv input extent {i} with pad {pad} smaller than kernel {k}"
    );
    (i + 2 * pad - k) / stride + 1
}

/// Output spatial extent of a transposed convolution.
#[inline]
pub fn convt_out_dim(i: usize, k: usize, stride: usize, pad: usize, out_pad: usize) -> usize {
    assert!(out_pad < stride, "output padding must be < stride");
    (i - 1) * stride + k + out_pad - 2 * pad
}

/// Lowers an image `x: [c, hi, wi]` into a patch matrix
/// `col: [c*k*k, ho*wo]`, zero-filling positions that fall in the padding.
///
/// Row `(ic*k + ki)*k + kj` of `col` holds, for every output position, the
/// input pixel that kernel tap `(ki, kj)` of channel `ic` reads.
pub fn im2col<F: Scalar>(
    x: &[F],
    c: usize,
    hi: usize,
    wi: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    col: &mut [F],
) {
    assert_eq!(x.len(), c * hi * wi);
    assert_eq!(col.len(), c * k * k * ho * wo);
    let p = ho * wo;
    for ic in 0..c {
        let plane = &x[ic * hi * wi..(ic + 1) * hi * wi];
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut col[((ic * k + ki) * k + kj) * p..((ic * k + ki) * k + kj + 1) * p];
                for oh in 0..ho {
                    let ih = (oh * stride + ki) as isize - pad as isize;
                    let dst = &mut row[oh * wo..(oh + 1) * wo];
                    if ih < 0 || ih as usize >= hi {
                        for v in dst.iter_mut() {
                            *v = F::zero();
                        }
                        continue;
                    }
                    let src = &plane[ih as usize * wi..(ih as usize + 1) * wi];
                    for (ow, v) in dst.iter_mut().enumerate() {
                        let iw = (ow * stride + kj) as isize - pad as isize;
                        *v = if iw >= 0 && (iw as usize) < wi {
                            src[iw as usize]
                        } else {
                            F::zero()
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds a patch matrix back into an image.
pub fn col2im_acc<F: Scalar>(
    col: &[F],
    c: usize,
    hi: usize,
    wi: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    x_acc: &mut [F],
) {
    assert_eq!(x_acc.len(), c * hi * wi);
    assert_eq!(col.len(), c * k * k * ho * wo);
    let p = ho * wo;
    for ic in 0..c {
        let plane = &mut x_acc[ic * hi * wi..(ic + 1) * hi * wi];
        for ki in 0..k {
            for kj in 0..k {
                let row = &col[((ic * k + ki) * k + kj) * p..((ic * k + ki) * k + kj + 1) * p];
                for oh in 0..ho {
                    let ih = (oh * stride + ki) as isize - pad as isize;
                    if ih < 0 || ih as usize >= hi {
                        continue;
                    }
                    let dst = &mut plane[ih as usize * wi..(ih as usize + 1) * wi];
                    let src = &row[oh * wo..(oh + 1) * wo];
                    for (ow, &v) in src.iter().enumerate() {
                        let iw = (ow * stride + kj) as isize - pad as isize;
                        if iw >= 0 && (iw as usize) < wi {
                            dst[iw as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// `out[m][n] += a[m][kk] · b[kk][n]`, row-major.
///
/// Two output rows per pass and four `b` rows per inner iteration give eight
/// multiply–adds per store; the `j` loop runs over contiguous slices of known
/// equal length so it vectorizes.
pub fn gemm_acc<F: Scalar>(m: usize, n: usize, kk: usize, a: &[F], b: &[F], out: &mut [F]) {
    assert_eq!(a.len(), m * kk);
    assert_eq!(b.len(), kk * n);
    assert_eq!(out.len(), m * n);
    if n == 0 || kk == 0 {
        return;
    }
    let mut rows = out.chunks_exact_mut(n);
    let mut i = 0;
    while i + 2 <= m {
        let r0 = rows.next().unwrap();
        let r1 = rows.next().unwrap();
        let a0 = &a[i * kk..(i + 1) * kk];
        let a1 = &a[(i + 1) * kk..(i + 2) * kk];
        let mut q = 0;
        while q + 4 <= kk {
            let (a00, a01, a02, a03) = (a0[q], a0[q + 1], a0[q + 2], a0[q + 3]);
            let (a10, a11, a12, a13) = (a1[q], a1[q + 1], a1[q + 2], a1[q + 3]);
            let b0 = &b[q * n..q * n + n];
            let b1 = &b[(q + 1) * n..(q + 1) * n + n];
            let b2 = &b[(q + 2) * n..(q + 2) * n + n];
            let b3 = &b[(q + 3) * n..(q + 3) * n + n];
            for j in 0..n {
                let (v0, v1, v2, v3) = (b0[j], b1[j], b2[j], b3[j]);
                r0[j] += a00 * v0 + a01 * v1 + a02 * v2 + a03 * v3;
                r1[j] += a10 * v0 + a11 * v1 + a12 * v2 + a13 * v3;
            }
            q += 4;
        }
        while q < kk {
            let av0 = a0[q];
            let av1 = a1[q];
            let brow = &b[q * n..q * n + n];
            for j in 0..n {
                r0[j] += av0 * brow[j];
                r1[j] += av1 * brow[j];
            }
            q += 1;
        }
        i += 2;
    }
    if i < m {
        let r0 = rows.next().unwrap();
        let a0 = &a[i * kk..(i + 1) * kk];
        let mut q = 0;
        while q + 4 <= kk {
            let (a00, a01, a02, a03) = (a0[q], a0[q + 1], a0[q + 2], a0[q + 3]);
            let b0 = &b[q * n..q * n + n];
            let b1 = &b[(q + 1) * n..(q + 1) * n + n];
            let b2 = &b[(q + 2) * n..(q + 2) * n + n];
            let b3 = &b[(q + 3) * n..(q + 3) * n + n];
            for j in 0..n {
                r0[j] += a00 * b0[j] + a01 * b1[j] + a02 * b2[j] + a03 * b3[j];
            }
            q += 4;
        }
        while q < kk {
            let av0 = a0[q];
            let brow = &b[q * n..q * n + n];
            for j in 0..n {
                r0[j] += av0 * brow[j];
            }
            q += 1;
        }
    }
}

/// `out[m][r] += Σ_p a[m][p] · b[r][p]` — A times B-transpose, accumulating.
///
/// Used for weight gradients, where both operands are laid out with the
/// spatial axis contiguous. Four `b` rows per pass of an `a` row keep the
/// `a` row in cache and give four independent dot accumulators.
pub fn gemm_abt_acc<F: Scalar>(m: usize, r: usize, p: usize, a: &[F], b: &[F], out: &mut [F]) {
    assert_eq!(a.len(), m * p);
    assert_eq!(b.len(), r * p);
    assert_eq!(out.len(), m * r);
    for i in 0..m {
        let arow = &a[i * p..(i + 1) * p];
        let orow = &mut out[i * r..(i + 1) * r];
        let mut q = 0;
        while q + 4 <= r {
            let b0 = &b[q * p..q * p + p];
            let b1 = &b[(q + 1) * p..(q + 1) * p + p];
            let b2 = &b[(q + 2) * p..(q + 2) * p + p];
            let b3 = &b[(q + 3) * p..(q + 3) * p + p];
            let (mut s0, mut s1, mut s2, mut s3) = (F::zero(), F::zero(), F::zero(), F::zero());
            for j in 0..p {
                let av = arow[j];
                s0 += av * b0[j];
                s1 += av * b1[j];
                s2 += av * b2[j];
                s3 += av * b3[j];
            }
            orow[q] += s0;
            orow[q + 1] += s1;
            orow[q + 2] += s2;
            orow[q + 3] += s3;
            q += 4;
        }
        while q < r {
            let brow = &b[q * p..q * p + p];
            let mut s = F::zero();
            for j in 0..p {
                s += arow[j] * brow[j];
            }
            orow[q] += s;
            q += 1;
        }
    }
}

/// Transposes a row-major `rows × cols` matrix into a new buffer.
pub fn transpose<F: Scalar>(rows: usize, cols: usize, a: &[F]) -> Vec<F> {
    assert_eq!(a.len(), rows * cols);
    let mut out = vec![F::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Tensor-level ops (batched, scratch owned here)
// ---------------------------------------------------------------------------

/// Square-kernel convolution geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

/// Forward convolution. `x: [n, ic, hi, wi]`, `w: [oc, ic, k, k]`,
/// `bias: [1, oc, 1, 1]`.
pub fn conv2d_fwd<F: Scalar>(x: &Tensor<F>, w: &Tensor<F>, bias: &Tensor<F>, g: ConvGeom) -> Tensor<F> {
    let [n, ic, hi, wi] = x.shape();
    let [oc, wic, k, k2] = w.shape();
    assert_eq!((wic, k2), (ic, k), "conv weight {:?} vs input {:?}", w.shape(), x.shape());
    assert_eq!(k, g.kernel);
    assert_eq!(bias.shape(), [1, oc, 1, 1], "conv bias shape {:?}", bias.shape());
    let ho = conv_out_dim(hi, k, g.stride, g.pad);
    let wo = conv_out_dim(wi, k, g.stride, g.pad);
    let p = ho * wo;
    let kk = ic * k * k;
    let mut col = vec![F::zero(); kk * p];
    let mut y = Tensor::zeros([n, oc, ho, wo]);
    for b in 0..n {
        im2col(
            &x.data()[b * ic * hi * wi..(b + 1) * ic * hi * wi],
            ic,
            hi,
            wi,
            k,
            g.stride,
            g.pad,
            ho,
            wo,
            &mut col,
        );
        let yb = &mut y.data_mut()[b * oc * p..(b + 1) * oc * p];
        for o in 0..oc {
            let bv = bias.data()[o];
            for v in yb[o * p..(o + 1) * p].iter_mut() {
                *v = bv;
            }
        }
        gemm_acc(oc, p, kk, w.data(), &col, yb);
    }
    y
}

/// Backward convolution: gradients w.r.t. input, weight, and bias.
pub fn conv2d_bwd<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    gy: &Tensor<F>,
    g: ConvGeom,
) -> (Tensor<F>, Tensor<F>, Tensor<F>) {
    let (gx, gw, gb) = conv2d_bwd_masked(x, w, gy, g, true, true);
    (gx.unwrap(), gw.unwrap(), gb.unwrap())
}

/// [`conv2d_bwd`] with per-output masks, so callers can skip the GEMM for a
/// gradient nobody consumes (e.g. the input gradient of a first layer, or
/// the weight gradient of a frozen feature extractor).
pub fn conv2d_bwd_masked<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    gy: &Tensor<F>,
    g: ConvGeom,
    need_input: bool,
    need_weights: bool,
) -> (Option<Tensor<F>>, Option<Tensor<F>>, Option<Tensor<F>>) {
    let [n, ic, hi, wi] = x.shape();
    let [oc, _, k, _] = w.shape();
    let [gn, goc, ho, wo] = gy.shape();
    assert_eq!((gn, goc), (n, oc));
    let p = ho * wo;
    let kk = ic * k * k;

    let mut gx = need_input.then(|| Tensor::zeros(x.shape()));
    let mut gw = need_weights.then(|| Tensor::zeros(w.shape()));
    let mut gb = need_weights.then(|| Tensor::zeros([1, oc, 1, 1]));

    let wt = need_input.then(|| transpose(oc, kk, w.data())); // [kk, oc]
    let mut col = vec![F::zero(); if need_weights { kk * p } else { 0 }];
    let mut gcol = vec![F::zero(); if need_input { kk * p } else { 0 }];
    for b in 0..n {
        let gyb = &gy.data()[b * oc * p..(b + 1) * oc * p];
        if let (Some(gx), Some(wt)) = (gx.as_mut(), wt.as_ref()) {
            // input gradient: columns = Wᵀ · gy, scattered back
            for v in gcol.iter_mut() {
                *v = F::zero();
            }
            gemm_acc(kk, p, oc, wt, gyb, &mut gcol);
            col2im_acc(
                &gcol,
                ic,
                hi,
                wi,
                k,
                g.stride,
                g.pad,
                ho,
                wo,
                &mut gx.data_mut()[b * ic * hi * wi..(b + 1) * ic * hi * wi],
            );
        }
        if let (Some(gw), Some(gb)) = (gw.as_mut(), gb.as_mut()) {
            // weight gradient: gy · colᵀ
            im2col(
                &x.data()[b * ic * hi * wi..(b + 1) * ic * hi * wi],
                ic,
                hi,
                wi,
                k,
                g.stride,
                g.pad,
                ho,
                wo,
                &mut col,
            );
            gemm_abt_acc(oc, kk, p, gyb, &col, gw.data_mut());
            for o in 0..oc {
                let mut s = F::zero();
                for &v in &gyb[o * p..(o + 1) * p] {
                    s += v;
                }
                gb.data_mut()[o] += s;
            }
        }
    }
    (gx, gw, gb)
}

/// Forward transposed convolution. `x: [n, ic, hi, wi]`,
/// `w: [ic, oc, k, k]`, `bias: [1, oc, 1, 1]`. Output spatial dims follow
/// [`convt_out_dim`].
pub fn convt2d_fwd<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    bias: &Tensor<F>,
    g: ConvGeom,
    out_pad: usize,
) -> Tensor<F> {
    let [n, ic, hi, wi] = x.shape();
    let [wic, oc, k, _] = w.shape();
    assert_eq!(wic, ic, "convT weight {:?} vs input {:?}", w.shape(), x.shape());
    assert_eq!(k, g.kernel);
    assert_eq!(bias.shape(), [1, oc, 1, 1]);
    let ho = convt_out_dim(hi, k, g.stride, g.pad, out_pad);
    let wo = convt_out_dim(wi, k, g.stride, g.pad, out_pad);
    // A transposed convolution is the adjoint of a convolution mapping
    // [oc, ho, wo] -> [ic, hi, wi]; sanity-check that geometry round-trips.
    assert_eq!(conv_out_dim(ho, k, g.stride, g.pad), hi);
    assert_eq!(conv_out_dim(wo, k, g.stride, g.pad), wi);

    let p_in = hi * wi;
    let kk = oc * k * k;
    let wt = transpose(ic, kk, w.data()); // [kk, ic]
    let mut gcol = vec![F::zero(); kk * p_in];
    let mut y = Tensor::zeros([n, oc, ho, wo]);
    for b in 0..n {
        for v in gcol.iter_mut() {
            *v = F::zero();
        }
        gemm_acc(
            kk,
            p_in,
            ic,
            &wt,
            &x.data()[b * ic * p_in..(b + 1) * ic * p_in],
            &mut gcol,
        );
        let yb = &mut y.data_mut()[b * oc * ho * wo..(b + 1) * oc * ho * wo];
        for o in 0..oc {
            let bv = bias.data()[o];
            for v in yb[o * ho * wo..(o + 1) * ho * wo].iter_mut() {
                *v = bv;
            }
        }
        col2im_acc(&gcol, oc, ho, wo, k, g.stride, g.pad, hi, wi, yb);
    }
    y
}

/// Backward transposed convolution.
pub fn convt2d_bwd<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    gy: &Tensor<F>,
    g: ConvGeom,
) -> (Tensor<F>, Tensor<F>, Tensor<F>) {
    let (gx, gw, gb) = convt2d_bwd_masked(x, w, gy, g, true, true);
    (gx.unwrap(), gw.unwrap(), gb.unwrap())
}

/// [`convt2d_bwd`] with per-output masks; see [`conv2d_bwd_masked`].
pub fn convt2d_bwd_masked<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    gy: &Tensor<F>,
    g: ConvGeom,
    need_input: bool,
    need_weights: bool,
) -> (Option<Tensor<F>>, Option<Tensor<F>>, Option<Tensor<F>>) {
    let [n, ic, hi, wi] = x.shape();
    let [_, oc, k, _] = w.shape();
    let [gn, goc, ho, wo] = gy.shape();
    assert_eq!((gn, goc), (n, oc));
    let p_in = hi * wi;
    let kk = oc * k * k;

    let mut gx = need_input.then(|| Tensor::zeros(x.shape()));
    let mut gw = need_weights.then(|| Tensor::zeros(w.shape()));
    let mut gb = need_weights.then(|| Tensor::zeros([1, oc, 1, 1]));

    let mut col = vec![F::zero(); kk * p_in];
    for b in 0..n {
        let gyb = &gy.data()[b * oc * ho * wo..(b + 1) * oc * ho * wo];
        // Lower the upstream gradient with conv geometry (output side plays
        // the conv-input role); then input gradient is a plain GEMM and the
        // weight gradient a row-dot GEMM against x.
        im2col(gyb, oc, ho, wo, k, g.stride, g.pad, hi, wi, &mut col);
        if let Some(gx) = gx.as_mut() {
            gemm_acc(
                ic,
                p_in,
                kk,
                w.data(),
                &col,
                &mut gx.data_mut()[b * ic * p_in..(b + 1) * ic * p_in],
            );
        }
        if let (Some(gw), Some(gb)) = (gw.as_mut(), gb.as_mut()) {
            gemm_abt_acc(
                ic,
                kk,
                p_in,
                &x.data()[b * ic * p_in..(b + 1) * ic * p_in],
                &col,
                gw.data_mut(),
            );
            for o in 0..oc {
                let mut s = F::zero();
                for &v in &gyb[o * ho * wo..(o + 1) * ho * wo] {
                    s += v;
                }
                gb.data_mut()[o] += s;
            }
        }
    }
    (gx, gw, gb)
}
