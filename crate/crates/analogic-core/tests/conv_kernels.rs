//! The GEMM-lowered conv kernels against straightforward nested-loop
//! references, across the geometries the networks actually use.

use analogic_core::kernels::{
    conv2d_fwd, conv_out_dim, convt2d_fwd, convt_out_dim, ConvGeom,
};
use analogic_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn randn(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random::<f64>() * 2.0 - 1.0)
}

/// Direct convolution: y[n,o,oh,ow] = b[o] + sum x[n,i,ih,iw] * w[o,i,ki,kj].
fn conv_naive(x: &Tensor<f64>, w: &Tensor<f64>, bias: &Tensor<f64>, g: ConvGeom) -> Tensor<f64> {
    let [n, ic, hi, wi] = x.shape();
    let [oc, _, k, _] = w.shape();
    let ho = conv_out_dim(hi, k, g.stride, g.pad);
    let wo = conv_out_dim(wi, k, g.stride, g.pad);
    let mut y = Tensor::zeros([n, oc, ho, wo]);
    for b in 0..n {
        for o in 0..oc {
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut s = bias.data()[o];
                    for i in 0..ic {
                        for ki in 0..k {
                            for kj in 0..k {
                                let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                                let iw = (ow * g.stride + kj) as isize - g.pad as isize;
                                if ih >= 0 && (ih as usize) < hi && iw >= 0 && (iw as usize) < wi {
                                    s += x.at(b, i, ih as usize, iw as usize)
                                        * w.at(o, i, ki, kj);
                                }
                            }
                        }
                    }
                    *y.at_mut(b, o, oh, ow) = s;
                }
            }
        }
    }
    y
}

/// Direct transposed convolution by scattering each input pixel through the
/// kernel, which is the textbook definition.
fn convt_naive(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    bias: &Tensor<f64>,
    g: ConvGeom,
    out_pad: usize,
) -> Tensor<f64> {
    let [n, ic, hi, wi] = x.shape();
    let [_, oc, k, _] = w.shape();
    let ho = convt_out_dim(hi, k, g.stride, g.pad, out_pad);
    let wo = convt_out_dim(wi, k, g.stride, g.pad, out_pad);
    let mut y = Tensor::zeros([n, oc, ho, wo]);
    for b in 0..n {
        for o in 0..oc {
            for oh in 0..ho {
                for ow in 0..wo {
                    *y.at_mut(b, o, oh, ow) = bias.data()[o];
                }
            }
        }
        for i in 0..ic {
            for ih in 0..hi {
                for iw in 0..wi {
                    let xv = x.at(b, i, ih, iw);
                    for o in 0..oc {
                        for ki in 0..k {
                            for kj in 0..k {
                                let oh = (ih * g.stride + ki) as isize - g.pad as isize;
                                let ow = (iw * g.stride + kj) as isize - g.pad as isize;
                                if oh >= 0 && (oh as usize) < ho && ow >= 0 && (ow as usize) < wo {
                                    *y.at_mut(b, o, oh as usize, ow as usize) +=
                                        xv * w.at(i, o, ki, kj);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

#[test]
fn conv_matches_naive_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // (ic, oc, h, w, k, stride): every geometry the generator and the
    // discriminators use, plus an awkward odd-size case.
    let cases = [
        (3usize, 8usize, 8usize, 12usize, 7usize, 1usize),
        (4, 6, 10, 6, 3, 1),
        (4, 6, 10, 6, 3, 2),
        (6, 5, 8, 8, 4, 2),
        (2, 3, 7, 9, 3, 2),
        (1, 1, 4, 4, 1, 1),
    ];
    for (ic, oc, h, w, k, stride) in cases {
        let g = ConvGeom {
            kernel: k,
            stride,
            pad: k / 2,
        };
        let x = randn([2, ic, h, w], &mut rng);
        let wt = randn([oc, ic, k, k], &mut rng);
        let b = randn([1, oc, 1, 1], &mut rng);
        let fast = conv2d_fwd(&x, &wt, &b, g);
        let slow = conv_naive(&x, &wt, &b, g);
        assert_eq!(fast.shape(), slow.shape());
        assert!(
            fast.max_abs_diff(&slow) < 1e-12,
            "conv mismatch at ic={ic} oc={oc} k={k} s={stride}"
        );
    }
}

#[test]
fn conv_transpose_matches_naive_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cases = [
        (8usize, 4usize, 4usize, 6usize, 3usize, 2usize, 1usize),
        (6, 3, 5, 7, 3, 2, 1),
        (4, 4, 6, 6, 3, 1, 0),
        (5, 2, 3, 3, 4, 2, 0),
    ];
    for (ic, oc, h, w, k, stride, out_pad) in cases {
        let g = ConvGeom {
            kernel: k,
            stride,
            pad: k / 2,
        };
        let x = randn([2, ic, h, w], &mut rng);
        let wt = randn([ic, oc, k, k], &mut rng);
        let b = randn([1, oc, 1, 1], &mut rng);
        let fast = convt2d_fwd(&x, &wt, &b, g, out_pad);
        let slow = convt_naive(&x, &wt, &b, g, out_pad);
        assert_eq!(fast.shape(), slow.shape());
        assert!(
            fast.max_abs_diff(&slow) < 1e-12,
            "convT mismatch at ic={ic} oc={oc} k={k} s={stride} op={out_pad}"
        );
    }
}

#[test]
fn strided_k3_convt_doubles_spatial_dims() {
    // The upsampling path of the generator relies on this exact geometry.
    let g = ConvGeom {
        kernel: 3,
        stride: 2,
        pad: 1,
    };
    assert_eq!(convt_out_dim(8, 3, 2, 1, 1), 16);
    assert_eq!(convt_out_dim(16, 3, 2, 1, 1), 32);
    // ... and the downsampling path halves even dims with the mirror config.
    assert_eq!(conv_out_dim(16, 3, 2, 1), 8);
    assert_eq!(conv_out_dim(32, 3, 2, 1), 16);
}
