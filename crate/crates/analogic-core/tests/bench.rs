//! Hand-run throughput probes for the conv kernels.
//!
//! Not part of the regular suite; run with
//! `cargo test -p analogic-core --test bench -- --ignored --nocapture`
//! to see GFLOP/s on the current machine. These numbers sized the default
//! training configs, which have to fit single-core wall-clock budgets.

use std::time::Instant;

use analogic_core::kernels::{conv2d_bwd, conv2d_fwd, convt2d_bwd, convt2d_fwd, ConvGeom};
use analogic_core::Tensor;

fn fill(t: &mut Tensor<f32>, mut seed: u32) -> &mut Tensor<f32> {
    for v in t.data_mut() {
        seed = seed.wrapping_mul(1664525).wrapping_add(1013904223);
        *v = (seed >> 8) as f32 / (1u32 << 24) as f32 - 0.5;
    }
    t
}

fn time_case(name: &str, n: usize, ic: usize, oc: usize, h: usize, w: usize, k: usize, stride: usize, transposed: bool) {
    let pad = k / 2;
    let g = ConvGeom { kernel: k, stride, pad };
    let mut x = Tensor::zeros([n, ic, h, w]);
    fill(&mut x, 1);
    let (mut wt, out_hw) = if transposed {
        (Tensor::zeros([ic, oc, k, k]), (h * stride, w * stride))
    } else {
        (Tensor::zeros([oc, ic, k, k]), (h / stride, w / stride))
    };
    fill(&mut wt, 2);
    let bias = Tensor::zeros([1, oc, 1, 1]);

    let macs_fwd = (oc * ic * k * k * out_hw.0 * out_hw.1 * n) as f64;
    let reps = ((2e8 / macs_fwd).ceil() as usize).clamp(3, 400);

    let t0 = Instant::now();
    let mut y = Tensor::zeros([1, 1, 1, 1]);
    for _ in 0..reps {
        y = if transposed {
            convt2d_fwd(&x, &wt, &bias, g, stride - 1)
        } else {
            conv2d_fwd(&x, &wt, &bias, g)
        };
    }
    let fwd_s = t0.elapsed().as_secs_f64() / reps as f64;

    let mut gy = Tensor::zeros(y.shape());
    fill(&mut gy, 3);
    let t1 = Instant::now();
    for _ in 0..reps {
        let _ = if transposed {
            convt2d_bwd(&x, &wt, &gy, g)
        } else {
            conv2d_bwd(&x, &wt, &gy, g)
        };
    }
    let bwd_s = t1.elapsed().as_secs_f64() / reps as f64;

    println!(
        "{name:28} fwd {:7.2} GF/s ({:6.2} ms)   bwd {:7.2} GF/s ({:6.2} ms)",
        2.0 * macs_fwd / fwd_s / 1e9,
        fwd_s * 1e3,
        2.0 * 3.0 * macs_fwd / bwd_s / 1e9,
        bwd_s * 1e3,
    );
}

#[test]
#[ignore = "timing probe, run manually with --nocapture"]
fn conv_throughput() {
    println!();
    // Shapes drawn from the toy generator at widths 8 and 16 on 64x32 images.
    time_case("enc 3->16 k7 32x64", 4, 3, 16, 32, 64, 7, 1, false);
    time_case("down 16->32 k3 s2", 4, 16, 32, 32, 64, 3, 2, false);
    time_case("res 64x 8x16", 4, 64, 64, 8, 16, 3, 1, false);
    time_case("res 32x 8x16 (w=8)", 4, 32, 32, 8, 16, 3, 1, false);
    time_case("up 64->32 convT", 4, 64, 32, 8, 16, 3, 2, true);
    time_case("head 16->3 k3 32x64", 4, 16, 3, 32, 64, 3, 1, false);
    time_case("disc 6->32 k4 s2", 4, 6, 32, 32, 64, 4, 2, false);
}
