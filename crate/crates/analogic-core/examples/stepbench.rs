use analogic_core::net::{build_model, ArchConfig};
use analogic_core::objectives::Batch;
use analogic_core::tensor::Tensor;
use analogic_core::train::{make_optimizers, train_step, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench(label: &str, arch: ArchConfig, batch_size: usize, steps: u64) {
    let cfg = TrainConfig { arch: arch.clone(), batch_size, ..TrainConfig::default() };
    let mut model = build_model::<f32>(&arch, 7).unwrap();
    let (mut og, mut od) = make_optimizers(&model, &cfg).unwrap();
    let phi = cfg.phi();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (h, w) = (arch.image_h, arch.image_w);
    let mut img = |n: usize| Tensor::from_fn([n, 3, h, w], |_| rng.random_range(0.0f32..1.0));
    let b = Batch {
        x_a: img(batch_size),
        x_a_prime: img(batch_size),
        x_b: img(batch_size),
        d_s: Tensor::from_fn([batch_size, 1, h, w], |_| 0.5f32),
        d_t: Tensor::from_fn([batch_size, 1, h, w], |_| 0.5f32),
    };
    let t0 = std::time::Instant::now();
    for _ in 0..steps {
        train_step(&mut model, &b, &cfg, &phi, &mut og, &mut od).unwrap();
    }
    let dt = t0.elapsed().as_secs_f64() / steps as f64;
    println!("{label}: {:.1} ms/step  (2000 steps = {:.1} min, 4000 = {:.1} min)", dt * 1e3, dt * 2000.0 / 60.0, dt * 4000.0 / 60.0);
}

fn main() {
    let base = ArchConfig::default();
    bench("w16 d2 r2 b4 (default)", base.clone(), 4, 8);
    bench("w8  d2 r2 b4", ArchConfig { width: 8, disc_width: 8, ..base.clone() }, 4, 12);
    bench("w8  d2 r1 b4", ArchConfig { width: 8, disc_width: 8, res_blocks: 1, ..base.clone() }, 4, 12);
    bench("w8  d2 r2 b2", ArchConfig { width: 8, disc_width: 8, ..base.clone() }, 2, 12);
}
