use analogic::manifest::Split;
fn main() {
    let args: Vec<String> = std::env::args().collect();
    let ckpt = analogic::checkpoint::load_checkpoint(std::path::Path::new(&args[1])).unwrap();
    let lm = analogic::manifest::load_manifest(std::path::Path::new(&args[2])).unwrap();
    let range = lm.manifest.depth_quantization.range().unwrap();
    let far = lm.manifest.far_plane;
    // Stratify |M - M*| by depth band over the source split; also track the
    // mean prediction and mean target per band to separate bias from spread.
    let mut bands = [[0.0f64; 4]; 4]; // [sum_err, count, sum_pred, sum_true]
    let mut overall = [0.0f64; 2]; // [m_mae_sum, n_mae_sum]
    let mut total = 0.0f64;
    for e in lm.manifest.split(Split::Source) {
        let clear = analogic::pngio::load_rgb(&lm.resolve(&e.clear_path)).unwrap();
        let depth = analogic::pngio::load_depth16(&lm.resolve(&e.depth_path), range).unwrap();
        let oracle = analogic_core::fog::oracle_gist(&depth, e.fog.params().unwrap()).unwrap();
        let g = analogic_core::net::forward_gist(
            &ckpt.model,
            analogic_core::net::GenSide::Forward,
            &clear,
        )
        .unwrap();
        let [_, _, h, w] = depth.shape();
        let hw = h * w;
        for i in 0..hw {
            let d = depth.data()[i];
            let band = if d >= far - 0.01 {
                0
            } else if d > 15.0 {
                1
            } else if d > 5.0 {
                2
            } else {
                3
            };
            for c in 0..3 {
                let pred = g.m().data()[c * hw + i] as f64;
                let tru = oracle.m().data()[c * hw + i];
                bands[band][0] += (pred - tru).abs();
                bands[band][1] += 1.0;
                bands[band][2] += pred;
                bands[band][3] += tru;
                overall[0] += (pred - tru).abs();
                overall[1] +=
                    (g.n().data()[c * hw + i] as f64 - oracle.n().data()[c * hw + i]).abs();
                total += 1.0;
            }
        }
    }
    for (name, b) in ["sky(=far)", "15-40m", "5-15m", "<5m"].iter().zip(bands) {
        if b[1] == 0.0 {
            println!("{name:>10}: empty");
            continue;
        }
        println!(
            "{name:>10}: mae {:.4}  share {:.2}  pred {:.3}  true {:.3}",
            b[0] / b[1],
            b[1] / bands.iter().map(|x| x[1]).sum::<f64>(),
            b[2] / b[1],
            b[3] / b[1]
        );
    }
    println!(
        "   overall: M mae {:.5}  N mae {:.5}",
        overall[0] / total,
        overall[1] / total
    );
}
