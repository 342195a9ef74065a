use analogic_core::net::{build_model, ArchConfig};

fn main() {
    let m = build_model::<f32>(&ArchConfig::default(), 7).unwrap();
    println!("default arch:");
    println!("  one generator (fwd): {}", m.params.element_count("gen_fwd."));
    println!("  both generators:     {}", m.params.element_count("gen_"));
    println!("  discs:               {}", m.params.element_count("disc_"));
    println!("  total:               {}", m.params.element_count(""));

    let w8 = ArchConfig { width: 8, disc_width: 8, ..ArchConfig::default() };
    let m8 = build_model::<f32>(&w8, 7).unwrap();
    println!("width-8 arch: gen_fwd {}  total {}", m8.params.element_count("gen_fwd."), m8.params.element_count(""));

    let tiny = ArchConfig {
        width: 1, res_blocks: 1, downsamples: 0,
        image_h: 4, image_w: 8, enc_kernel: 3,
        disc_width: 1, disc_layers: 1, disc_kernel: 3,
    };
    let mt = build_model::<f64>(&tiny, 7).unwrap();
    println!("tiny arch: total {}  (gen_fwd {}, discs {})",
        mt.params.element_count(""), mt.params.element_count("gen_fwd."), mt.params.element_count("disc_"));
    println!("tiny param tensors: {}", mt.params.len());
}
