//! Inpaints a synthetic image with its generating dictionary and reports the
//! PSNR gain over the zero-filled input.
//!
//!     cargo run --release -p slicedict --example inpainting_gain -- [lambda] [iters] [density] [drop]

use slicedict::engine::inpaint_detailed;
use slicedict::synthetic::{convolutional_image, random_mask, SparseCodes};
use slicedict::{init_dictionary, psnr, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lambda: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let iterations: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let density: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let truth = init_dictionary(25, 8, 1234);
    let codes = SparseCodes { density, ..Default::default() };
    let (x, true_needles) = convolutional_image(&truth, 64, 64, &codes, 99).unwrap();
    let drop: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let mask = random_mask(64, 64, drop, 5);
    let y = x.mul(&mask);
    let cfg = TrainConfig { lambda, iterations, ..Default::default() };
    let start = std::time::Instant::now();
    let out = inpaint_detailed(&y, &mask, &truth, &cfg, false).unwrap();
    let restored = out.image.clone();
    let last = out.metrics.last().unwrap();
    // the generating needles have zero data term, so their objective is lambda * l1
    let l1: f64 = true_needles.iter().map(|n| n.l1_norm()).sum();
    let nnz: usize = true_needles.iter().map(|n| n.nnz()).sum();
    let found: usize = out.field.needles.iter().map(|n| n.nnz()).sum();
    println!(
        "objective found {:.4} (data {:.4}) vs truth {:.4}; nnz found {found} truth {nnz}; primal {:.2e}",
        last.objective, last.data_term, lambda * l1, last.max_primal_residual
    );
    let before = psnr(&x, &y).unwrap();
    let after = psnr(&x, &restored).unwrap();
    println!(
        "lambda {lambda}: zero-filled {before:.2} dB, restored {after:.2} dB, gain {:.2} dB, {:.1}s",
        after - before,
        start.elapsed().as_secs_f64()
    );
}
