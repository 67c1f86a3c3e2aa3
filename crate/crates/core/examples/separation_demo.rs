//! Separates a piecewise-constant cartoon plus a grating texture and reports
//! how well each component is recovered.
//!
//!     cargo run --release -p slicedict --example separation_demo -- [lambda] [xi] [eta] [iters]

use slicedict::synthetic::{convolutional_image, grating_bank, piecewise_constant, SparseCodes};
use slicedict::{init_dictionary, separate, Image, SeparationConfig};

fn correlation(a: &Image, b: &Image) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        ab += (x - ma) * (y - mb);
        aa += (x - ma) * (x - ma);
        bb += (y - mb) * (y - mb);
    }
    ab / (aa * bb).sqrt()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (lambda, xi, eta, iterations) = (arg(1, 0.1), arg(2, 0.03), arg(3, 1.0), arg(4, 100.0) as usize);
    let f = 8;
    let bank = grating_bank(f).unwrap();
    let codes = SparseCodes { density: 0.03, nonzeros: 1, min_amplitude: 0.5, max_amplitude: 1.0 };
    let (texture, _) = convolutional_image(&bank, 64, 64, &codes, 3).unwrap();
    let cartoon = piecewise_constant(64, 64, 4, 11);
    let x = cartoon.add(&texture);
    println!("cartoon std {:.3} texture std {:.3}", cartoon.std(), texture.std());

    // the texture dictionary starts from noise, not from the generating bank
    let d0 = init_dictionary(f * f, bank.atom_count(), 0);
    let cfg = SeparationConfig {
        lambda,
        xi,
        eta,
        iterations,
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let out = separate(&x, &d0, &cfg).unwrap();
    let resid = x.sub(&out.cartoon).sub(&out.texture).norm() / x.norm();
    println!(
        "lambda {lambda} xi {xi} eta {eta}: corr cartoon {:.3} texture {:.3}, residual {resid:.3}, {:.1}s",
        correlation(&out.cartoon, &cartoon),
        correlation(&out.texture, &texture),
        start.elapsed().as_secs_f64()
    );
}
