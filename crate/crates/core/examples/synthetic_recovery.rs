//! Trains on an image synthesized from a known dictionary and reports how
//! many atoms are recovered.
//!
//!     cargo run --release -p slicedict --example synthetic_recovery -- [lambda] [iters] [density] [atoms]

use slicedict::synthetic::{convolutional_image, SparseCodes};
use slicedict::{init_dictionary, train, LocalDictionary, TrainConfig};

/// Greedy one-to-one matching on `|<found, truth>|`; counts pairs above `threshold`.
fn matched_atoms(found: &LocalDictionary, truth: &LocalDictionary, threshold: f64) -> usize {
    let (mf, mt) = (found.atom_count(), truth.atom_count());
    let mut pairs = Vec::new();
    for a in 0..mf {
        for b in 0..mt {
            let c: f64 = found.atom(a).iter().zip(truth.atom(b)).map(|(x, y)| x * y).sum();
            pairs.push((c.abs(), a, b));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut used_f = vec![false; mf];
    let mut used_t = vec![false; mt];
    let mut hits = 0;
    for (c, a, b) in pairs {
        if used_f[a] || used_t[b] {
            continue;
        }
        used_f[a] = true;
        used_t[b] = true;
        if c > threshold {
            hits += 1;
        }
    }
    hits
}

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() {
    let lambda = arg(1, 0.1);
    let iterations = arg(2, 300);
    let density = arg(3, 0.01);
    let atoms = arg(4, 8);

    let truth = init_dictionary(25, 8, 1234);
    let codes = SparseCodes { density, ..Default::default() };
    let (x, _) = convolutional_image(&truth, 64, 64, &codes, 99).unwrap();
    let d0 = init_dictionary(25, atoms, 7);
    let cfg = TrainConfig { lambda, rho: 1.0, iterations, ..Default::default() };

    let start = std::time::Instant::now();
    let out = train(&[x], &cfg, &d0).unwrap();
    for row in out.metrics.iter().step_by((iterations / 10).max(1)) {
        println!(
            "iter {:4} obj {:10.4} data {:9.5} l1 {:9.4} primal {:.2e}",
            row.iter, row.objective, row.data_term, row.l1_term, row.max_primal_residual
        );
    }
    let best: Vec<String> = (0..truth.atom_count())
        .map(|b| {
            let c = (0..out.dictionary.atom_count())
                .map(|a| out.dictionary.atom(a).iter().zip(truth.atom(b)).map(|(x, y)| x * y).sum::<f64>().abs())
                .fold(0.0, f64::max);
            format!("{c:.3}")
        })
        .collect();
    println!("best |inner product| per true atom: {}", best.join(" "));
    if let Some(last) = out.metrics.last() {
        println!(
            "lambda {lambda}: matched {}/8, final primal residual {:.3e}, {:.1}s",
            matched_atoms(&out.dictionary, &truth, 0.95),
            last.max_primal_residual,
            start.elapsed().as_secs_f64()
        );
    }
}
