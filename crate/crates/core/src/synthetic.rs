//! Seeded synthetic data: images drawn from a known convolutional model,
//! random erasure masks and piecewise-constant cartoons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dictionary::LocalDictionary;
use crate::engine::{filter_side, SliceField};
use crate::error::Result;
use crate::image::{Image, PatchGeometry};
use crate::pursuit::Needle;

/// How sparse codes are drawn for [`convolutional_image`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseCodes {
    /// Probability that a slice position carries a nonzero needle.
    pub density: f64,
    /// Nonzeros per active needle.
    pub nonzeros: usize,
    /// Coefficient magnitudes are uniform in this range, with random sign.
    pub min_amplitude: f64,
    pub max_amplitude: f64,
}

impl Default for SparseCodes {
    fn default() -> Self {
        Self {
            density: 0.05,
            nonzeros: 2,
            min_amplitude: 0.5,
            max_amplitude: 1.5,
        }
    }
}

/// `X = sum_i R_i^T D a_i` with random sparse needles.
pub fn convolutional_image(
    dict: &LocalDictionary,
    height: usize,
    width: usize,
    codes: &SparseCodes,
    seed: u64,
) -> Result<(Image, Vec<Needle>)> {
    let f = filter_side(dict)?;
    let g = PatchGeometry::new(height, width, f)?;
    let m = dict.atom_count();
    let k = codes.nonzeros.min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut needles = Vec::with_capacity(g.slice_count());
    for _ in 0..g.slice_count() {
        if !rng.random_bool(codes.density) {
            needles.push(Needle::zeros());
            continue;
        }
        let atoms = rand::seq::index::sample(&mut rng, m, k);
        let entries = atoms
            .into_iter()
            .map(|j| {
                let mag = rng.random_range(codes.min_amplitude..=codes.max_amplitude);
                (j, if rng.random_bool(0.5) { mag } else { -mag })
            })
            .collect();
        needles.push(Needle::from_entries(entries));
    }
    let mut field = SliceField::init(&Image::zeros(height, width), g)?;
    field.needles = needles;
    let x = field.needle_reconstruction(dict);
    Ok((x, field.needles))
}

/// Binary mask with each pixel dropped (set to 0) with probability `drop_fraction`.
pub fn random_mask(height: usize, width: usize, drop_fraction: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(height, width, |_, _| {
        if rng.random::<f64>() < drop_fraction {
            0.0
        } else {
            1.0
        }
    })
}

/// A few axis-aligned rectangles of random level over a random background.
pub fn piecewise_constant(height: usize, width: usize, regions: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Image::filled(height, width, rng.random_range(-1.0..1.0));
    for _ in 0..regions {
        let y0 = rng.random_range(0..height);
        let x0 = rng.random_range(0..width);
        let y1 = rng.random_range(y0 + 1..=height);
        let x1 = rng.random_range(x0 + 1..=width);
        let level = rng.random_range(-1.5..1.5);
        for y in y0..y1 {
            for x in x0..x1 {
                img.set(y, x, level);
            }
        }
    }
    img
}

/// Four `f x f` cosine gratings (horizontal, vertical and both diagonals),
/// two cycles across the window, unit-normalized.
pub fn grating_bank(f: usize) -> Result<LocalDictionary> {
    let mut cols = Vec::with_capacity(4 * f * f);
    for (fy, fx) in [(0.0, 2.0), (2.0, 0.0), (2.0, 2.0), (2.0, -2.0)] {
        for y in 0..f {
            for x in 0..f {
                let phase = std::f64::consts::TAU * (fy * y as f64 + fx * x as f64) / f as f64;
                cols.push(phase.cos());
            }
        }
    }
    LocalDictionary::from_columns_normalized(f * f, cols)
}
