#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicedict::pursuit::lasso_objective;
use slicedict::{Image, LocalDictionary, Needle, PatchGeometry, SliceField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
}

/// Dense `N x (n N_s)` placement matrix built by enumerating the padded grid
/// directly: column `i n + k` is the pixel that patch entry `k` of slice `i`
/// lands on, or zero when it falls in the padding.
pub fn placement_matrix(g: &PatchGeometry) -> DMatrix<f64> {
    let (h, w, f) = (g.height(), g.width(), g.filter());
    let n = f * f;
    let gw = w + f - 1;
    let mut p = DMatrix::zeros(h * w, n * g.slice_count());
    for i in 0..g.slice_count() {
        let (r, c) = ((i / gw) as isize, (i % gw) as isize);
        for dy in 0..f {
            for dx in 0..f {
                let y = r + dy as isize - (f as isize - 1);
                let x = c + dx as isize - (f as isize - 1);
                if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                    p[(y as usize * w + x as usize, i * n + dy * f + dx)] = 1.0;
                }
            }
        }
    }
    p
}

pub fn random_field(rng: &mut ChaCha8Rng, g: PatchGeometry, m: usize) -> SliceField {
    let mut f = SliceField::init(&Image::zeros(g.height(), g.width()), g).unwrap();
    for v in f.slices.as_mut_slice() {
        *v = rng.random_range(-1.0..1.0);
    }
    for v in f.duals.as_mut_slice() {
        *v = rng.random_range(-0.5..0.5);
    }
    for a in &mut f.needles {
        let dense: Vec<f64> = (0..m)
            .map(|_| if rng.random_bool(0.6) { rng.random_range(-1.0..1.0) } else { 0.0 })
            .collect();
        *a = Needle::from_dense(&dense);
    }
    f
}

/// Stacked `D a_i - u_i`.
pub fn stacked_z(field: &SliceField, d: &LocalDictionary) -> DVector<f64> {
    let n = d.patch_len();
    let mut z = DVector::zeros(n * field.len());
    for i in 0..field.len() {
        let da = d.synthesize(&field.needles[i]);
        for k in 0..n {
            z[i * n + k] = da[k] - field.duals.get(i)[k];
        }
    }
    z
}

pub fn to_vec(img: &Image) -> DVector<f64> {
    DVector::from_column_slice(img.data())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Minimum of the LASSO objective by enumerating every support and sign
/// pattern and solving the stationarity system on that support.
pub fn enumeration_oracle(d: &LocalDictionary, b: &[f64], lambda: f64) -> f64 {
    let m = d.atom_count();
    let mut best = 0.5 * b.iter().map(|v| v * v).sum::<f64>();
    for support in 1u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|j| support & (1 << j) != 0).collect();
        let k = idx.len();
        let dm = DMatrix::from_fn(d.patch_len(), k, |r, c| d.get(r, idx[c]));
        let g = dm.transpose() * &dm;
        let c = dm.transpose() * DVector::from_column_slice(b);
        for signs in 0u32..(1 << k) {
            let sigma = DVector::from_fn(k, |r, _| if signs & (1 << r) != 0 { 1.0 } else { -1.0 });
            let Some(sol) = g.clone().lu().solve(&(&c - &sigma * lambda)) else {
                continue;
            };
            let mut dense = vec![0.0; m];
            for (r, &j) in idx.iter().enumerate() {
                dense[j] = sol[r];
            }
            best = best.min(lasso_objective(d, b, &Needle::from_dense(&dense), lambda));
        }
    }
    best
}

/// Dense minimizer of `1/2 ||A(X - P s)||^2 + rho/2 ||s - z||^2`, `A` the mask
/// (identity when `None`), `P` the oracle placement matrix.
pub fn dense_slice_solution(
    g: &PatchGeometry,
    x: &Image,
    mask: Option<&Image>,
    z: &DVector<f64>,
    rho: f64,
) -> DVector<f64> {
    let p = placement_matrix(g);
    let a = DMatrix::from_diagonal(&DVector::from_iterator(
        g.pixel_count(),
        (0..g.pixel_count()).map(|k| mask.map_or(1.0, |m| m.data()[k])),
    ));
    let dim = p.ncols();
    let lhs = p.transpose() * &a * &p + DMatrix::identity(dim, dim) * rho;
    let rhs = p.transpose() * &a * to_vec(x) + z * rho;
    lhs.lu().solve(&rhs).unwrap()
}
