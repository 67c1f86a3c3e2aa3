//! Per-slice LASSO pursuit: `min_a 1/2 ||b - D a||^2 + lambda' ||a||_1`
//! by cyclic coordinate descent over a precomputed Gram matrix.

use nalgebra::{DMatrix, DVector};

use crate::dictionary::LocalDictionary;
use crate::error::{Error, Result};

/// Sparse coefficient vector over the atoms of a [`LocalDictionary`].
///
/// Entries are kept sorted by atom index and never store zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Needle {
    entries: Vec<(usize, f64)>,
}

impl Needle {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        Self {
            entries: dense
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect(),
        }
    }

    /// Builds a needle from `(atom, coefficient)` pairs; zeros are dropped.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(j, _)| j);
        entries.dedup_by_key(|e| e.0);
        Self { entries }
    }

    pub fn to_dense(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        self.scatter(&mut out);
        out
    }

    pub(crate) fn scatter(&self, out: &mut [f64]) {
        for &(j, v) in &self.entries {
            out[j] = v;
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn get(&self, atom: usize) -> f64 {
        self.entries
            .binary_search_by_key(&atom, |&(j, _)| j)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|&(j, _)| j).collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v.abs()).sum()
    }

    pub(crate) fn entry_at(&self, k: usize) -> (usize, f64) {
        self.entries[k]
    }

    pub(crate) fn entries_mut(&mut self) -> &mut Vec<(usize, f64)> {
        &mut self.entries
    }

    pub(crate) fn prune_zeros(&mut self) {
        self.entries.retain(|&(_, v)| v != 0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PursuitConfig {
    /// Weight of the l1 term after dividing by the ADMM penalty.
    pub lambda: f64,
    pub max_sweeps: usize,
    pub tolerance: f64,
    /// Optional cap on the number of nonzeros per needle.
    pub max_nonzeros: Option<usize>,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_sweeps: 200,
            tolerance: 1e-6,
            max_nonzeros: None,
        }
    }
}

impl PursuitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig("lasso weight must be >= 0".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max sweeps must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("pursuit tolerance must be > 0".into()));
        }
        if self.max_nonzeros == Some(0) {
            return Err(Error::InvalidConfig("nonzero cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// Symmetric `m x m` Gram matrix `D^T D`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    m: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }
}

pub fn gram(dict: &LocalDictionary) -> Gram {
    let m = dict.atom_count();
    let mut data = vec![0.0; m * m];
    for i in 0..m {
        let di = dict.atom(i);
        for j in i..m {
            let v: f64 = di.iter().zip(dict.atom(j)).map(|(a, b)| a * b).sum();
            data[i * m + j] = v;
            data[j * m + i] = v;
        }
    }
    Gram { m, data }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PursuitResult {
    pub needle: Needle,
    pub sweeps: usize,
    /// False when the sweep budget ran out; `needle` is then the last iterate.
    pub converged: bool,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn max_kkt_violation(alpha: &[f64], q: &[f64], lambda: f64) -> f64 {
    alpha
        .iter()
        .zip(q)
        .map(|(&a, &g)| {
            if a != 0.0 {
                (g - lambda * a.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Solves the LASSO for one slice target `b`, warm-started from `warm`.
pub fn lasso_solve(
    dict: &LocalDictionary,
    gram: &Gram,
    b: &[f64],
    cfg: &PursuitConfig,
    warm: Option<&Needle>,
) -> Result<PursuitResult> {
    let n = dict.patch_len();
    let m = dict.atom_count();
    if b.len() != n {
        return Err(Error::PatchLength {
            expected: n,
            got: b.len(),
        });
    }
    let lambda = cfg.lambda;

    let corr = dict.correlate(b);
    let mut alpha = vec![0.0; m];
    if let Some(w) = warm {
        w.scatter(&mut alpha);
    }
    // q = D^T (b - D alpha)
    let mut q = corr.clone();
    for (j, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            for (qk, g) in q.iter_mut().zip(gram.row(j)) {
                *qk -= a * g;
            }
        }
    }

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..m {
            let gjj = gram.get(j, j);
            let old = alpha[j];
            let new = soft_threshold(q[j] + gjj * old, lambda) / gjj;
            if new != old {
                let delta = new - old;
                for (qk, g) in q.iter_mut().zip(gram.row(j)) {
                    *qk -= delta * g;
                }
                alpha[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < cfg.tolerance && max_kkt_violation(&alpha, &q, lambda) <= cfg.tolerance {
            converged = true;
            break;
        }
    }

    if let Some(k) = cfg.max_nonzeros {
        let nnz = alpha.iter().filter(|&&a| a != 0.0).count();
        if nnz > k {
            alpha = truncate_and_refit(gram, &corr, &alpha, k);
        }
    }

    Ok(PursuitResult {
        needle: Needle::from_dense(&alpha),
        sweeps,
        converged,
    })
}

/// Keeps the `k` largest-magnitude coefficients (lower index wins ties) and
/// re-solves least squares on that support.
fn truncate_and_refit(gram: &Gram, corr: &[f64], alpha: &[f64], k: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..alpha.len()).filter(|&j| alpha[j] != 0.0).collect();
    order.sort_by(|&a, &b| {
        alpha[b]
            .abs()
            .partial_cmp(&alpha[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order.sort_unstable();

    let g = DMatrix::from_fn(k, k, |r, c| gram.get(order[r], order[c]));
    let rhs = DVector::from_fn(k, |r, _| corr[order[r]]);
    let sol = match g.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => g
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| DVector::from_fn(k, |r, _| alpha[order[r]])),
    };

    let mut out = vec![0.0; alpha.len()];
    for (r, &j) in order.iter().enumerate() {
        out[j] = sol[r];
    }
    out
}

/// `1/2 ||b - D a||^2 + lambda ||a||_1`.
pub fn lasso_objective(dict: &LocalDictionary, b: &[f64], needle: &Needle, lambda: f64) -> f64 {
    let recon = dict.synthesize(needle);
    let fit: f64 = b.iter().zip(&recon).map(|(x, y)| (x - y) * (x - y)).sum();
    0.5 * fit + lambda * needle.l1_norm()
}

/// Largest first-order optimality violation, recomputed from scratch.
pub fn kkt_residual(dict: &LocalDictionary, b: &[f64], needle: &Needle, lambda: f64) -> f64 {
    let recon = dict.synthesize(needle);
    let resid: Vec<f64> = b.iter().zip(&recon).map(|(x, y)| x - y).collect();
    let q = dict.correlate(&resid);
    max_kkt_violation(&needle.to_dense(dict.atom_count()), &q, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::init_dictionary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(lambda: f64) -> PursuitConfig {
        PursuitConfig {
            lambda,
            tolerance: 1e-10,
            max_sweeps: 10_000,
            ..Default::default()
        }
    }

    #[test]
    fn gram_of_orthonormal_is_identity() {
        let d = LocalDictionary::from_columns(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
            .unwrap();
        let g = gram(&d);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        let single = init_dictionary(5, 1, 3);
        assert!((gram(&single).get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_matches_naive_dot_products() {
        let d = init_dictionary(4, 3, 11);
        let g = gram(&d);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for r in 0..4 {
                    s += d.get(r, i) * d.get(r, j);
                }
                assert!((g.get(i, j) - s).abs() < 1e-14);
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
    }

    #[test]
    fn zero_target_gives_zero_needle() {
        let d = init_dictionary(9, 4, 1);
        let g = gram(&d);
        let r = lasso_solve(&d, &g, &[0.0; 9], &cfg(0.1), None).unwrap();
        assert!(r.needle.is_zero());
        assert!(r.converged);
    }

    #[test]
    fn deadzone_gives_zero_needle() {
        let d = init_dictionary(9, 4, 2);
        let g = gram(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lmax = d.correlate(&b).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let r = lasso_solve(&d, &g, &b, &cfg(lmax), None).unwrap();
        assert!(r.needle.is_zero());
    }

    #[test]
    fn scalar_soft_threshold() {
        let d = LocalDictionary::from_columns(1, vec![1.0]).unwrap();
        let g = gram(&d);
        let r = lasso_solve(&d, &g, &[2.0], &cfg(0.5), None).unwrap();
        assert_eq!(r.needle.to_dense(1), vec![1.5]);
    }

    #[test]
    fn wrong_target_length() {
        let d = init_dictionary(9, 4, 1);
        let g = gram(&d);
        assert!(lasso_solve(&d, &g, &[0.0; 8], &cfg(0.1), None).is_err());
    }

    #[test]
    fn sweep_budget_exhaustion_is_flagged() {
        let d = init_dictionary(4, 12, 5);
        let g = gram(&d);
        let b = [1.0, -2.0, 0.5, 3.0];
        let c = PursuitConfig {
            lambda: 1e-4,
            max_sweeps: 1,
            tolerance: 1e-12,
            max_nonzeros: None,
        };
        let r = lasso_solve(&d, &g, &b, &c, None).unwrap();
        assert!(!r.converged);
        assert_eq!(r.sweeps, 1);
    }

    #[test]
    fn nonzero_cap_truncates_and_refits() {
        let d = init_dictionary(16, 6, 9);
        let g = gram(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let free = lasso_solve(&d, &g, &b, &cfg(0.01), None).unwrap().needle;
        assert!(free.nnz() > 2);
        let capped = lasso_solve(
            &d,
            &g,
            &b,
            &PursuitConfig {
                max_nonzeros: Some(2),
                ..cfg(0.01)
            },
            None,
        )
        .unwrap()
        .needle;
        assert_eq!(capped.nnz(), 2);
        // the kept atoms are the two largest of the free solution
        let mut mags: Vec<(usize, f64)> = free.iter().map(|(j, v)| (j, v.abs())).collect();
        mags.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let mut top: Vec<usize> = mags[..2].iter().map(|e| e.0).collect();
        top.sort();
        assert_eq!(capped.support(), top);
        // least-squares optimality on the support: D_S^T (b - D a) = 0
        let q = d.correlate(
            &b.iter()
                .zip(d.synthesize(&capped))
                .map(|(x, y)| x - y)
                .collect::<Vec<_>>(),
        );
        for j in capped.support() {
            assert!(q[j].abs() < 1e-10);
        }
    }

    #[test]
    fn needle_helpers() {
        let n = Needle::from_entries(vec![(3, 2.0), (1, -1.0), (2, 0.0)]);
        assert_eq!(n.support(), vec![1, 3]);
        assert_eq!(n.get(3), 2.0);
        assert_eq!(n.get(2), 0.0);
        assert_eq!(n.l1_norm(), 3.0);
        assert_eq!(n.to_dense(4), vec![0.0, -1.0, 0.0, 2.0]);
        assert_eq!(Needle::from_dense(&n.to_dense(4)), n);
    }
}
