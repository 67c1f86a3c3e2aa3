//! The local dictionary and its K-SVD update.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::Patches;
use crate::pursuit::Needle;

const UNIT_NORM_TOL: f64 = 1e-8;
const POWER_ITERS: usize = 30;
const POWER_TOL: f64 = 1e-10;

/// `n x m` matrix of unit-norm atoms stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDictionary {
    n: usize,
    m: usize,
    atoms: Vec<f64>,
}

impl LocalDictionary {
    /// Wraps column-major data; every atom must already have unit norm.
    pub fn from_columns(n: usize, atoms: Vec<f64>) -> Result<Self> {
        let d = Self::from_columns_unchecked(n, atoms)?;
        for j in 0..d.m {
            let norm = l2(d.atom(j));
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::AtomNorm { atom: j, norm });
            }
        }
        Ok(d)
    }

    /// Wraps column-major data and rescales every atom to unit norm.
    pub fn from_columns_normalized(n: usize, atoms: Vec<f64>) -> Result<Self> {
        let mut d = Self::from_columns_unchecked(n, atoms)?;
        for j in 0..d.m {
            let a = d.atom_mut(j);
            let norm = l2(a);
            if norm == 0.0 {
                return Err(Error::AtomNorm { atom: j, norm });
            }
            a.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(d)
    }

    fn from_columns_unchecked(n: usize, atoms: Vec<f64>) -> Result<Self> {
        if n == 0 || atoms.is_empty() || atoms.len() % n != 0 {
            return Err(Error::PatchLength {
                expected: n,
                got: atoms.len(),
            });
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            n,
            m: atoms.len() / n,
            atoms,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.n
    }

    pub fn atom_count(&self) -> usize {
        self.m
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.n..(j + 1) * self.n]
    }

    fn atom_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.atoms[j * self.n..(j + 1) * self.n]
    }

    /// Entry at row `r` of atom `j`.
    pub fn get(&self, r: usize, j: usize) -> f64 {
        self.atoms[j * self.n + r]
    }

    /// Column-major atom data.
    pub fn as_slice(&self) -> &[f64] {
        &self.atoms
    }

    /// `D a`.
    pub fn synthesize(&self, needle: &Needle) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.synthesize_into(needle, &mut out);
        out
    }

    pub(crate) fn synthesize_into(&self, needle: &Needle, out: &mut [f64]) {
        out.fill(0.0);
        for (j, c) in needle.iter() {
            for (o, a) in out.iter_mut().zip(self.atom(j)) {
                *o += c * a;
            }
        }
    }

    /// `D^T b`.
    pub fn correlate(&self, b: &[f64]) -> Vec<f64> {
        self.atoms
            .chunks(self.n)
            .map(|a| a.iter().zip(b).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn canonicalize_sign(&mut self, j: usize) -> bool {
        let a = self.atom_mut(j);
        if let Some(&first) = a.iter().find(|v| **v != 0.0) {
            if first < 0.0 {
                a.iter_mut().for_each(|v| *v = -*v);
                return true;
            }
        }
        false
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Seeded standard-normal atoms, normalized to unit length.
pub fn init_dictionary(n: usize, m: usize, seed: u64) -> LocalDictionary {
    assert!(n >= 1 && m >= 1, "dictionary must have n >= 1 and m >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let atoms: Vec<f64> = (0..n * m).map(|_| StandardNormal.sample(&mut rng)).collect();
        // an all-zero Gaussian column is measure-zero; redraw if it happens
        if let Ok(d) = LocalDictionary::from_columns_normalized(n, atoms) {
            return d;
        }
    }
}

/// `sum_i ||t_i - D a_i||^2`.
pub fn representation_error(dict: &LocalDictionary, targets: &Patches, needles: &[Needle]) -> f64 {
    let mut recon = vec![0.0; dict.patch_len()];
    targets
        .iter()
        .zip(needles)
        .map(|(t, a)| {
            dict.synthesize_into(a, &mut recon);
            t.iter().zip(&recon).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    /// Representation error before the first sweep and after each sweep.
    pub fit: Vec<f64>,
    /// Number of unused atoms replaced across all sweeps.
    pub replaced_atoms: usize,
}

/// K-SVD passes over `targets` (`t_i = s_i + u_i`) and their needles.
///
/// Each atom in turn is refit to the leading singular pair of its restricted
/// residual; coefficients change only on existing supports. An atom nobody
/// uses is replaced by the normalized worst-represented target (each target
/// is used at most once per sweep).
pub fn dictionary_update(
    dict: &mut LocalDictionary,
    targets: &Patches,
    needles: &mut [Needle],
    sweeps: usize,
) -> Result<UpdateReport> {
    let n = dict.patch_len();
    let m = dict.atom_count();
    if targets.count() == 0 {
        return Err(Error::NoTargets);
    }
    if targets.patch_len() != n {
        return Err(Error::PatchLength {
            expected: n,
            got: targets.patch_len(),
        });
    }
    if targets.count() != needles.len() {
        return Err(Error::SliceCount {
            expected: targets.count(),
            got: needles.len(),
        });
    }
    if sweeps == 0 {
        return Err(Error::InvalidConfig("dictionary sweeps must be >= 1".into()));
    }

    let count = targets.count();
    let mut residual = Patches::zeros(count, n);
    let mut recon = vec![0.0; n];
    for (i, r) in residual.iter_mut().enumerate() {
        dict.synthesize_into(&needles[i], &mut recon);
        for ((rv, t), d) in r.iter_mut().zip(targets.get(i)).zip(&recon) {
            *rv = t - d;
        }
    }
    let fit_of = |residual: &Patches| residual.as_slice().iter().map(|v| v * v).sum::<f64>();

    let mut report = UpdateReport {
        fit: vec![fit_of(&residual)],
        replaced_atoms: 0,
    };

    for _ in 0..sweeps {
        // users[j] = (slice, position of atom j inside that needle)
        let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
        for (i, needle) in needles.iter().enumerate() {
            for (k, (j, _)) in needle.iter().enumerate() {
                users[j].push((i, k));
            }
        }
        let mut used_as_replacement = vec![false; count];

        for j in 0..m {
            let active: Vec<(usize, usize)> = users[j]
                .iter()
                .copied()
                .filter(|&(i, k)| needles[i].entry_at(k).1 != 0.0)
                .collect();
            if active.is_empty() {
                if replace_dead_atom(dict, j, &residual, &mut used_as_replacement) {
                    report.replaced_atoms += 1;
                }
                continue;
            }
            refit_atom(dict, j, &active, &mut residual, needles);
        }

        for j in 0..m {
            if dict.canonicalize_sign(j) {
                for &(i, k) in &users[j] {
                    let e = &mut needles[i].entries_mut()[k];
                    e.1 = -e.1;
                }
            }
        }
        report.fit.push(fit_of(&residual));
    }

    for needle in needles.iter_mut() {
        needle.prune_zeros();
    }
    Ok(report)
}

fn replace_dead_atom(
    dict: &mut LocalDictionary,
    j: usize,
    residual: &Patches,
    taken: &mut [bool],
) -> bool {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in residual.iter().enumerate() {
        if taken[i] {
            continue;
        }
        let e: f64 = r.iter().map(|v| v * v).sum();
        if e > 0.0 && best.is_none_or(|(_, b)| e > b) {
            best = Some((i, e));
        }
    }
    let Some((i, e)) = best else {
        return false;
    };
    taken[i] = true;
    let norm = e.sqrt();
    for (a, r) in dict.atom_mut(j).iter_mut().zip(residual.get(i)) {
        *a = r / norm;
    }
    true
}

/// Rank-1 refit of atom `j` over its active users; updates `residual` in place.
fn refit_atom(
    dict: &mut LocalDictionary,
    j: usize,
    active: &[(usize, usize)],
    residual: &mut Patches,
    needles: &mut [Needle],
) {
    let n = dict.patch_len();
    let k = active.len();
    let atom: Vec<f64> = dict.atom(j).to_vec();

    // E = restricted residual with atom j's contribution added back, n x k column-major
    let mut e = vec![0.0; n * k];
    for (c, &(i, pos)) in active.iter().enumerate() {
        let coef = needles[i].entry_at(pos).1;
        let col = &mut e[c * n..(c + 1) * n];
        for ((ev, r), a) in col.iter_mut().zip(residual.get(i)).zip(&atom) {
            *ev = r + coef * a;
        }
    }

    let project = |d: &[f64], v: &mut [f64]| {
        for (c, vc) in v.iter_mut().enumerate() {
            *vc = e[c * n..(c + 1) * n].iter().zip(d).map(|(x, y)| x * y).sum();
        }
    };
    let expand = |v: &[f64], w: &mut [f64]| {
        w.fill(0.0);
        for (c, &vc) in v.iter().enumerate() {
            for (wr, x) in w.iter_mut().zip(&e[c * n..(c + 1) * n]) {
                *wr += vc * x;
            }
        }
    };

    let mut d = atom.clone();
    let mut v = vec![0.0; k];
    let mut w = vec![0.0; n];
    project(&d, &mut v);
    if l2(&v) == 0.0 {
        // current atom is orthogonal to the residual: start from its largest column
        let best = (0..k)
            .max_by(|&a, &b| {
                l2(&e[a * n..(a + 1) * n])
                    .partial_cmp(&l2(&e[b * n..(b + 1) * n]))
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap();
        let col = &e[best * n..(best + 1) * n];
        let norm = l2(col);
        if norm == 0.0 {
            for &(i, pos) in active {
                needles[i].entries_mut()[pos].1 = 0.0;
            }
            return;
        }
        d = col.iter().map(|x| x / norm).collect();
        project(&d, &mut v);
    }
    for _ in 0..POWER_ITERS {
        expand(&v, &mut w);
        let norm = l2(&w);
        if norm == 0.0 {
            break;
        }
        let change = w
            .iter()
            .zip(&d)
            .map(|(x, y)| (x / norm - y).powi(2))
            .sum::<f64>()
            .sqrt();
        d.iter_mut().zip(&w).for_each(|(dv, x)| *dv = x / norm);
        project(&d, &mut v);
        if change < POWER_TOL {
            break;
        }
    }

    dict.atom_mut(j).copy_from_slice(&d);
    for (c, &(i, pos)) in active.iter().enumerate() {
        needles[i].entries_mut()[pos].1 = v[c];
        let col = &e[c * n..(c + 1) * n];
        for ((r, x), a) in residual.get_mut(i).iter_mut().zip(col).zip(&d) {
            *r = x - v[c] * a;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn init_is_unit_norm_and_deterministic() {
        for &(n, m, seed) in &[(1, 1, 0), (9, 4, 7), (121, 100, 42)] {
            let d = init_dictionary(n, m, seed);
            assert_eq!(d.patch_len(), n);
            assert_eq!(d.atom_count(), m);
            for j in 0..m {
                assert!((l2(d.atom(j)) - 1.0).abs() < 1e-12);
            }
            assert_eq!(d, init_dictionary(n, m, seed));
        }
        assert_ne!(init_dictionary(9, 4, 1), init_dictionary(9, 4, 2));
    }

    #[test]
    fn from_columns_rejects_non_unit() {
        assert!(matches!(
            LocalDictionary::from_columns(2, vec![1.0, 1.0]),
            Err(Error::AtomNorm { atom: 0, .. })
        ));
        assert!(LocalDictionary::from_columns_normalized(2, vec![0.0, 0.0]).is_err());
        assert!(LocalDictionary::from_columns(2, vec![1.0, 0.0, 0.0]).is_err());
    }

    fn random_needles(rng: &mut ChaCha8Rng, count: usize, m: usize, k: usize) -> Vec<Needle> {
        (0..count)
            .map(|_| {
                let mut e = Vec::new();
                while e.len() < k {
                    let j = rng.random_range(0..m);
                    if !e.iter().any(|&(a, _)| a == j) {
                        e.push((j, rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }));
                    }
                }
                Needle::from_entries(e)
            })
            .collect()
    }

    #[test]
    fn empty_targets_rejected() {
        let mut d = init_dictionary(4, 2, 0);
        assert_eq!(
            dictionary_update(&mut d, &Patches::zeros(0, 4), &mut [], 1),
            Err(Error::NoTargets)
        );
    }

    #[test]
    fn exact_representation_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d0 = init_dictionary(16, 5, 3);
        let mut needles = random_needles(&mut rng, 40, 5, 2);
        let mut targets = Patches::zeros(0, 16);
        for a in &needles {
            targets.push(&d0.synthesize(a));
        }
        let mut d = d0.clone();
        let report = dictionary_update(&mut d, &targets, &mut needles, 3).unwrap();
        for f in &report.fit {
            assert!(*f < 1e-20, "fit {f}");
        }
        for j in 0..5 {
            let same = d.atom(j).iter().zip(d0.atom(j)).all(|(a, b)| (a - b).abs() < 1e-9);
            let flipped = d.atom(j).iter().zip(d0.atom(j)).all(|(a, b)| (a + b).abs() < 1e-9);
            assert!(same || flipped);
        }
    }

    #[test]
    fn single_atom_aligns_with_shared_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scales: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut targets = Patches::zeros(0, 9);
        for s in &scales {
            targets.push(&v.iter().map(|x| s * x).collect::<Vec<_>>());
        }
        // oracle: power iteration on T^T T written independently
        let mut u = vec![1.0; 9];
        for _ in 0..200 {
            let mut next = vec![0.0; 9];
            for t in targets.iter() {
                let p: f64 = t.iter().zip(&u).map(|(a, b)| a * b).sum();
                next.iter_mut().zip(t).for_each(|(nx, a)| *nx += p * a);
            }
            let norm = l2(&next);
            u = next.iter().map(|x| x / norm).collect();
        }
        let mut d = init_dictionary(9, 1, 8);
        let mut needles: Vec<Needle> = (0..12).map(|_| Needle::from_entries(vec![(0, 1.0)])).collect();
        dictionary_update(&mut d, &targets, &mut needles, 1).unwrap();
        let cos: f64 = d.atom(0).iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!((cos.abs() - 1.0).abs() < 1e-9);
        let vn = l2(&v);
        let cos_v: f64 = d.atom(0).iter().zip(&v).map(|(a, b)| a * b / vn).sum();
        assert!((cos_v.abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unused_atom_is_replaced_by_worst_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut d = init_dictionary(4, 2, 5);
        let mut targets = Patches::zeros(0, 4);
        for _ in 0..6 {
            targets.push(&(0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        }
        let mut needles: Vec<Needle> = (0..6).map(|_| Needle::from_entries(vec![(0, 0.3)])).collect();
        // residual of each target after atom 0 is refit determines the worst one
        let report = dictionary_update(&mut d, &targets, &mut needles, 1).unwrap();
        assert_eq!(report.replaced_atoms, 1);
        let mut worst = (0, -1.0);
        for (i, t) in targets.iter().enumerate() {
            let r: Vec<f64> = t.iter().zip(d.synthesize(&needles[i])).map(|(a, b)| a - b).collect();
            let e = l2(&r);
            if e > worst.1 {
                worst = (i, e);
            }
        }
        let t = targets.get(worst.0);
        let r: Vec<f64> = t.iter().zip(d.synthesize(&needles[worst.0])).map(|(a, b)| a - b).collect();
        let cos: f64 = d.atom(1).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / l2(&r);
        assert!((cos.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_is_monotone_and_supports_do_not_grow() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut d = init_dictionary(25, 10, 6);
        let mut targets = Patches::zeros(0, 25);
        for _ in 0..80 {
            targets.push(&(0..25).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        }
        let mut needles = random_needles(&mut rng, 80, 10, 3);
        let supports: Vec<Vec<usize>> = needles.iter().map(|a| a.support()).collect();
        let report = dictionary_update(&mut d, &targets, &mut needles, 10).unwrap();
        for w in report.fit.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        for (a, s) in needles.iter().zip(&supports) {
            assert!(a.support().iter().all(|j| s.contains(j)));
        }
        for j in 0..10 {
            assert!((l2(d.atom(j)) - 1.0).abs() < 1e-10);
            let first = d.atom(j).iter().find(|v| **v != 0.0).unwrap();
            assert!(*first >= 0.0);
        }
        let direct = representation_error(&d, &targets, &needles);
        assert!((direct - report.fit.last().unwrap()).abs() < 1e-9 * (1.0 + direct));
    }
}
