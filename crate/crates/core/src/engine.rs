//! The ADMM outer loop over slices, needles, duals and the local dictionary.
//!
//! One iteration runs, in order: LASSO pursuit on `s_i + u_i`, the
//! closed-form slice update (estimate `p_i`, aggregate, subtract the
//! averaged re-extraction), the dual update `u_i += s_i - D a_i`, and a
//! K-SVD pass over the targets `s_i + u_i`.

use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dictionary::{dictionary_update, LocalDictionary};
use crate::error::{Error, Result};
use crate::image::{Image, PatchGeometry, Patches};
use crate::pursuit::{gram, lasso_solve, Gram, Needle, PursuitConfig};

/// Slices, duals and needles over the padded slice grid of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceField {
    geometry: PatchGeometry,
    pub slices: Patches,
    pub duals: Patches,
    pub needles: Vec<Needle>,
}

impl SliceField {
    /// `s_i = R_i X / n`, `u_i = 0`, empty needles.
    pub fn init(x: &Image, geometry: PatchGeometry) -> Result<Self> {
        let n = geometry.patch_len();
        let slices = geometry.extract_all(x, 1.0 / n as f64)?;
        let count = geometry.slice_count();
        Ok(Self {
            geometry,
            slices,
            duals: Patches::zeros(count, n),
            needles: vec![Needle::zeros(); count],
        })
    }

    pub fn geometry(&self) -> PatchGeometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.needles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.needles.is_empty()
    }

    /// `sum_i R_i^T s_i`.
    pub fn slice_reconstruction(&self) -> Image {
        self.geometry.aggregate(&self.slices).expect("field is consistent")
    }

    /// `sum_i R_i^T D a_i`, the reconstruction implied by the needles.
    pub fn needle_reconstruction(&self, dict: &LocalDictionary) -> Image {
        let g = self.geometry;
        let mut acc = Image::zeros(g.height(), g.width());
        let mut buf = vec![0.0; g.patch_len()];
        for (i, a) in self.needles.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            dict.synthesize_into(a, &mut buf);
            g.place_into(acc.data_mut(), i, &buf, 1.0);
        }
        acc
    }

    /// `max_i ||s_i - D a_i||_2`.
    pub fn max_primal_residual(&self, dict: &LocalDictionary) -> f64 {
        self.slices
            .as_slice()
            .par_chunks(self.geometry.patch_len())
            .zip(self.needles.par_iter())
            .map(|(s, a)| {
                let r = dict.synthesize(a);
                s.iter().zip(&r).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })
            .reduce(|| 0.0, f64::max)
    }
}

pub fn init_slicefield(x: &Image, geometry: PatchGeometry) -> Result<SliceField> {
    SliceField::init(x, geometry)
}

fn check_dictionary(geometry: &PatchGeometry, dict: &LocalDictionary) -> Result<()> {
    if dict.patch_len() != geometry.patch_len() {
        return Err(Error::DictionaryShape {
            dict: dict.patch_len(),
            geometry: geometry.patch_len(),
        });
    }
    Ok(())
}

/// Filter side of a dictionary whose atoms are square `f x f` patches.
pub fn filter_side(dict: &LocalDictionary) -> Result<usize> {
    let n = dict.patch_len();
    let f = (n as f64).sqrt().round() as usize;
    if f * f != n {
        return Err(Error::InvalidConfig(format!(
            "patch dimension {n} is not a square"
        )));
    }
    Ok(f)
}

/// Closed-form joint minimizer of
/// `1/2 ||A(Y - sum R_i^T s_i)||^2 + rho/2 sum ||s_i - D a_i + u_i||^2`
/// for binary diagonal `A` (identity when `mask` is `None`).
///
/// `data` is pre-scaled: `p_i = data_scale * R_i Y + D a_i - u_i`, and the
/// averaged correction is `avg_scale * R_i A sum_j R_j^T p_j`.
fn local_laplacian_update(
    field: &mut SliceField,
    data: &Image,
    mask: Option<&Image>,
    dict: &LocalDictionary,
    data_scale: f64,
    avg_scale: f64,
) {
    let g = field.geometry;
    let n = g.patch_len();
    let y = data.data();

    // slice reconstruction p_i, stored in place of s_i
    field
        .slices
        .as_mut_slice()
        .par_chunks_mut(n)
        .zip(field.duals.as_slice().par_chunks(n))
        .zip(field.needles.par_iter())
        .enumerate()
        .for_each_init(
            || vec![0.0; n],
            |buf, (i, ((p, u), a))| {
                g.extract_into(y, i, p);
                dict.synthesize_into(a, buf);
                for ((pv, d), uv) in p.iter_mut().zip(buf.iter()).zip(u) {
                    *pv = data_scale * *pv + d - uv;
                }
            },
        );

    let mut aggregated = vec![0.0; g.pixel_count()];
    g.aggregate_into(&field.slices, &mut aggregated);
    if let Some(mask) = mask {
        for (v, m) in aggregated.iter_mut().zip(mask.data()) {
            *v *= m;
        }
    }

    field
        .slices
        .as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each_init(
            || vec![0.0; n],
            |buf, (i, s)| {
                g.extract_into(&aggregated, i, buf);
                for (sv, b) in s.iter_mut().zip(buf.iter()) {
                    *sv -= avg_scale * b;
                }
            },
        );
}

/// Exact minimizer over all slices of
/// `1/2 ||X - sum R_i^T s_i||^2 + rho/2 sum ||s_i - D a_i + u_i||^2`:
/// `s_i = p_i - R_i (sum_j R_j^T p_j) / (rho + n)`, `p_i = R_i X / rho + D a_i - u_i`.
pub fn slice_update(field: &mut SliceField, x: &Image, dict: &LocalDictionary, rho: f64) -> Result<()> {
    check_rho(rho)?;
    check_dictionary(&field.geometry, dict)?;
    x.check_same_shape(&Image::zeros(field.geometry.height(), field.geometry.width()))?;
    let n = field.geometry.patch_len() as f64;
    local_laplacian_update(field, x, None, dict, 1.0 / rho, 1.0 / (rho + n));
    Ok(())
}

/// Masked slice update for inpainting:
/// `s_i = p_i - R_i [A sum_j R_j^T p_j / (rho + n)]`, `p_i = R_i Y / rho + D a_i - u_i`.
///
/// `y` is multiplied by the mask before use. With an all-ones mask this runs
/// the same floating-point path as [`slice_update`].
pub fn masked_slice_update(
    field: &mut SliceField,
    y: &Image,
    mask: &Image,
    dict: &LocalDictionary,
    rho: f64,
) -> Result<()> {
    check_rho(rho)?;
    check_dictionary(&field.geometry, dict)?;
    let g = field.geometry;
    let shape = Image::zeros(g.height(), g.width());
    y.check_same_shape(&shape)?;
    mask.check_same_shape(&shape)?;
    if !mask.is_binary() {
        return Err(Error::NonBinaryMask);
    }
    let observed = apply_mask(y, mask);
    let n = g.patch_len() as f64;
    local_laplacian_update(field, &observed, Some(mask), dict, 1.0 / rho, 1.0 / (rho + n));
    Ok(())
}

/// Slice update for the texture layer of a cartoon/texture split, where the
/// data term sees `X - sum R_i^T s_i - X_C` and `X_C` has already been
/// eliminated. Solves `(rho I + k R R^T) S = k R E + rho Z` with `E = X - W`.
pub(crate) fn weighted_slice_update(
    field: &mut SliceField,
    effective: &Image,
    dict: &LocalDictionary,
    rho: f64,
    weight: f64,
) {
    let n = field.geometry.patch_len() as f64;
    local_laplacian_update(
        field,
        effective,
        None,
        dict,
        weight / rho,
        weight / (rho + weight * n),
    );
}

fn apply_mask(y: &Image, mask: &Image) -> Image {
    let mut out = y.clone();
    for (v, m) in out.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
    out
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig("rho must be > 0".into()))
    }
}

/// `u_i <- u_i + s_i - D a_i`.
pub fn dual_update(field: &mut SliceField, dict: &LocalDictionary) {
    let n = field.geometry.patch_len();
    field
        .duals
        .as_mut_slice()
        .par_chunks_mut(n)
        .zip(field.slices.as_slice().par_chunks(n))
        .zip(field.needles.par_iter())
        .for_each_init(
            || vec![0.0; n],
            |buf, ((u, s), a)| {
                dict.synthesize_into(a, buf);
                for ((uv, sv), d) in u.iter_mut().zip(s).zip(buf.iter()) {
                    *uv += sv - d;
                }
            },
        );
}

/// Runs the LASSO on `b_i = s_i + u_i` for each listed slice, warm-started.
pub fn pursuit_step(
    field: &mut SliceField,
    dict: &LocalDictionary,
    gram: &Gram,
    cfg: &PursuitConfig,
    indices: &[usize],
) -> Result<()> {
    let n = field.geometry.patch_len();
    let results: Vec<Needle> = indices
        .par_iter()
        .map_init(
            || vec![0.0; n],
            |b, &i| {
                for ((bv, s), u) in b.iter_mut().zip(field.slices.get(i)).zip(field.duals.get(i)) {
                    *bv = s + u;
                }
                lasso_solve(dict, gram, b, cfg, Some(&field.needles[i])).map(|r| r.needle)
            },
        )
        .collect::<Result<_>>()?;
    for (&i, a) in indices.iter().zip(results) {
        field.needles[i] = a;
    }
    Ok(())
}

/// Terms of the convolutional objective at the needle-feasible point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// `1/2 ||X - sum R_i^T D a_i||^2`
    pub data_term: f64,
    /// `lambda sum ||a_i||_1`
    pub l1_term: f64,
    pub objective: f64,
    /// `1/2 ||X - sum R_i^T s_i||^2`
    pub slice_data_term: f64,
    pub max_primal_residual: f64,
}

impl ObjectiveTerms {
    fn accumulate(&mut self, other: &ObjectiveTerms) {
        self.data_term += other.data_term;
        self.l1_term += other.l1_term;
        self.objective += other.objective;
        self.slice_data_term += other.slice_data_term;
        self.max_primal_residual = self.max_primal_residual.max(other.max_primal_residual);
    }

    fn zero() -> Self {
        Self {
            data_term: 0.0,
            l1_term: 0.0,
            objective: 0.0,
            slice_data_term: 0.0,
            max_primal_residual: 0.0,
        }
    }
}

pub fn csc_objective(x: &Image, field: &SliceField, dict: &LocalDictionary, lambda: f64) -> ObjectiveTerms {
    objective_terms(x, None, field, dict, lambda)
}

fn objective_terms(
    x: &Image,
    mask: Option<&Image>,
    field: &SliceField,
    dict: &LocalDictionary,
    lambda: f64,
) -> ObjectiveTerms {
    let half_sq = |recon: &Image| {
        let mut sum = 0.0;
        for (k, (a, b)) in x.data().iter().zip(recon.data()).enumerate() {
            let w = mask.map_or(1.0, |m| m.data()[k]);
            sum += w * (a - b) * (a - b);
        }
        0.5 * sum
    };
    let data_term = half_sq(&field.needle_reconstruction(dict));
    let slice_data_term = half_sq(&field.slice_reconstruction());
    let l1_term = lambda * field.needles.iter().map(Needle::l1_norm).sum::<f64>();
    ObjectiveTerms {
        data_term,
        l1_term,
        objective: data_term + l1_term,
        slice_data_term,
        max_primal_residual: field.max_primal_residual(dict),
    }
}

/// Augmented-Lagrangian needle terms `sum rho/2 ||s_i - D a_i + u_i||^2 + lambda ||a_i||_1`.
pub fn needle_lagrangian(field: &SliceField, dict: &LocalDictionary, lambda: f64, rho: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..field.len() {
        let r = dict.synthesize(&field.needles[i]);
        let sq: f64 = field
            .slices
            .get(i)
            .iter()
            .zip(field.duals.get(i))
            .zip(&r)
            .map(|((s, u), d)| (s - d + u).powi(2))
            .sum();
        total += 0.5 * rho * sq + lambda * field.needles[i].l1_norm();
    }
    total
}

/// One row of per-iteration training metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub iter: usize,
    pub data_term: f64,
    pub l1_term: f64,
    pub objective: f64,
    pub slice_data_term: f64,
    pub max_primal_residual: f64,
    pub time_ms: f64,
}

/// Receives one [`MetricsRow`] per ADMM iteration.
pub trait MetricsSink {
    fn record(&mut self, row: &MetricsRow);
}

impl MetricsSink for Vec<MetricsRow> {
    fn record(&mut self, row: &MetricsRow) {
        self.push(*row);
    }
}

/// Discards every row.
pub struct NullSink;

impl MetricsSink for NullSink {
    fn record(&mut self, _row: &MetricsRow) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Sparsity weight.
    pub lambda: f64,
    /// ADMM penalty, constant across iterations.
    pub rho: f64,
    pub iterations: usize,
    /// Fraction of slices pursued (and used in the dictionary update) per iteration.
    pub subsample: f64,
    /// Solver settings; the lasso weight is overridden with `lambda / rho`.
    pub pursuit: PursuitConfig,
    pub dict_sweeps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            rho: 1.0,
            iterations: 300,
            subsample: 1.0,
            pursuit: PursuitConfig::default(),
            dict_sweeps: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        check_rho(self.rho)?;
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidConfig("subsample fraction must be in (0, 1]".into()));
        }
        if self.dict_sweeps == 0 {
            return Err(Error::InvalidConfig("dictionary sweeps must be >= 1".into()));
        }
        self.pursuit_config().validate()
    }

    pub fn pursuit_config(&self) -> PursuitConfig {
        PursuitConfig {
            lambda: self.lambda / self.rho,
            ..self.pursuit.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub dictionary: LocalDictionary,
    pub fields: Vec<SliceField>,
    pub metrics: Vec<MetricsRow>,
}

struct Problem<'a> {
    data: &'a Image,
    mask: Option<&'a Image>,
    field: SliceField,
}

fn check_fits(x: &Image, f: usize) -> Result<()> {
    if x.height() < f || x.width() < f {
        return Err(Error::ImageSmallerThanFilter {
            height: x.height(),
            width: x.width(),
            filter: f,
        });
    }
    Ok(())
}

fn subsample_indices(rng: &mut ChaCha8Rng, count: usize, fraction: f64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..count).collect();
    }
    let k = ((fraction * count as f64).round() as usize).clamp(1, count);
    let mut idx = index::sample(rng, count, k).into_vec();
    idx.sort_unstable();
    idx
}

fn run_admm(
    problems: &mut [Problem<'_>],
    dict: &mut LocalDictionary,
    cfg: &TrainConfig,
    learn_dictionary: bool,
    sink: &mut dyn MetricsSink,
) -> Result<()> {
    let pursuit = cfg.pursuit_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = dict.patch_len();

    for iter in 1..=cfg.iterations {
        let start = Instant::now();
        let g = gram(dict);

        let mut chosen = Vec::with_capacity(problems.len());
        for p in problems.iter_mut() {
            let idx = subsample_indices(&mut rng, p.field.len(), cfg.subsample);
            pursuit_step(&mut p.field, dict, &g, &pursuit, &idx)?;
            match p.mask {
                Some(mask) => masked_slice_update(&mut p.field, p.data, mask, dict, cfg.rho)?,
                None => slice_update(&mut p.field, p.data, dict, cfg.rho)?,
            }
            dual_update(&mut p.field, dict);
            chosen.push(idx);
        }
        let mut elapsed = start.elapsed();

        // metrics at the dual step, where s_i - D a_i is the ADMM primal residual
        let mut terms = ObjectiveTerms::zero();
        for p in problems.iter() {
            terms.accumulate(&objective_terms(p.data, p.mask, &p.field, dict, cfg.lambda));
        }

        // with no active needle there is nothing to fit, and the dead-atom
        // rule would overwrite every atom with a raw target
        let any_active = problems
            .iter()
            .zip(&chosen)
            .any(|(p, idx)| idx.iter().any(|&i| !p.field.needles[i].is_zero()));
        if learn_dictionary && any_active {
            let start = Instant::now();
            let total: usize = chosen.iter().map(Vec::len).sum();
            let mut targets = Patches::zeros(total, n);
            let mut needles = Vec::with_capacity(total);
            let mut k = 0;
            for (p, idx) in problems.iter().zip(&chosen) {
                for &i in idx {
                    let t = targets.get_mut(k);
                    for ((tv, s), u) in t.iter_mut().zip(p.field.slices.get(i)).zip(p.field.duals.get(i)) {
                        *tv = s + u;
                    }
                    needles.push(p.field.needles[i].clone());
                    k += 1;
                }
            }
            dictionary_update(dict, &targets, &mut needles, cfg.dict_sweeps)?;
            let mut updated = needles.into_iter();
            for (p, idx) in problems.iter_mut().zip(&chosen) {
                for &i in idx {
                    p.field.needles[i] = updated.next().expect("needle count");
                }
            }
            elapsed += start.elapsed();
        }
        let time_ms = elapsed.as_secs_f64() * 1e3;
        sink.record(&MetricsRow {
            iter,
            data_term: terms.data_term,
            l1_term: terms.l1_term,
            objective: terms.objective,
            slice_data_term: terms.slice_data_term,
            max_primal_residual: terms.max_primal_residual,
            time_ms,
        });
    }
    Ok(())
}

/// Learns a local dictionary from `images`, starting at `d0`.
pub fn train(images: &[Image], cfg: &TrainConfig, d0: &LocalDictionary) -> Result<TrainOutput> {
    let mut metrics = Vec::new();
    let (dictionary, fields) = train_with_sink(images, cfg, d0, &mut metrics)?;
    Ok(TrainOutput {
        dictionary,
        fields,
        metrics,
    })
}

pub fn train_with_sink(
    images: &[Image],
    cfg: &TrainConfig,
    d0: &LocalDictionary,
    sink: &mut dyn MetricsSink,
) -> Result<(LocalDictionary, Vec<SliceField>)> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::NoTargets);
    }
    let f = filter_side(d0)?;
    let mut problems = Vec::with_capacity(images.len());
    for x in images {
        check_fits(x, f)?;
        let g = PatchGeometry::for_image(x, f)?;
        problems.push(Problem {
            data: x,
            mask: None,
            field: SliceField::init(x, g)?,
        });
    }
    let mut dict = d0.clone();
    run_admm(&mut problems, &mut dict, cfg, true, sink)?;
    Ok((dict, problems.into_iter().map(|p| p.field).collect()))
}

#[derive(Debug, Clone)]
pub struct InpaintOutput {
    pub image: Image,
    pub dictionary: LocalDictionary,
    pub field: SliceField,
    pub metrics: Vec<MetricsRow>,
}

/// Restores the unobserved pixels of `y` (`mask == 0`) and returns
/// `sum R_i^T D a_i`.
pub fn inpaint(
    y: &Image,
    mask: &Image,
    dict: &LocalDictionary,
    cfg: &TrainConfig,
    learn_on_corrupted: bool,
) -> Result<Image> {
    inpaint_detailed(y, mask, dict, cfg, learn_on_corrupted).map(|o| o.image)
}

pub fn inpaint_detailed(
    y: &Image,
    mask: &Image,
    dict: &LocalDictionary,
    cfg: &TrainConfig,
    learn_on_corrupted: bool,
) -> Result<InpaintOutput> {
    cfg.validate()?;
    y.check_same_shape(mask)?;
    if !mask.is_binary() {
        return Err(Error::NonBinaryMask);
    }
    let f = filter_side(dict)?;
    check_fits(y, f)?;
    let observed = apply_mask(y, mask);
    let g = PatchGeometry::for_image(y, f)?;
    let mut problems = [Problem {
        data: &observed,
        mask: Some(mask),
        field: SliceField::init(&observed, g)?,
    }];
    let mut d = dict.clone();
    let mut metrics = Vec::new();
    run_admm(&mut problems, &mut d, cfg, learn_on_corrupted, &mut metrics)?;
    let [problem] = problems;
    Ok(InpaintOutput {
        image: problem.field.needle_reconstruction(&d),
        dictionary: d,
        field: problem.field,
        metrics,
    })
}
