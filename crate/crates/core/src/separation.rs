//! Cartoon/texture separation with a convolutional texture model and a TV
//! cartoon prior, plus texture-boost enhancement.
//!
//! The ADMM splits the cartoon `X_C = Z_C` and the texture slices
//! `s_i = D a_i`. The quadratic block over `(s_i, X_C)` is solved exactly:
//! eliminating `X_C` gives `X_C = (X - sum R_i^T s_i + eta W) / (1 + eta)`
//! with `W = Z_C - V_C`, and leaves a single-layer slice problem with data
//! `X - W` and data weight `k = eta / (1 + eta)`, whose solution is
//! `s_i = p_i - k/(rho + k n) R_i sum_j R_j^T p_j`, `p_i = (k/rho) R_i (X - W) + D a_i - u_i`.

use crate::dictionary::{dictionary_update, init_dictionary, LocalDictionary};
use crate::engine::{dual_update, filter_side, pursuit_step, weighted_slice_update, SliceField};
use crate::error::{Error, Result};
use crate::image::{Image, PatchGeometry};
use crate::pursuit::{gram, PursuitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TvVariant {
    #[default]
    Isotropic,
    Anisotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvOptions {
    pub variant: TvVariant,
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the largest dual-variable change falls below this.
    pub tolerance: f64,
}

impl Default for TvOptions {
    fn default() -> Self {
        Self {
            variant: TvVariant::Isotropic,
            step: 0.25,
            max_iters: 500,
            tolerance: 1e-6,
        }
    }
}

// forward differences, zero across the last row/column
fn gradient(v: &[f64], h: usize, w: usize, gx: &mut [f64], gy: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            gx[k] = if x + 1 < w { v[k + 1] - v[k] } else { 0.0 };
            gy[k] = if y + 1 < h { v[k + w] - v[k] } else { 0.0 };
        }
    }
}

// negative adjoint of `gradient`
fn divergence(px: &[f64], py: &[f64], h: usize, w: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            let dx = if w == 1 {
                0.0
            } else if x == 0 {
                px[k]
            } else if x + 1 == w {
                -px[k - 1]
            } else {
                px[k] - px[k - 1]
            };
            let dy = if h == 1 {
                0.0
            } else if y == 0 {
                py[k]
            } else if y + 1 == h {
                -py[k - w]
            } else {
                py[k] - py[k - w]
            };
            out[k] = dx + dy;
        }
    }
}

/// Discrete total variation with the same differences as [`tv_denoise`].
pub fn total_variation(v: &Image, variant: TvVariant) -> f64 {
    let (h, w) = (v.height(), v.width());
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    gradient(v.data(), h, w, &mut gx, &mut gy);
    gx.iter()
        .zip(&gy)
        .map(|(a, b)| match variant {
            TvVariant::Isotropic => (a * a + b * b).sqrt(),
            TvVariant::Anisotropic => a.abs() + b.abs(),
        })
        .sum()
}

/// `argmin_v 1/2 ||v - z||^2 + weight * TV(v)`, isotropic, default options.
pub fn tv_denoise(z: &Image, weight: f64, tol: f64) -> Image {
    tv_denoise_with(
        z,
        weight,
        &TvOptions {
            tolerance: tol,
            ..TvOptions::default()
        },
    )
}

/// Dual projection solver: iterates on the dual field `p` with
/// `v = z - weight * div p`.
pub fn tv_denoise_with(z: &Image, weight: f64, opts: &TvOptions) -> Image {
    if weight <= 0.0 {
        return z.clone();
    }
    let (h, w) = (z.height(), z.width());
    let len = h * w;
    let zs: Vec<f64> = z.data().iter().map(|v| v / weight).collect();
    let mut px = vec![0.0; len];
    let mut py = vec![0.0; len];
    let mut div = vec![0.0; len];
    let mut term = vec![0.0; len];
    let mut gx = vec![0.0; len];
    let mut gy = vec![0.0; len];
    let tau = opts.step;

    for _ in 0..opts.max_iters {
        divergence(&px, &py, h, w, &mut div);
        for ((t, d), zv) in term.iter_mut().zip(&div).zip(&zs) {
            *t = d - zv;
        }
        gradient(&term, h, w, &mut gx, &mut gy);
        let mut change: f64 = 0.0;
        for k in 0..len {
            let (nx, ny) = match opts.variant {
                TvVariant::Isotropic => {
                    let mag = (gx[k] * gx[k] + gy[k] * gy[k]).sqrt();
                    let denom = 1.0 + tau * mag;
                    ((px[k] + tau * gx[k]) / denom, (py[k] + tau * gy[k]) / denom)
                }
                TvVariant::Anisotropic => (
                    (px[k] + tau * gx[k]).clamp(-1.0, 1.0),
                    (py[k] + tau * gy[k]).clamp(-1.0, 1.0),
                ),
            };
            change = change.max((nx - px[k]).abs()).max((ny - py[k]).abs());
            px[k] = nx;
            py[k] = ny;
        }
        if change < opts.tolerance {
            break;
        }
    }

    divergence(&px, &py, h, w, &mut div);
    let data = z
        .data()
        .iter()
        .zip(&div)
        .map(|(zv, d)| zv - weight * d)
        .collect();
    Image::new(h, w, data).expect("finite TV output")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    /// Texture sparsity weight.
    pub lambda: f64,
    /// Texture slice penalty.
    pub rho: f64,
    /// Cartoon split penalty.
    pub eta: f64,
    /// TV weight.
    pub xi: f64,
    pub iterations: usize,
    /// Solver settings; the lasso weight is overridden with `lambda / rho`.
    pub pursuit: PursuitConfig,
    pub dict_sweeps: usize,
    /// Update the texture dictionary every iteration.
    pub learn_dictionary: bool,
    pub tv: TvOptions,
    /// Filter side and atom count used when [`enhance`] builds its own dictionary.
    pub filter: usize,
    pub atoms: usize,
    pub seed: u64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            rho: 1.0,
            eta: 1.0,
            xi: 0.1,
            iterations: 100,
            pursuit: PursuitConfig::default(),
            dict_sweeps: 1,
            learn_dictionary: true,
            tv: TvOptions::default(),
            filter: 8,
            atoms: 32,
            seed: 0,
        }
    }
}

impl SeparationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.eta > 0.0) {
            return Err(Error::InvalidConfig("rho and eta must be > 0".into()));
        }
        if !(self.lambda >= 0.0 && self.xi >= 0.0) {
            return Err(Error::InvalidConfig("lambda and xi must be >= 0".into()));
        }
        if self.dict_sweeps == 0 {
            return Err(Error::InvalidConfig("dictionary sweeps must be >= 1".into()));
        }
        self.pursuit_config().validate()
    }

    fn pursuit_config(&self) -> PursuitConfig {
        PursuitConfig {
            lambda: self.lambda / self.rho,
            ..self.pursuit.clone()
        }
    }
}

/// Texture slices/needles/duals plus cartoon, its split and its dual.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationState {
    pub texture: SliceField,
    pub cartoon: Image,
    pub split: Image,
    pub cartoon_dual: Image,
}

impl SeparationState {
    /// Starts from the TV-only (ROF) decomposition: the cartoon is
    /// `tv_denoise(x, xi)` and the texture slices split the remainder evenly.
    pub fn init(x: &Image, geometry: PatchGeometry, cfg: &SeparationConfig) -> Result<Self> {
        let cartoon = tv_denoise_with(x, cfg.xi, &cfg.tv);
        let texture = SliceField::init(&x.sub(&cartoon), geometry)?;
        Ok(Self {
            texture,
            split: cartoon.clone(),
            cartoon,
            cartoon_dual: Image::zeros(x.height(), x.width()),
        })
    }
}

/// Exact joint minimizer over the texture slices and the cartoon of
/// `1/2 ||X - sum R_i^T s_i - X_C||^2 + rho/2 sum ||s_i - D a_i + u_i||^2
///  + eta/2 ||X_C - Z_C + V_C||^2`.
pub fn joint_texture_cartoon_update(
    state: &mut SeparationState,
    x: &Image,
    dict: &LocalDictionary,
    cfg: &SeparationConfig,
) -> Result<()> {
    cfg.validate()?;
    x.check_same_shape(&state.cartoon)?;
    if dict.patch_len() != state.texture.geometry().patch_len() {
        return Err(Error::DictionaryShape {
            dict: dict.patch_len(),
            geometry: state.texture.geometry().patch_len(),
        });
    }
    let eta = cfg.eta;
    let target = state.split.sub(&state.cartoon_dual);
    let effective = x.sub(&target);
    weighted_slice_update(&mut state.texture, &effective, dict, cfg.rho, eta / (1.0 + eta));

    let slices = state.texture.slice_reconstruction();
    let data: Vec<f64> = x
        .data()
        .iter()
        .zip(slices.data())
        .zip(target.data())
        .map(|((xv, s), t)| (xv - s + eta * t) / (1.0 + eta))
        .collect();
    state.cartoon = Image::new(x.height(), x.width(), data)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SeparationOutput {
    pub cartoon: Image,
    /// `sum_i R_i^T D a_i`
    pub texture: Image,
    pub dictionary: LocalDictionary,
    pub state: SeparationState,
}

/// Splits `x` into a TV-regular cartoon and a convolutional-sparse texture,
/// learning the texture dictionary from `d0`.
pub fn separate(x: &Image, d0: &LocalDictionary, cfg: &SeparationConfig) -> Result<SeparationOutput> {
    cfg.validate()?;
    let f = filter_side(d0)?;
    if x.height() < f || x.width() < f {
        return Err(Error::ImageSmallerThanFilter {
            height: x.height(),
            width: x.width(),
            filter: f,
        });
    }
    let g = PatchGeometry::for_image(x, f)?;
    let mut state = SeparationState::init(x, g, cfg)?;
    let mut dict = d0.clone();
    let pursuit = cfg.pursuit_config();
    let all: Vec<usize> = (0..g.slice_count()).collect();

    for _ in 0..cfg.iterations {
        let gr = gram(&dict);
        pursuit_step(&mut state.texture, &dict, &gr, &pursuit, &all)?;
        joint_texture_cartoon_update(&mut state, x, &dict, cfg)?;

        let noisy = state.cartoon.add(&state.cartoon_dual);
        state.split = tv_denoise_with(&noisy, cfg.xi / cfg.eta, &cfg.tv);

        dual_update(&mut state.texture, &dict);
        state.cartoon_dual = state.cartoon_dual.add(&state.cartoon).sub(&state.split);

        // same guard as in training: no active needle, nothing to fit
        if cfg.learn_dictionary && state.texture.needles.iter().any(|n| !n.is_zero()) {
            let mut targets = state.texture.slices.clone();
            for (t, u) in targets.as_mut_slice().iter_mut().zip(state.texture.duals.as_slice()) {
                *t += u;
            }
            dictionary_update(&mut dict, &targets, &mut state.texture.needles, cfg.dict_sweeps)?;
        }
    }

    Ok(SeparationOutput {
        cartoon: state.cartoon.clone(),
        texture: state.texture.needle_reconstruction(&dict),
        dictionary: dict,
        state,
    })
}

/// `x + (factor - 1) * texture`.
pub fn boost_texture(x: &Image, texture: &Image, factor: f64) -> Result<Image> {
    x.check_same_shape(texture)?;
    if !(factor >= 0.0) {
        return Err(Error::InvalidConfig("enhancement factor must be >= 0".into()));
    }
    if factor == 1.0 {
        return Ok(x.clone());
    }
    Ok(x.add(&texture.scale(factor - 1.0)))
}

/// Separates `x` with a seeded texture dictionary and amplifies the texture.
pub fn enhance(x: &Image, cfg: &SeparationConfig, factor: f64) -> Result<Image> {
    if !(factor >= 0.0) {
        return Err(Error::InvalidConfig("enhancement factor must be >= 0".into()));
    }
    let d0 = init_dictionary(cfg.filter * cfg.filter, cfg.atoms, cfg.seed);
    let out = separate(x, &d0, cfg)?;
    boost_texture(x, &out.texture, factor)
}
