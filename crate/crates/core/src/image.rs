//! Global/local operators on grayscale images.
//!
//! The slice grid of an `H x W` image with `f x f` filters is the
//! `(H+f-1) x (W+f-1)` grid of patches that fit inside the image padded by
//! `f-1` zeros on every side. Slice `i = r * (W+f-1) + c` has its top-left
//! corner at padded coordinate `(r, c)`, which is original pixel
//! `(r-f+1, c-f+1)`. Each original pixel is covered by exactly `f*f`
//! patches, so `sum_i M R_i^T R_i M^T = n I`.

use crate::error::{Error, Result};

/// A single real-valued grayscale plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyImage { height, width });
        }
        if data.len() != height * width {
            return Err(Error::SampleCount {
                expected: height * width,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image must be non-empty");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image must be non-empty");
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixel count `N = H * W`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_h: self.height,
                left_w: self.width,
                right_h: other.height,
                right_w: other.width,
            })
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let var = self.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / self.data.len() as f64;
        var.sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Elementwise `self - other`. Panics on shape mismatch.
    pub fn sub(&self, other: &Image) -> Image {
        assert!(self.same_shape(other));
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Elementwise `self + other`. Panics on shape mismatch.
    pub fn add(&self, other: &Image) -> Image {
        assert!(self.same_shape(other));
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Elementwise product, e.g. applying a mask. Panics on shape mismatch.
    pub fn mul(&self, other: &Image) -> Image {
        assert!(self.same_shape(other));
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Image {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Patch geometry of an `H x W` image with `f x f` filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    height: usize,
    width: usize,
    filter: usize,
}

impl PatchGeometry {
    pub fn new(height: usize, width: usize, filter: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyImage { height, width });
        }
        if filter == 0 {
            return Err(Error::InvalidConfig("filter side must be at least 1".into()));
        }
        Ok(Self {
            height,
            width,
            filter,
        })
    }

    pub fn for_image(image: &Image, filter: usize) -> Result<Self> {
        Self::new(image.height, image.width, filter)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn filter(&self) -> usize {
        self.filter
    }

    /// Pixels per patch, `n = f^2`.
    pub fn patch_len(&self) -> usize {
        self.filter * self.filter
    }

    pub fn grid_height(&self) -> usize {
        self.height + self.filter - 1
    }

    pub fn grid_width(&self) -> usize {
        self.width + self.filter - 1
    }

    /// Number of slices `N_s = (H+f-1)(W+f-1)`.
    pub fn slice_count(&self) -> usize {
        self.grid_height() * self.grid_width()
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    fn check_image(&self, x: &Image) -> Result<()> {
        if x.height != self.height || x.width != self.width {
            return Err(Error::DimensionMismatch {
                left_h: x.height,
                left_w: x.width,
                right_h: self.height,
                right_w: self.width,
            });
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.slice_count() {
            Err(Error::SliceIndex {
                index: i,
                count: self.slice_count(),
            })
        } else {
            Ok(())
        }
    }

    /// Top-left corner of slice `i` in original-image coordinates (may be negative).
    #[inline]
    fn origin(&self, i: usize) -> (isize, isize) {
        let gw = self.grid_width();
        let r = (i / gw) as isize;
        let c = (i % gw) as isize;
        let pad = self.filter as isize - 1;
        (r - pad, c - pad)
    }

    /// Column range `[dx0, dx1)` of the patch that lands inside the image.
    #[inline]
    fn clip_cols(&self, x0: isize) -> (usize, usize) {
        let f = self.filter as isize;
        let dx0 = (-x0).max(0);
        let dx1 = (self.width as isize - x0).min(f);
        (dx0 as usize, dx1.max(dx0) as usize)
    }

    /// Writes `R_i M^T x` into `out` without bounds checks on `i`.
    #[inline]
    pub(crate) fn extract_into(&self, x: &[f64], i: usize, out: &mut [f64]) {
        let f = self.filter;
        let (y0, x0) = self.origin(i);
        let (dx0, dx1) = self.clip_cols(x0);
        for dy in 0..f {
            let row = &mut out[dy * f..(dy + 1) * f];
            let y = y0 + dy as isize;
            if y < 0 || y >= self.height as isize || dx0 >= dx1 {
                row.fill(0.0);
                continue;
            }
            row[..dx0].fill(0.0);
            row[dx1..].fill(0.0);
            let base = y as usize * self.width;
            let start = (x0 + dx0 as isize) as usize;
            row[dx0..dx1].copy_from_slice(&x[base + start..base + start + (dx1 - dx0)]);
        }
    }

    /// Adds `M R_i^T p` into `acc` scaled by `scale`.
    #[inline]
    pub(crate) fn place_into(&self, acc: &mut [f64], i: usize, p: &[f64], scale: f64) {
        let f = self.filter;
        let (y0, x0) = self.origin(i);
        let (dx0, dx1) = self.clip_cols(x0);
        if dx0 >= dx1 {
            return;
        }
        for dy in 0..f {
            let y = y0 + dy as isize;
            if y < 0 || y >= self.height as isize {
                continue;
            }
            let base = y as usize * self.width;
            let start = (x0 + dx0 as isize) as usize;
            let dst = &mut acc[base + start..base + start + (dx1 - dx0)];
            let src = &p[dy * f + dx0..dy * f + dx1];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    /// Patch of the zero-padded image at slice position `i`.
    pub fn extract_patch(&self, x: &Image, i: usize) -> Result<Vec<f64>> {
        self.check_image(x)?;
        self.check_index(i)?;
        let mut out = vec![0.0; self.patch_len()];
        self.extract_into(&x.data, i, &mut out);
        Ok(out)
    }

    /// Adds `p` into `acc` at slice position `i`, dropping whatever falls
    /// outside the image. Adjoint of [`extract_patch`](Self::extract_patch).
    pub fn place_patch_accumulate(&self, acc: &mut Image, i: usize, p: &[f64]) -> Result<()> {
        self.check_image(acc)?;
        self.check_index(i)?;
        if p.len() != self.patch_len() {
            return Err(Error::PatchLength {
                expected: self.patch_len(),
                got: p.len(),
            });
        }
        self.place_into(&mut acc.data, i, p, 1.0);
        Ok(())
    }

    /// `sum_j M R_j^T p_j` over every slice.
    pub fn aggregate(&self, slices: &Patches) -> Result<Image> {
        if slices.patch_len() != self.patch_len() {
            return Err(Error::PatchLength {
                expected: self.patch_len(),
                got: slices.patch_len(),
            });
        }
        if slices.count() != self.slice_count() {
            return Err(Error::SliceCount {
                expected: self.slice_count(),
                got: slices.count(),
            });
        }
        let mut acc = Image::zeros(self.height, self.width);
        self.aggregate_into(slices, &mut acc.data);
        Ok(acc)
    }

    pub(crate) fn aggregate_into(&self, slices: &Patches, acc: &mut [f64]) {
        for (i, p) in slices.iter().enumerate() {
            self.place_into(acc, i, p, 1.0);
        }
    }

    /// All patches `R_i M^T x`, scaled by `scale`.
    pub fn extract_all(&self, x: &Image, scale: f64) -> Result<Patches> {
        self.check_image(x)?;
        let mut out = Patches::zeros(self.slice_count(), self.patch_len());
        for (i, p) in out.iter_mut().enumerate() {
            self.extract_into(&x.data, i, p);
            if scale != 1.0 {
                p.iter_mut().for_each(|v| *v *= scale);
            }
        }
        Ok(out)
    }
}

/// A flat collection of equal-length patches (one per slice).
#[derive(Debug, Clone, PartialEq)]
pub struct Patches {
    patch_len: usize,
    data: Vec<f64>,
}

impl Patches {
    pub fn zeros(count: usize, patch_len: usize) -> Self {
        Self {
            patch_len,
            data: vec![0.0; count * patch_len],
        }
    }

    pub fn from_vec(patch_len: usize, data: Vec<f64>) -> Result<Self> {
        if patch_len == 0 || data.len() % patch_len != 0 {
            return Err(Error::PatchLength {
                expected: patch_len,
                got: data.len(),
            });
        }
        Ok(Self { patch_len, data })
    }

    pub fn from_patches(patch_len: usize, patches: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(patch_len * patches.len());
        for p in patches {
            if p.len() != patch_len {
                return Err(Error::PatchLength {
                    expected: patch_len,
                    got: p.len(),
                });
            }
            data.extend_from_slice(p);
        }
        Ok(Self { patch_len, data })
    }

    pub fn patch_len(&self) -> usize {
        self.patch_len
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.patch_len
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.patch_len..(i + 1) * self.patch_len]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.patch_len..(i + 1) * self.patch_len]
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.patch_len)
    }

    pub fn iter_mut(&mut self) -> std::slice::ChunksMut<'_, f64> {
        self.data.chunks_mut(self.patch_len)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.patch_len);
        self.data.extend_from_slice(p);
    }
}

/// Outcome of [`preprocess`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreprocessStatus {
    Normalized,
    /// The input was constant: only the mean was removed.
    ConstantInput,
}

/// Mean subtraction followed by division by the population standard deviation.
pub fn preprocess(x: &Image) -> (Image, PreprocessStatus) {
    let mean = x.mean();
    let centered = x.map(|v| v - mean);
    let std = centered.std();
    if std <= f64::EPSILON * (1.0 + mean.abs()) {
        return (Image::zeros(x.height, x.width), PreprocessStatus::ConstantInput);
    }
    (centered.scale(1.0 / std), PreprocessStatus::Normalized)
}

/// `20 log10(sqrt(N) / ||x - x_hat||_2)`; `+inf` for identical images.
pub fn psnr(x: &Image, x_hat: &Image) -> Result<f64> {
    x.check_same_shape(x_hat)?;
    let err = x.sub(x_hat).norm();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * ((x.len() as f64).sqrt() / err).log10())
}
