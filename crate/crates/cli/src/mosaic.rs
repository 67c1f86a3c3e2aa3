//! Dictionary atoms tiled on a grid for viewing.

use slicedict::{Image, LocalDictionary};

/// Tiles atoms row by row on a near-square grid with a one-pixel gap; each
/// atom is min-max stretched to `[0, 1]` and the gaps are mid-gray.
pub fn mosaic(dict: &LocalDictionary, f: usize) -> Image {
    let m = dict.atom_count();
    let cols = (m as f64).sqrt().ceil() as usize;
    let rows = m.div_ceil(cols);
    let h = rows * (f + 1) + 1;
    let w = cols * (f + 1) + 1;
    let mut img = Image::filled(h, w, 0.5);
    for j in 0..m {
        let atom = dict.atom(j);
        let lo = atom.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = atom.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let (y0, x0) = ((j / cols) * (f + 1) + 1, (j % cols) * (f + 1) + 1);
        for dy in 0..f {
            for dx in 0..f {
                let v = atom[dy * f + dx];
                let t = if span > 0.0 { (v - lo) / span } else { 0.5 };
                img.set(y0 + dy, x0 + dx, t);
            }
        }
    }
    img
}
