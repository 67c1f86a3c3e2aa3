//! Netpbm graymap/pixmap reading (P2, P3, P5, P6) and writing (P5, P6).
//!
//! Samples are held as `f64` in `[0, 1]`, interleaved RGB for color.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use slicedict::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// 1 for graymaps, 3 for pixmaps.
    pub channels: usize,
    pub samples: Vec<f64>,
}

impl Raster {
    pub fn gray(img: &Image) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            channels: 1,
            samples: img.data().to_vec(),
        }
    }

    pub fn is_color(&self) -> bool {
        self.channels == 3
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let k = (y * self.width + x) * self.channels;
        &self.samples[k..k + self.channels]
    }

    /// BT.601 luma for color, the plane itself for gray.
    pub fn luma(&self) -> Image {
        let data = if self.is_color() {
            self.samples
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
                .collect()
        } else {
            self.samples.clone()
        };
        Image::new(self.height, self.width, data).expect("raster dimensions are valid")
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        ensure!(self.pos > start, "expected a number at byte {start}");
        let text = std::str::from_utf8(&self.bytes[start..self.pos])?;
        Ok(text.parse()?)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Raster> {
    ensure!(bytes.len() >= 2 && bytes[0] == b'P', "not a netpbm file");
    let (channels, ascii) = match bytes[1] {
        b'2' => (1, true),
        b'3' => (3, true),
        b'5' => (1, false),
        b'6' => (3, false),
        other => bail!("unsupported netpbm variant P{}", other as char),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    ensure!(width > 0 && height > 0, "empty image");
    ensure!((1..=65535).contains(&maxval), "maxval {maxval} out of range");
    let count = width * height * channels;
    let scale = 1.0 / maxval as f64;

    let raw: Vec<usize> = if ascii {
        (0..count).map(|_| h.number()).collect::<Result<_>>()?
    } else {
        // exactly one whitespace byte separates the header from the raster
        let start = h.pos + 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        ensure!(bytes.len() >= start + need, "truncated raster");
        let body = &bytes[start..start + need];
        if wide {
            body.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]]) as usize).collect()
        } else {
            body.iter().map(|&b| b as usize).collect()
        }
    };
    ensure!(raw.iter().all(|&v| v <= maxval), "sample exceeds maxval");
    Ok(Raster {
        width,
        height,
        channels,
        samples: raw.into_iter().map(|v| v as f64 * scale).collect(),
    })
}

pub fn read(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary P5/P6 with maxval 255; samples are clamped to `[0, 1]`.
pub fn encode(r: &Raster) -> Vec<u8> {
    let magic = if r.is_color() { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", r.width, r.height).into_bytes();
    out.extend(r.samples.iter().map(|&v| quantize(v)));
    out
}

pub fn write(path: &Path, r: &Raster) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(&encode(r))?;
    Ok(())
}

pub fn write_gray(path: &Path, img: &Image) -> Result<()> {
    write(path, &Raster::gray(img))
}
