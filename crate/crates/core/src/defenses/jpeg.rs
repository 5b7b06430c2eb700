//! JPEG-style lossy compression: blockwise DCT quantization without entropy
//! coding or chroma subsampling. Every channel is treated like luminance.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::image::Image;

const BLOCK: usize = 8;

#[rustfmt::skip]
const LUMINANCE_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Quantization table for `quality` in `1..=100`, scaled as in the IJG
/// reference encoder.
pub fn quantization_table(quality: u8) -> [f64; 64] {
    let q = quality.clamp(1, 100) as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0.0; 64];
    for (o, &t) in out.iter_mut().zip(LUMINANCE_TABLE.iter()) {
        *o = ((t as u32 * scale + 50) / 100).clamp(1, 255) as f64;
    }
    out
}

/// Orthonormal 8-point DCT-II basis, `basis[u][x]`.
fn basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static BASIS: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; BLOCK]; BLOCK];
        for (u, row) in b.iter_mut().enumerate() {
            let c = if u == 0 { (1.0 / BLOCK as f64).sqrt() } else { (2.0 / BLOCK as f64).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * (((2 * x + 1) as f64 * u as f64 * PI) / (2 * BLOCK) as f64).cos();
            }
        }
        b
    })
}

fn dct2(block: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for y in 0..BLOCK {
        for u in 0..BLOCK {
            tmp[y * BLOCK + u] = (0..BLOCK).map(|x| b[u][x] * block[y * BLOCK + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            out[v * BLOCK + u] = (0..BLOCK).map(|y| b[v][y] * tmp[y * BLOCK + u]).sum();
        }
    }
    out
}

fn idct2(coef: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for v in 0..BLOCK {
        for x in 0..BLOCK {
            tmp[v * BLOCK + x] = (0..BLOCK).map(|u| b[u][x] * coef[v * BLOCK + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            out[y * BLOCK + x] = (0..BLOCK).map(|v| b[v][y] * tmp[v * BLOCK + x]).sum();
        }
    }
    out
}

/// Compresses each channel in 8x8 blocks at `quality`. Samples are handled on
/// the 0-255 scale with a 128 level shift; partial edge blocks are padded by
/// replicating the last row and column.
pub fn jpeg_compress(image: &Image, quality: u8) -> Result<Image> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Config(format!("JPEG quality {quality} outside 1..=100")));
    }
    let table = quantization_table(quality);
    let (w, h) = image.dims();
    let ch = image.channels();
    let src = image.data();
    let mut out = vec![0.0; src.len()];
    for c in 0..ch {
        for by in (0..h).step_by(BLOCK) {
            for bx in (0..w).step_by(BLOCK) {
                let mut block = [0.0; 64];
                for y in 0..BLOCK {
                    let sy = (by + y).min(h - 1);
                    for x in 0..BLOCK {
                        let sx = (bx + x).min(w - 1);
                        block[y * BLOCK + x] = src[(sy * w + sx) * ch + c] * 255.0 - 128.0;
                    }
                }
                let mut coef = dct2(&block);
                for (k, q) in coef.iter_mut().zip(&table) {
                    *k = (*k / q).round() * q;
                }
                let rec = idct2(&coef);
                for y in 0..BLOCK.min(h - by) {
                    for x in 0..BLOCK.min(w - bx) {
                        let v = (rec[y * BLOCK + x] + 128.0) / 255.0;
                        out[((by + y) * w + bx + x) * ch + c] = v.clamp(0.0, 1.0);
                    }
                }
            }
        }
    }
    Image::new(w, h, ch, out)
}
