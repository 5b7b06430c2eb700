//! Full-reference similarity: PSNR and block SSIM.

use crate::error::Result;
use crate::image::Image;

/// PSNR reported for identical images (and the ceiling for near-identical
/// ones), so stealthiness scores stay finite.
pub const PSNR_CAP: f64 = 99.0;

pub const SSIM_WINDOW: usize = 8;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b, "mse")?;
    let n = a.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n as f64)
}

/// `10 log10(1 / MSE)` for `[0, 1]` data, capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

/// Mean SSIM over non-overlapping 8x8 windows. Windows at the right and
/// bottom edges are truncated to whatever pixels remain. Statistics use
/// population (1/N) moments. Multi-channel images average their channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b, "ssim")?;
    let channels = a.channels();
    let total: f64 = (0..channels).map(|c| ssim_channel(a, b, c)).sum();
    Ok(total / channels as f64)
}

fn ssim_channel(a: &Image, b: &Image, c: usize) -> f64 {
    let (w, h) = a.dims();
    let ch = a.channels();
    let (da, db) = (a.data(), b.data());
    let mut total = 0.0;
    let mut windows = 0usize;
    for y0 in (0..h).step_by(SSIM_WINDOW) {
        let y1 = (y0 + SSIM_WINDOW).min(h);
        for x0 in (0..w).step_by(SSIM_WINDOW) {
            let x1 = (x0 + SSIM_WINDOW).min(w);
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            let (mut sa, mut sb) = (0.0, 0.0);
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = (y * w + x) * ch + c;
                    sa += da[i];
                    sb += db[i];
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = (y * w + x) * ch + c;
                    let (ea, eb) = (da[i] - ma, db[i] - mb);
                    va += ea * ea;
                    vb += eb * eb;
                    cov += ea * eb;
                }
            }
            let (va, vb, cov) = (va / n, vb / n, cov / n);
            total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2))
                / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            windows += 1;
        }
    }
    if windows == 0 {
        1.0
    } else {
        total / windows as f64
    }
}
