//! Image-fusion quality measures and the fusion training losses used as the
//! attack objective on fusion models.
//!
//! All functions take the visible source in any channel count (it is reduced
//! to luma) and single-channel infrared and fused images.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::image::Image;

use super::quality::ssim;

fn prepare(vis: &Image, inf: &Image, fused: &Image) -> Result<(Image, Image, Image)> {
    let vis = vis.to_grayscale();
    let inf = inf.to_grayscale();
    let fused = fused.to_grayscale();
    vis.ensure_same_dims(&inf, "fusion sources")?;
    vis.ensure_same_dims(&fused, "fused output")?;
    Ok((vis, inf, fused))
}

/// Sobel responses `(gx, gy)` with replicated borders.
pub fn sobel(image: &Image) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = image.dims();
    let d = image.data();
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        d[y * w + x]
    };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

pub fn sobel_magnitude(image: &Image) -> Vec<f64> {
    let (gx, gy) = sobel(image);
    gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect()
}

/// Intensity and gradient losses against the element-wise maximum of the
/// two sources: `mean |F - max(V, I)|` and
/// `mean | |grad F| - max(|grad V|, |grad I|) |`.
pub fn fusion_losses(vis: &Image, inf: &Image, fused: &Image) -> Result<(f64, f64)> {
    let (vis, inf, fused) = prepare(vis, inf, fused)?;
    let n = fused.pixel_count().max(1) as f64;
    let l_inten: f64 = fused
        .data()
        .iter()
        .zip(vis.data().iter().zip(inf.data()))
        .map(|(f, (v, i))| (f - v.max(*i)).abs())
        .sum::<f64>()
        / n;
    let (gf, gv, gi) = (
        sobel_magnitude(&fused),
        sobel_magnitude(&vis),
        sobel_magnitude(&inf),
    );
    let l_grad: f64 = gf
        .iter()
        .zip(gv.iter().zip(&gi))
        .map(|(f, (v, i))| (f - v.max(*i)).abs())
        .sum::<f64>()
        / n;
    Ok((l_inten, l_grad))
}

/// Pearson correlation; zero when either side has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if constant(a) || constant(b) {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (ea, eb) = (x - ma, y - mb);
        cov += ea * eb;
        va += ea * ea;
        vb += eb * eb;
    }
    if va <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        cov / (va.sqrt() * vb.sqrt())
    }
}

fn constant(v: &[f64]) -> bool {
    v.first().map_or(true, |&f| v.iter().all(|&x| x == f))
}

/// Mean of `corr(F, V)` and `corr(F, I)`.
pub fn cc(vis: &Image, inf: &Image, fused: &Image) -> Result<f64> {
    let (vis, inf, fused) = prepare(vis, inf, fused)?;
    Ok(0.5 * (pearson(fused.data(), vis.data()) + pearson(fused.data(), inf.data())))
}

/// Mean of `SSIM(F, V)` and `SSIM(F, I)`.
pub fn fusion_ssim(vis: &Image, inf: &Image, fused: &Image) -> Result<f64> {
    let (vis, inf, fused) = prepare(vis, inf, fused)?;
    Ok(0.5 * (ssim(&fused, &vis)? + ssim(&fused, &inf)?))
}

// Edge-preservation sigmoid constants.
const TG: f64 = 0.9994;
const KG: f64 = -15.0;
const DG: f64 = 0.5;
const TA: f64 = 0.9879;
const KA: f64 = -22.0;
const DA: f64 = 0.8;

struct EdgeField {
    strength: Vec<f64>,
    angle: Vec<f64>,
}

fn edge_field(image: &Image) -> EdgeField {
    let (gx, gy) = sobel(image);
    let strength = gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect();
    let angle = gx
        .iter()
        .zip(&gy)
        .map(|(&x, &y)| if x == 0.0 { FRAC_PI_2 } else { (y / x).atan() })
        .collect();
    EdgeField { strength, angle }
}

fn edge_preservation(src: &EdgeField, fused: &EdgeField, i: usize) -> f64 {
    let (gs, gf) = (src.strength[i], fused.strength[i]);
    let g = if gs == 0.0 && gf == 0.0 {
        0.0
    } else if gs > gf {
        gf / gs
    } else {
        gs / gf
    };
    let a = 1.0 - (src.angle[i] - fused.angle[i]).abs() / FRAC_PI_2;
    let qg = TG / (1.0 + (KG * (g - DG)).exp());
    let qa = TA / (1.0 + (KA * (a - DA)).exp());
    qg * qa
}

/// Gradient-based edge preservation (Xydeas-Petrovic Q^AB/F) with unit
/// weighting exponent. Zero when neither source has any edges.
pub fn qabf(vis: &Image, inf: &Image, fused: &Image) -> Result<f64> {
    let (vis, inf, fused) = prepare(vis, inf, fused)?;
    let (ea, eb, ef) = (edge_field(&vis), edge_field(&inf), edge_field(&fused));
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..fused.pixel_count() {
        let (wa, wb) = (ea.strength[i], eb.strength[i]);
        num += edge_preservation(&ea, &ef, i) * wa + edge_preservation(&eb, &ef, i) * wb;
        den += wa + wb;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Noise variance of the pixel-domain VIF model, on a 0..255 intensity scale.
const VIF_SIGMA_NSQ: f64 = 2.0;
const VIF_EPS: f64 = 1e-10;

fn gaussian_window(n: usize) -> Vec<f64> {
    let sd = n as f64 / 5.0;
    let c = (n as f64 - 1.0) / 2.0;
    let mut k: Vec<f64> = (0..n)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sd * sd)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable 'valid' filtering of a `w x h` plane.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|t| k[t] * data[y * w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|t| k[t] * rows[(y + t) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Multi-scale pixel-domain visual information fidelity of `dist` relative
/// to `reference`. Scales whose window does not fit are skipped.
pub fn vif(reference: &Image, dist: &Image) -> Result<f64> {
    reference.ensure_same_shape(dist, "vif")?;
    if reference.channels() != 1 {
        return Err(Error::Dimension("vif expects single-channel images".into()));
    }
    let (mut w, mut h) = reference.dims();
    let mut r: Vec<f64> = reference.data().iter().map(|v| v * 255.0).collect();
    let mut d: Vec<f64> = dist.data().iter().map(|v| v * 255.0).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for scale in 1..=4u32 {
        let n = (1usize << (5 - scale)) + 1;
        let win = gaussian_window(n);
        if scale > 1 {
            if w < n || h < n {
                break;
            }
            let (fr, fw, fh) = filter_valid(&r, w, h, &win);
            let (fd, _, _) = filter_valid(&d, w, h, &win);
            let (sw, sh) = (fw.div_ceil(2), fh.div_ceil(2));
            r = (0..sh)
                .flat_map(|y| (0..sw).map(move |x| (y, x)))
                .map(|(y, x)| fr[2 * y * fw + 2 * x])
                .collect();
            d = (0..sh)
                .flat_map(|y| (0..sw).map(move |x| (y, x)))
                .map(|(y, x)| fd[2 * y * fw + 2 * x])
                .collect();
            w = sw;
            h = sh;
        }
        if w < n || h < n {
            break;
        }
        let rr: Vec<f64> = r.iter().map(|v| v * v).collect();
        let dd: Vec<f64> = d.iter().map(|v| v * v).collect();
        let rd: Vec<f64> = r.iter().zip(&d).map(|(a, b)| a * b).collect();
        let (mu1, _, _) = filter_valid(&r, w, h, &win);
        let (mu2, _, _) = filter_valid(&d, w, h, &win);
        let (e11, _, _) = filter_valid(&rr, w, h, &win);
        let (e22, _, _) = filter_valid(&dd, w, h, &win);
        let (e12, _, _) = filter_valid(&rd, w, h, &win);
        for i in 0..mu1.len() {
            let mut s1 = (e11[i] - mu1[i] * mu1[i]).max(0.0);
            let s2 = (e22[i] - mu2[i] * mu2[i]).max(0.0);
            let s12 = e12[i] - mu1[i] * mu2[i];
            let mut g = s12 / (s1 + VIF_EPS);
            let mut sv = s2 - g * s12;
            if s1 < VIF_EPS {
                g = 0.0;
                sv = s2;
                s1 = 0.0;
            }
            if s2 < VIF_EPS {
                g = 0.0;
                sv = 0.0;
            }
            if g < 0.0 {
                sv = s2;
                g = 0.0;
            }
            let sv = sv.max(VIF_EPS);
            num += (1.0 + g * g * s1 / (sv + VIF_SIGMA_NSQ)).log10();
            den += (1.0 + s1 / VIF_SIGMA_NSQ).log10();
        }
    }
    if den > 0.0 {
        Ok(num / den)
    } else if reference == dist {
        Ok(1.0)
    } else {
        Ok(0.0)
    }
}

/// VIF of the fused image against each source, averaged.
pub fn viff(vis: &Image, inf: &Image, fused: &Image) -> Result<f64> {
    let (vis, inf, fused) = prepare(vis, inf, fused)?;
    Ok(0.5 * (vif(&vis, &fused)? + vif(&inf, &fused)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, seed: usize) -> Image {
        Image::from_fn(w, h, 1, |x, y, _| {
            (((x * 31 + y * 17 + seed * 7) % 23) as f64 / 22.0 * 0.6 + 0.2 * ((x + y) % 2) as f64)
                .min(1.0)
        })
    }

    #[test]
    fn cc_perfect_and_inverted() {
        let a = textured(9, 7, 1);
        assert!((cc(&a, &a, &a).unwrap() - 1.0).abs() < 1e-12);
        let neg = a.map(|v| 1.0 - v);
        assert!((cc(&a, &a, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cc_degenerate_variance_is_zero() {
        let flat = Image::filled(5, 5, 1, 0.3);
        let a = textured(5, 5, 2);
        assert_eq!(cc(&flat, &flat, &a).unwrap(), 0.0);
    }

    #[test]
    fn losses_vanish_on_max_fusion_and_flat_images() {
        let v = textured(12, 10, 1);
        let i = textured(12, 10, 5);
        let fused = Image::from_fn(12, 10, 1, |x, y, _| v.get(x, y, 0).max(i.get(x, y, 0)));
        let (li, _) = fusion_losses(&v, &i, &fused).unwrap();
        assert_eq!(li, 0.0);

        let flat = Image::filled(8, 8, 1, 0.4);
        assert_eq!(fusion_losses(&flat, &flat, &flat).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn qabf_bounds() {
        let v = textured(24, 24, 1);
        let i = textured(24, 24, 3);
        let q = qabf(&v, &i, &v).unwrap();
        assert!((0.0..=1.0).contains(&q), "{q}");
        let perfect = qabf(&v, &v, &v).unwrap();
        assert!((perfect - TG * TA / ((1.0 + (KG * 0.5).exp()) * (1.0 + (KA * 0.2).exp()))).abs() < 1e-12);
        let flat = Image::filled(8, 8, 1, 0.2);
        assert_eq!(qabf(&flat, &flat, &flat).unwrap(), 0.0);
    }

    #[test]
    fn vif_of_identity_is_one() {
        let a = textured(40, 40, 4);
        assert!((vif(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        let blurred = a.map(|v| 0.5 * v + 0.25);
        let v = vif(&a, &blurred).unwrap();
        assert!(v < 1.0 && v > 0.0, "{v}");
    }

    #[test]
    fn vif_small_and_flat_inputs() {
        let flat = Image::filled(6, 6, 1, 0.5);
        assert_eq!(vif(&flat, &flat).unwrap(), 1.0);
        assert_eq!(vif(&flat, &Image::filled(6, 6, 1, 0.1)).unwrap(), 0.0);
    }

    #[test]
    fn color_visible_is_reduced_to_luma() {
        let rgb = Image::filled(6, 6, 3, 0.5);
        let ir = Image::filled(6, 6, 1, 0.5);
        assert_eq!(fusion_losses(&rgb, &ir, &ir).unwrap(), (0.0, 0.0));
        assert!(cc(&rgb, &ir, &Image::filled(7, 6, 1, 0.0)).is_err());
    }
}
