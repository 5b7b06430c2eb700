// Brute-force reference implementations written directly from the metric
// definitions. They share no code with the library.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vipatch::image::Image;
use vipatch::metrics::{ClassMap, PointAnnotations};

pub const PSNR_CAP: f64 = 99.0;

pub fn gray(img: &Image) -> Vec<f64> {
    match img.channels() {
        1 => img.data().to_vec(),
        _ => img
            .data()
            .chunks(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect(),
    }
}

/// Index of the grid cell holding coordinate `pos` when `extent` is split
/// into `n` parts at `floor(i * extent / n)`.
fn cell(pos: usize, n: usize, extent: usize) -> usize {
    (1..n).filter(|&i| i * extent / n <= pos).count()
}

pub fn game(density: &Image, points: &PointAnnotations, k: u32) -> f64 {
    let n = 1usize << k;
    let (w, h) = density.dims();
    let mut pred = vec![vec![0.0; n]; n];
    let mut truth = vec![vec![0.0; n]; n];
    for y in 0..h {
        for x in 0..w {
            pred[cell(y, n, h)][cell(x, n, w)] += density.get(x, y, 0);
        }
    }
    for &(px, py) in points.points() {
        truth[cell(py as usize, n, h)][cell(px as usize, n, w)] += 1.0;
    }
    let mut total = 0.0;
    for gy in 0..n {
        for gx in 0..n {
            total += (pred[gy][gx] - truth[gy][gx]).abs();
        }
    }
    total
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..pred.len() {
        s += (pred[i] - truth[i]).powi(2);
    }
    (s / pred.len() as f64).sqrt()
}

pub fn miou(pred: &ClassMap, gt: &ClassMap, classes: usize) -> f64 {
    let (p, g) = (pred.labels(), gt.labels());
    let mut ious = Vec::new();
    for c in 0..classes as u8 {
        let inter = (0..p.len()).filter(|&i| p[i] == c && g[i] == c).count();
        let union = (0..p.len()).filter(|&i| p[i] == c || g[i] == c).count();
        if union > 0 {
            ious.push(inter as f64 / union as f64);
        }
    }
    if ious.is_empty() {
        1.0
    } else {
        ious.iter().sum::<f64>() / ious.len() as f64
    }
}

pub fn recall(pred: &ClassMap, gt: &ClassMap, classes: usize) -> f64 {
    let (p, g) = (pred.labels(), gt.labels());
    let mut rs = Vec::new();
    for c in 0..classes as u8 {
        let total = g.iter().filter(|&&v| v == c).count();
        if total > 0 {
            let hit = (0..p.len()).filter(|&i| p[i] == c && g[i] == c).count();
            rs.push(hit as f64 / total as f64);
        }
    }
    if rs.is_empty() {
        1.0
    } else {
        rs.iter().sum::<f64>() / rs.len() as f64
    }
}

pub fn psnr(a: &Image, b: &Image) -> f64 {
    let n = a.data().len() as f64;
    let mse: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n;
    if mse == 0.0 {
        PSNR_CAP
    } else {
        (-10.0 * mse.log10()).min(PSNR_CAP)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let (c1, c2) = (1e-4, 9e-4);
    let mut scores = Vec::new();
    let mut y0 = 0;
    while y0 < h {
        let mut x0 = 0;
        while x0 < w {
            let mut wa = Vec::new();
            let mut wb = Vec::new();
            for y in y0..(y0 + 8).min(h) {
                for x in x0..(x0 + 8).min(w) {
                    wa.push(a[y * w + x]);
                    wb.push(b[y * w + x]);
                }
            }
            let (ma, mb) = (mean(&wa), mean(&wb));
            let va = mean(&wa.iter().map(|v| (v - ma).powi(2)).collect::<Vec<_>>());
            let vb = mean(&wb.iter().map(|v| (v - mb).powi(2)).collect::<Vec<_>>());
            let cov = mean(&wa.iter().zip(&wb).map(|(p, q)| (p - ma) * (q - mb)).collect::<Vec<_>>());
            scores.push(
                (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)),
            );
            x0 += 8;
        }
        y0 += 8;
    }
    mean(&scores)
}

pub fn ssim(a: &Image, b: &Image) -> f64 {
    let (w, h) = a.dims();
    let ch = a.channels();
    let plane = |img: &Image, c: usize| -> Vec<f64> { img.data().iter().skip(c).step_by(ch).copied().collect() };
    (0..ch).map(|c| ssim_plane(&plane(a, c), &plane(b, c), w, h)).sum::<f64>() / ch as f64
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    if a.iter().all(|&v| v == a[0]) || b.iter().all(|&v| v == b[0]) {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let da: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>().sqrt();
    let db: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>().sqrt();
    num / (da * db)
}

pub fn cc(vis: &Image, inf: &Image, fused: &Image) -> f64 {
    let f = gray(fused);
    0.5 * (corr(&f, &gray(vis)) + corr(&f, &gray(inf)))
}

fn gradient_magnitude(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    const KX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    const KY: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let (mut gx, mut gy) = (0.0, 0.0);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let sx = (x + dx).clamp(0, w as i64 - 1) as usize;
                    let sy = (y + dy).clamp(0, h as i64 - 1) as usize;
                    let p = v[sy * w + sx];
                    gx += KX[(dy + 1) as usize][(dx + 1) as usize] * p;
                    gy += KY[(dy + 1) as usize][(dx + 1) as usize] * p;
                }
            }
            out[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// `(L_inten, L_grad)` against the pixelwise maximum of the sources.
pub fn fusion_losses(vis: &Image, inf: &Image, fused: &Image) -> (f64, f64) {
    let (w, h) = fused.dims();
    let (v, i, f) = (gray(vis), gray(inf), gray(fused));
    let n = (w * h) as f64;
    let inten = (0..w * h).map(|k| (f[k] - v[k].max(i[k])).abs()).sum::<f64>() / n;
    let (gv, gi, gf) = (
        gradient_magnitude(&v, w, h),
        gradient_magnitude(&i, w, h),
        gradient_magnitude(&f, w, h),
    );
    let grad = (0..w * h).map(|k| (gf[k] - gv[k].max(gi[k])).abs()).sum::<f64>() / n;
    (inten, grad)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Image {
    Image::new(w, h, c, (0..w * h * c).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, w: usize, h: usize, n: usize) -> PointAnnotations {
    let pts = (0..n)
        .map(|_| (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64)))
        .collect();
    PointAnnotations::new(pts, (w, h)).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, w: usize, h: usize, classes: u8) -> ClassMap {
    ClassMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0..classes)).collect()).unwrap()
}
