//! Deterministic stand-in models: blob counting on the infrared channel,
//! intensity banding for segmentation, and max fusion.

use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::image::{Image, ImagePair};
use crate::metrics::ClassMap;

use super::{Prediction, TargetModel, Task};

pub const DEFAULT_BANDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateCountingParams {
    pub blur_sigma: f64,
    pub threshold: f64,
    pub min_area: usize,
}

impl Default for SurrogateCountingParams {
    fn default() -> Self {
        SurrogateCountingParams {
            blur_sigma: 2.0,
            threshold: 0.6,
            min_area: 9,
        }
    }
}

struct Kernel {
    weights: Vec<f64>,
    radius: usize,
}

impl Kernel {
    fn gaussian(sigma: f64) -> Kernel {
        let radius = (3.0 * sigma).ceil().max(0.0) as usize;
        let raw: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        Kernel {
            weights: raw.into_iter().map(|v| v / total).collect(),
            radius,
        }
    }
}

/// Mirror index into `0..n` with the edge sample repeated (`dcba|abcd|dcba`).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn blur_rows(src: &[f64], w: usize, k: &Kernel, rows: (usize, usize), cols: (usize, usize), out: &mut [f64]) {
    let r = k.radius as isize;
    for y in rows.0..rows.1 {
        let row = &src[y * w..(y + 1) * w];
        for x in cols.0..cols.1 {
            let mut acc = 0.0;
            for (t, wt) in k.weights.iter().enumerate() {
                acc += wt * row[reflect(x as isize + t as isize - r, w)];
            }
            out[y * w + x] = acc;
        }
    }
}

fn blur_cols(
    src: &[f64],
    w: usize,
    h: usize,
    k: &Kernel,
    rows: (usize, usize),
    cols: (usize, usize),
    out: &mut [f64],
) {
    let r = k.radius as isize;
    for y in rows.0..rows.1 {
        for x in cols.0..cols.1 {
            let mut acc = 0.0;
            for (t, wt) in k.weights.iter().enumerate() {
                acc += wt * src[reflect(y as isize + t as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
}

/// Separable Gaussian blur of each channel, kernel truncated at 3 sigma,
/// reflected borders.
pub fn gaussian_blur(image: &Image, sigma: f64) -> Image {
    let (w, h) = image.dims();
    let k = Kernel::gaussian(sigma);
    let mut channels = Vec::with_capacity(image.channels());
    for c in 0..image.channels() {
        let src = image.channel(c).into_data();
        let mut tmp = vec![0.0; w * h];
        let mut out = vec![0.0; w * h];
        blur_rows(&src, w, &k, (0, h), (0, w), &mut tmp);
        blur_cols(&tmp, w, h, &k, (0, h), (0, w), &mut out);
        channels.push(out);
    }
    let data = (0..w * h)
        .flat_map(|i| channels.iter().map(move |ch| ch[i].clamp(0.0, 1.0)))
        .collect();
    Image::from_raw_unchecked(w, h, image.channels(), data)
}

/// 4-connected foreground components.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    /// Per-pixel component id, `0` for background, ids start at 1.
    pub labels: Vec<u32>,
    /// `areas[id - 1]` is the pixel count of component `id`.
    pub areas: Vec<usize>,
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

pub fn connected_components(foreground: &[bool], w: usize, h: usize) -> Components {
    assert_eq!(foreground.len(), w * h);
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !foreground[i] {
                continue;
            }
            let left = if x > 0 { labels[i - 1] } else { 0 };
            let up = if y > 0 { labels[i - w] } else { 0 };
            labels[i] = match (left, up) {
                (0, 0) => {
                    let id = parent.len() as u32;
                    parent.push(id);
                    id
                }
                (a, 0) | (0, a) => a,
                (a, b) => {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb) as usize] = ra.min(rb);
                    }
                    ra.min(rb)
                }
            };
        }
    }
    // Compact roots to 1..=n in order of first appearance.
    let mut compact = vec![0u32; parent.len()];
    let mut areas = Vec::new();
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if compact[root] == 0 {
            areas.push(0);
            compact[root] = areas.len() as u32;
        }
        *l = compact[root];
        areas[*l as usize - 1] += 1;
    }
    Components { labels, areas }
}

fn count_from_blurred(blurred: &[f64], w: usize, h: usize, p: &SurrogateCountingParams) -> (f64, Image) {
    let fg: Vec<bool> = blurred.iter().map(|&v| v >= p.threshold).collect();
    let comps = connected_components(&fg, w, h);
    let kept = comps.areas.iter().filter(|&&a| a >= p.min_area).count();
    let density = comps
        .labels
        .iter()
        .map(|&l| match l {
            0 => 0.0,
            l => {
                let a = comps.areas[l as usize - 1];
                if a >= p.min_area {
                    1.0 / a as f64
                } else {
                    0.0
                }
            }
        })
        .collect();
    (kept as f64, Image::from_raw_unchecked(w, h, 1, density))
}

/// Counts bright blobs in the infrared image: blur, threshold, 4-connected
/// components of at least `min_area` pixels. The density map spreads one
/// unit of mass evenly over each counted component.
pub fn surrogate_count(pair: &ImagePair, params: &SurrogateCountingParams) -> (f64, Image) {
    let (w, h) = pair.dims();
    let blurred = gaussian_blur(pair.infrared(), params.blur_sigma);
    count_from_blurred(blurred.data(), w, h, params)
}

struct BlurCache {
    w: usize,
    h: usize,
    input: Vec<f64>,
    horizontal: Vec<f64>,
    blurred: Vec<f64>,
}

/// [`surrogate_count`] as a model. It keeps the blur of the last image that
/// had to be processed in full and, for inputs differing from it only in a
/// small region, re-blurs just that region. Output is bit-identical to the
/// plain function.
pub struct SurrogateCounter {
    params: SurrogateCountingParams,
    kernel: Kernel,
    cache: Mutex<Option<Arc<BlurCache>>>,
}

impl Default for SurrogateCounter {
    fn default() -> Self {
        Self::new(SurrogateCountingParams::default())
    }
}

impl SurrogateCounter {
    pub fn new(params: SurrogateCountingParams) -> Self {
        SurrogateCounter {
            kernel: Kernel::gaussian(params.blur_sigma),
            params,
            cache: Mutex::new(None),
        }
    }

    pub fn params(&self) -> &SurrogateCountingParams {
        &self.params
    }

    fn full(&self, input: &[f64], w: usize, h: usize) -> BlurCache {
        let mut horizontal = vec![0.0; w * h];
        let mut blurred = vec![0.0; w * h];
        blur_rows(input, w, &self.kernel, (0, h), (0, w), &mut horizontal);
        blur_cols(&horizontal, w, h, &self.kernel, (0, h), (0, w), &mut blurred);
        BlurCache {
            w,
            h,
            input: input.to_vec(),
            horizontal,
            blurred,
        }
    }

    fn blurred(&self, input: &[f64], w: usize, h: usize) -> Vec<f64> {
        let cached = self.cache.lock().unwrap().clone();
        let r = self.kernel.radius;
        if let Some(c) = cached.filter(|c| c.w == w && c.h == h && w > 2 * r && h > 2 * r) {
            match diff_box(&c.input, input, w, h) {
                None => return c.blurred.clone(),
                Some((x0, x1, y0, y1)) if 2 * (x1 - x0) * (y1 - y0) <= w * h => {
                    let cols = (x0.saturating_sub(r), (x1 + r).min(w));
                    let mut horizontal = c.horizontal.clone();
                    blur_rows(input, w, &self.kernel, (y0, y1), cols, &mut horizontal);
                    let mut blurred = c.blurred.clone();
                    let rows = (y0.saturating_sub(r), (y1 + r).min(h));
                    blur_cols(&horizontal, w, h, &self.kernel, rows, cols, &mut blurred);
                    return blurred;
                }
                Some(_) => {}
            }
        }
        let fresh = self.full(input, w, h);
        let out = fresh.blurred.clone();
        *self.cache.lock().unwrap() = Some(Arc::new(fresh));
        out
    }
}

/// Bounding box `[x0, x1) x [y0, y1)` of differing pixels.
fn diff_box(a: &[f64], b: &[f64], w: usize, h: usize) -> Option<(usize, usize, usize, usize)> {
    let (mut x0, mut x1, mut y0, mut y1) = (w, 0, h, 0);
    for y in 0..h {
        let (ra, rb) = (&a[y * w..(y + 1) * w], &b[y * w..(y + 1) * w]);
        if ra == rb {
            continue;
        }
        let first = ra.iter().zip(rb).position(|(p, q)| p != q).unwrap();
        let last = w - 1 - ra.iter().rev().zip(rb.iter().rev()).position(|(p, q)| p != q).unwrap();
        x0 = x0.min(first);
        x1 = x1.max(last + 1);
        y0 = y0.min(y);
        y1 = y + 1;
    }
    (y1 > 0).then_some((x0, x1, y0, y1))
}

impl TargetModel for SurrogateCounter {
    fn task(&self) -> Task {
        Task::Counting
    }

    fn predict(&self, pair: &ImagePair) -> Result<Prediction> {
        let (w, h) = pair.dims();
        let blurred: Vec<f64> = self
            .blurred(pair.infrared().data(), w, h)
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        let (count, density) = count_from_blurred(&blurred, w, h, &self.params);
        Ok(Prediction::Count {
            count,
            density: Some(density),
        })
    }
}

/// Bands the mean of visible luma and infrared into `bands` classes.
pub fn surrogate_segment(pair: &ImagePair, bands: usize) -> ClassMap {
    let bands = bands.clamp(1, 256);
    let (w, h) = pair.dims();
    let gray = pair.visible().to_grayscale();
    let labels = gray
        .data()
        .iter()
        .zip(pair.infrared().data())
        .map(|(v, i)| {
            let g = 0.5 * v + 0.5 * i;
            ((g * bands as f64).floor().max(0.0) as usize).min(bands - 1) as u8
        })
        .collect();
    ClassMap::new(w, h, labels).expect("label buffer matches dimensions")
}

pub struct SurrogateSegmenter {
    pub bands: usize,
}

impl Default for SurrogateSegmenter {
    fn default() -> Self {
        SurrogateSegmenter {
            bands: DEFAULT_BANDS,
        }
    }
}

impl TargetModel for SurrogateSegmenter {
    fn task(&self) -> Task {
        Task::Segmentation
    }

    fn predict(&self, pair: &ImagePair) -> Result<Prediction> {
        Ok(Prediction::Segmentation(surrogate_segment(pair, self.bands)))
    }
}

/// Element-wise maximum of visible luma and infrared.
pub fn surrogate_fuse(pair: &ImagePair) -> Image {
    let gray = pair.visible().to_grayscale();
    let data = gray
        .data()
        .iter()
        .zip(pair.infrared().data())
        .map(|(v, i)| v.max(*i))
        .collect();
    let (w, h) = pair.dims();
    Image::from_raw_unchecked(w, h, 1, data)
}

pub struct SurrogateFuser;

impl TargetModel for SurrogateFuser {
    fn task(&self) -> Task {
        Task::Fusion
    }

    fn predict(&self, pair: &ImagePair) -> Result<Prediction> {
        Ok(Prediction::Fused(surrogate_fuse(pair)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_from_ir(ir: Image) -> ImagePair {
        let (w, h) = ir.dims();
        ImagePair::new(Image::filled(w, h, 3, 0.0), ir).unwrap()
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-1, 1), 0);
    }

    #[test]
    fn blur_preserves_constants() {
        let img = Image::filled(9, 5, 1, 0.4);
        for v in gaussian_blur(&img, 2.0).data() {
            assert!((v - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn components_split_diagonals() {
        // x.
        // .x
        let fg = [true, false, false, true];
        let c = connected_components(&fg, 2, 2);
        assert_eq!(c.areas, vec![1, 1]);
        // U shape merges late through union.
        let fg = [
            true, false, true, //
            true, false, true, //
            true, true, true,
        ];
        let c = connected_components(&fg, 3, 3);
        assert_eq!(c.areas, vec![7]);
    }

    #[test]
    fn dark_and_single_disk() {
        let p = SurrogateCountingParams::default();
        let (n, d) = surrogate_count(&pair_from_ir(Image::filled(40, 40, 1, 0.0)), &p);
        assert_eq!(n, 0.0);
        assert!(d.data().iter().all(|&v| v == 0.0));

        let ir = Image::from_fn(40, 40, 1, |x, y, _| {
            let (dx, dy) = (x as f64 - 20.0, y as f64 - 20.0);
            if dx * dx + dy * dy <= 25.0 {
                1.0
            } else {
                0.0
            }
        });
        let (n, d) = surrogate_count(&pair_from_ir(ir), &p);
        assert_eq!(n, 1.0);
        assert!((d.data().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cached_counter_matches_plain_function() {
        let base = Image::from_fn(48, 40, 1, |x, y, _| ((x * 7 + y * 13) % 17) as f64 / 20.0);
        let model = SurrogateCounter::default();
        let p = SurrogateCountingParams::default();
        let clean = pair_from_ir(base.clone());
        let first = model.predict(&clean).unwrap();
        assert_eq!(first.count(), Some(surrogate_count(&clean, &p).0));
        for (cx, cy, v) in [(3usize, 4usize, 1.0), (44, 37, 0.9), (20, 20, 0.0), (0, 39, 1.0)] {
            let ir = Image::from_fn(48, 40, 1, |x, y, _| {
                if x.abs_diff(cx) <= 4 && y.abs_diff(cy) <= 3 {
                    v
                } else {
                    base.get(x, y, 0)
                }
            });
            let pair = pair_from_ir(ir);
            let (n, d) = surrogate_count(&pair, &p);
            let got = model.predict(&pair).unwrap();
            assert_eq!(got.count(), Some(n));
            assert_eq!(got.density(), Some(&d));
        }
    }

    #[test]
    fn segmentation_bands() {
        let pair = ImagePair::new(Image::filled(2, 1, 3, 0.99), Image::filled(2, 1, 1, 0.99)).unwrap();
        assert_eq!(surrogate_segment(&pair, 4).labels(), &[3, 3]);
        let pair = ImagePair::new(Image::filled(2, 1, 3, 0.0), Image::filled(2, 1, 1, 0.0)).unwrap();
        assert_eq!(surrogate_segment(&pair, 4).labels(), &[0, 0]);
    }

    #[test]
    fn fusion_is_max() {
        let vis = Image::from_fn(3, 2, 3, |x, _, _| x as f64 / 2.0);
        let pair = ImagePair::new(vis.clone(), Image::filled(3, 2, 1, 0.0)).unwrap();
        assert_eq!(surrogate_fuse(&pair), vis.to_grayscale());
    }
}
