use crate::error::{Error, Result};
use crate::image::Image;

/// Ground-truth head positions in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointAnnotations {
    points: Vec<(f64, f64)>,
}

impl PointAnnotations {
    pub fn new(points: Vec<(f64, f64)>, dims: (usize, usize)) -> Result<Self> {
        let (w, h) = (dims.0 as f64, dims.1 as f64);
        if let Some(p) = points
            .iter()
            .find(|(x, y)| !(*x >= 0.0 && *x < w && *y >= 0.0 && *y < h))
        {
            return Err(Error::InvalidValue(format!(
                "annotation {p:?} outside {w}x{h} image"
            )));
        }
        Ok(PointAnnotations { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parses one `x y` pair per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, dims: (usize, usize)) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => points.push((x, y)),
                _ => {
                    return Err(Error::InvalidValue(format!(
                        "annotation line {}: expected `x y`, got {line:?}",
                        n + 1
                    )))
                }
            }
        }
        Self::new(points, dims)
    }

    pub fn to_text(&self) -> String {
        self.points
            .iter()
            .map(|(x, y)| format!("{x} {y}\n"))
            .collect()
    }

    /// Ground-truth density: each point spreads unit mass with a Gaussian of
    /// standard deviation `sigma`, truncated at 3 sigma and renormalized to
    /// the pixels that fall inside the image.
    pub fn density(&self, dims: (usize, usize), sigma: f64) -> Image {
        let (w, h) = dims;
        let mut data = vec![0.0; w * h];
        let radius = (3.0 * sigma).ceil() as i64;
        for &(px, py) in &self.points {
            let (cx, cy) = (px.floor() as i64, py.floor() as i64);
            let mut cells = Vec::new();
            let mut total = 0.0;
            for y in (cy - radius).max(0)..=(cy + radius).min(h as i64 - 1) {
                for x in (cx - radius).max(0)..=(cx + radius).min(w as i64 - 1) {
                    let d2 = ((x - cx).pow(2) + (y - cy).pow(2)) as f64;
                    let v = (-d2 / (2.0 * sigma * sigma)).exp();
                    total += v;
                    cells.push((y as usize * w + x as usize, v));
                }
            }
            for (i, v) in cells {
                data[i] += v / total;
            }
        }
        Image::from_raw_unchecked(w, h, 1, data.into_iter().map(|v| v.min(1.0)).collect())
    }
}

/// Boundary `i` of an `n`-way split of `extent`. Splits at level `k + 1`
/// refine those at level `k`, which keeps GAME monotone in `k`.
#[inline]
pub(crate) fn cell_bound(i: usize, n: usize, extent: usize) -> usize {
    i * extent / n
}

#[inline]
fn cell_of(pos: usize, n: usize, extent: usize) -> usize {
    // Largest i with cell_bound(i) <= pos.
    let mut i = (pos * n) / extent.max(1);
    while i + 1 < n && cell_bound(i + 1, n, extent) <= pos {
        i += 1;
    }
    while i > 0 && cell_bound(i, n, extent) > pos {
        i -= 1;
    }
    i.min(n - 1)
}

/// Per-cell sums of a density map over a `2^k x 2^k` grid, row-major.
pub fn grid_density_counts(density: &Image, k: u32) -> Vec<f64> {
    let n = 1usize << k;
    let (w, h) = density.dims();
    let mut cells = vec![0.0; n * n];
    for gy in 0..n {
        let (y0, y1) = (cell_bound(gy, n, h), cell_bound(gy + 1, n, h));
        for gx in 0..n {
            let (x0, x1) = (cell_bound(gx, n, w), cell_bound(gx + 1, n, w));
            let mut sum = 0.0;
            for y in y0..y1 {
                let row = &density.data()[y * w..(y + 1) * w];
                sum += row[x0..x1].iter().sum::<f64>();
            }
            cells[gy * n + gx] = sum;
        }
    }
    cells
}

pub fn grid_point_counts(gt: &PointAnnotations, dims: (usize, usize), k: u32) -> Vec<f64> {
    let n = 1usize << k;
    let mut cells = vec![0.0; n * n];
    for &(x, y) in gt.points() {
        let gx = cell_of(x.floor() as usize, n, dims.0);
        let gy = cell_of(y.floor() as usize, n, dims.1);
        cells[gy * n + gx] += 1.0;
    }
    cells
}

/// Grid Average Mean absolute Error of one image at level `k`.
pub fn game(pred_density: &Image, gt: &PointAnnotations, k: u32) -> Result<f64> {
    if k > 3 {
        return Err(Error::InvalidValue(format!("GAME level {k} outside 0..=3")));
    }
    if pred_density.channels() != 1 {
        return Err(Error::Dimension("density map must be single-channel".into()));
    }
    if let Some(v) = pred_density.data().iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidValue(format!("negative density {v}")));
    }
    let pred = grid_density_counts(pred_density, k);
    let truth = grid_point_counts(gt, pred_density.dims(), k);
    Ok(pred.iter().zip(&truth).map(|(p, t)| (p - t).abs()).sum())
}

/// GAME(0) from scalar counts, for models that report only a total.
pub fn game0_from_counts(pred: f64, gt: f64) -> f64 {
    (pred - gt).abs()
}

pub fn rmse(pred_counts: &[f64], gt_counts: &[f64]) -> Result<f64> {
    if pred_counts.len() != gt_counts.len() {
        return Err(Error::Dimension(format!(
            "rmse: {} predictions vs {} ground truths",
            pred_counts.len(),
            gt_counts.len()
        )));
    }
    if pred_counts.is_empty() {
        return Err(Error::InvalidValue("rmse over an empty set".into()));
    }
    let sq: f64 = pred_counts
        .iter()
        .zip(gt_counts)
        .map(|(p, g)| (p - g) * (p - g))
        .sum();
    Ok((sq / pred_counts.len() as f64).sqrt())
}

pub fn mean_absolute_error(pred_counts: &[f64], gt_counts: &[f64]) -> Result<f64> {
    if pred_counts.len() != gt_counts.len() || pred_counts.is_empty() {
        return Err(Error::Dimension("mae needs equal, non-empty lists".into()));
    }
    let s: f64 = pred_counts
        .iter()
        .zip(gt_counts)
        .map(|(p, g)| (p - g).abs())
        .sum();
    Ok(s / pred_counts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dens(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Image {
        Image::from_fn(w, h, 1, |x, y, _| f(x, y))
    }

    #[test]
    fn exact_prediction_scores_zero() {
        // One unit of mass at every annotated pixel.
        let pts = vec![(1.0, 1.0), (6.0, 2.0), (3.0, 7.0)];
        let gt = PointAnnotations::new(pts.clone(), (8, 8)).unwrap();
        let d = dens(8, 8, |x, y| {
            if pts.contains(&(x as f64, y as f64)) {
                1.0
            } else {
                0.0
            }
        });
        for k in 0..=3 {
            assert_eq!(game(&d, &gt, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn game0_is_global_count_error() {
        let gt = PointAnnotations::new(vec![(0.0, 0.0); 5], (4, 4)).unwrap();
        let d = dens(4, 4, |_, _| 0.5);
        assert!((game(&d, &gt, 0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_vs_single_quadrant() {
        // 8x8 map summing to 10, all 10 annotations in the top-left quadrant.
        let d = dens(8, 8, |_, _| 10.0 / 64.0);
        let gt = PointAnnotations::new(vec![(1.0, 2.0); 10], (8, 8)).unwrap();
        assert!((game(&d, &gt, 1).unwrap() - 15.0).abs() < 1e-12);
        assert!((game(&d, &gt, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn grid_tiles_exactly_with_remainders() {
        for (w, h) in [(7, 5), (33, 17), (3, 2), (64, 48)] {
            for k in 0..=3 {
                let d = dens(w, h, |_, _| 1.0);
                let cells = grid_density_counts(&d, k);
                let total: f64 = cells.iter().sum();
                assert_eq!(total, (w * h) as f64);
            }
        }
    }

    #[test]
    fn point_cells_agree_with_bounds() {
        let (w, h) = (13, 9);
        for k in 0..=3u32 {
            let n = 1usize << k;
            for x in 0..w {
                let c = cell_of(x, n, w);
                assert!(cell_bound(c, n, w) <= x && x < cell_bound(c + 1, n, w));
            }
            for y in 0..h {
                let c = cell_of(y, n, h);
                assert!(cell_bound(c, n, h) <= y && y < cell_bound(c + 1, n, h));
            }
        }
    }

    #[test]
    fn negative_density_and_bad_level_rejected() {
        let gt = PointAnnotations::default();
        let d = Image::from_raw_unchecked(2, 1, 1, vec![0.1, -0.1]);
        assert!(game(&d, &gt, 0).is_err());
        assert!(game(&dens(2, 2, |_, _| 0.0), &gt, 4).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.0], &[0.0]).unwrap(), 3.0);
        let v = rmse(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((v - (14.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((v - 2.1602).abs() < 1e-4);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[]).is_err());
    }

    #[test]
    fn annotations_parse_and_validate() {
        let gt = PointAnnotations::parse("# heads\n1 2\n\n3.5 4\n", (10, 10)).unwrap();
        assert_eq!(gt.points(), &[(1.0, 2.0), (3.5, 4.0)]);
        assert!(PointAnnotations::parse("1 2 3\n", (10, 10)).is_err());
        assert!(PointAnnotations::parse("10 2\n", (10, 10)).is_err());
        let back = PointAnnotations::parse(&gt.to_text(), (10, 10)).unwrap();
        assert_eq!(back, gt);
    }

    #[test]
    fn gt_density_has_unit_mass_per_point() {
        let gt = PointAnnotations::new(vec![(0.0, 0.0), (10.0, 10.0)], (20, 20)).unwrap();
        let d = gt.density((20, 20), 2.0);
        let total: f64 = d.data().iter().sum();
        assert!((total - 2.0).abs() < 1e-9);
    }
}
