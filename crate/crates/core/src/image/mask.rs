use super::Image;
use crate::error::{Error, Result};

/// Per-pixel binary patch region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} mask needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Linear indices of set pixels in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

/// Closed discrete disk: pixel `(col, row)` is set iff
/// `(row - y)^2 + (col - x)^2 <= r^2`.
///
/// The center must satisfy `x in [r, w - r]` and `y in [r, h - r]`. At the
/// upper bound the disk touches column `w` (or row `h`), which lies outside
/// the image, so that one edge pixel is clipped.
pub fn disk_mask(x: usize, y: usize, r: usize, width: usize, height: usize) -> Result<Mask> {
    if r == 0 {
        return Err(Error::Feasibility("radius must be at least 1".into()));
    }
    check_axis("x", x, r, width)?;
    check_axis("y", y, r, height)?;

    let mut mask = Mask::empty(width, height);
    let r2 = (r * r) as i64;
    let (cx, cy) = (x as i64, y as i64);
    for row in y - r..=(y + r).min(height - 1) {
        let dy = row as i64 - cy;
        for col in x - r..=(x + r).min(width - 1) {
            let dx = col as i64 - cx;
            if dx * dx + dy * dy <= r2 {
                mask.bits[row * width + col] = true;
            }
        }
    }
    Ok(mask)
}

fn check_axis(name: &str, value: usize, r: usize, extent: usize) -> Result<()> {
    if value < r {
        return Err(Error::Feasibility(format!(
            "{name} = {value} violates lower bound {name} >= r = {r}"
        )));
    }
    if value + r > extent {
        return Err(Error::Feasibility(format!(
            "{name} = {value} violates upper bound {name} <= {} (extent {extent} - r {r})",
            extent.saturating_sub(r)
        )));
    }
    Ok(())
}

/// `base * (1 - mask) + patch * mask`.
pub fn embed_patch(base: &Image, patch_content: &Image, mask: &Mask) -> Result<Image> {
    base.ensure_same_shape(patch_content, "embed_patch base vs patch content")?;
    if base.dims() != mask.dims() {
        return Err(Error::Dimension(format!(
            "embed_patch: image {}x{} vs mask {}x{}",
            base.width(),
            base.height(),
            mask.width,
            mask.height
        )));
    }
    let c = base.channels();
    let mut out = base.clone();
    let src = patch_content.data();
    let dst = out.data_mut();
    for i in mask.indices() {
        dst[i * c..(i + 1) * c].copy_from_slice(&src[i * c..(i + 1) * c]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_disk(x: i64, y: i64, r: i64, w: usize, h: usize) -> Vec<bool> {
        let mut bits = vec![false; w * h];
        for i in 0..h as i64 {
            for j in 0..w as i64 {
                bits[(i as usize) * w + j as usize] = (i - y).pow(2) + (j - x).pow(2) <= r * r;
            }
        }
        bits
    }

    #[test]
    fn unit_disk_has_five_pixels() {
        let m = disk_mask(5, 5, 1, 10, 10).unwrap();
        assert_eq!(m.count(), 5);
        assert_eq!(m.bits(), brute_disk(5, 5, 1, 10, 10).as_slice());
    }

    #[test]
    fn zero_radius_is_rejected() {
        assert!(matches!(disk_mask(5, 5, 0, 10, 10), Err(Error::Feasibility(_))));
    }

    #[test]
    fn boundary_centers_accepted_and_violations_named() {
        assert!(disk_mask(3, 3, 3, 20, 20).is_ok());
        assert!(disk_mask(17, 17, 3, 20, 20).is_ok());
        let err = disk_mask(2, 5, 3, 20, 20).unwrap_err().to_string();
        assert!(err.contains("x = 2") && err.contains("lower"), "{err}");
        let err = disk_mask(5, 18, 3, 20, 20).unwrap_err().to_string();
        assert!(err.contains("y = 18") && err.contains("upper"), "{err}");
    }

    #[test]
    fn large_disk_count_within_gauss_bound() {
        let r = 40usize;
        let m = disk_mask(320, 240, r, 640, 480).unwrap();
        let brute = brute_disk(320, 240, 40, 640, 480);
        assert_eq!(m.bits(), brute.as_slice());
        let area = std::f64::consts::PI * (r * r) as f64;
        let n = m.count() as f64;
        assert!((area - 4.0 * r as f64..=area + 4.0 * r as f64).contains(&n), "{n}");
    }

    #[test]
    fn mask_symmetric_under_reflection() {
        let (w, h) = (31, 23);
        let a = disk_mask(9, 7, 5, w, h).unwrap();
        let b = disk_mask(w - 1 - 9, h - 1 - 7, 5, w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                assert_eq!(a.is_set(x, y), b.is_set(w - 1 - x, h - 1 - y));
            }
        }
    }

    #[test]
    fn embed_extremes() {
        let base = Image::from_fn(5, 4, 3, |x, y, c| ((x + 2 * y + c) % 7) as f64 / 7.0);
        let patch = Image::filled(5, 4, 3, 0.9);
        assert_eq!(embed_patch(&base, &patch, &Mask::empty(5, 4)).unwrap(), base);
        assert_eq!(embed_patch(&base, &patch, &Mask::full(5, 4)).unwrap(), patch);
    }

    #[test]
    fn embed_disk_matches_pixel_loop() {
        let base = Image::filled(4, 4, 1, 0.5);
        let patch = Image::filled(4, 4, 1, 1.0);
        let mask = disk_mask(2, 2, 1, 4, 4).unwrap();
        let out = embed_patch(&base, &patch, &mask).unwrap();
        for y in 0..4i64 {
            for x in 0..4i64 {
                let inside = (y - 2).pow(2) + (x - 2).pow(2) <= 1;
                let expected = if inside { 1.0 } else { 0.5 };
                assert_eq!(out.get(x as usize, y as usize, 0), expected);
            }
        }
    }

    #[test]
    fn embed_rejects_mismatch() {
        let base = Image::filled(4, 4, 1, 0.5);
        assert!(embed_patch(&base, &Image::filled(4, 4, 3, 0.1), &Mask::empty(4, 4)).is_err());
        assert!(embed_patch(&base, &base, &Mask::empty(3, 4)).is_err());
    }
}
