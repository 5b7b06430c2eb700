use crate::error::{Error, Result};
use crate::image::Image;

/// Per-channel median over a `kernel x kernel` window with replicated
/// borders.
pub fn median_filter(image: &Image, kernel: usize) -> Result<Image> {
    if kernel < 3 || kernel % 2 == 0 {
        return Err(Error::Config(format!("median kernel must be odd and >= 3, got {kernel}")));
    }
    let (w, h) = image.dims();
    let ch = image.channels();
    let src = image.data();
    let r = (kernel / 2) as isize;
    let mut window = Vec::with_capacity(kernel * kernel);
    let mut out = vec![0.0; src.len()];
    for y in 0..h as isize {
        for x in 0..w as isize {
            for c in 0..ch {
                window.clear();
                for dy in -r..=r {
                    let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                        window.push(src[(sy * w + sx) * ch + c]);
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
                out[(y as usize * w + x as usize) * ch + c] = *m;
            }
        }
    }
    Image::new(w, h, ch, out)
}
