use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::mse;

/// Flags `prediction` when its mean squared difference from `reference`
/// exceeds `threshold`.
pub fn mse_detect(prediction: &Image, reference: &Image, threshold: f64) -> Result<(bool, f64)> {
    let e = mse(prediction, reference)?;
    Ok((e > threshold, e))
}

/// Linearly interpolated percentile (`p` in `[0, 100]`) of `values`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidValue("percentile of an empty sample".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidValue(format!("percentile {p} outside [0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Detector threshold at the given percentile of clean-sample errors.
pub fn calibrate_threshold(clean_errors: &[f64], p: f64) -> Result<f64> {
    percentile(clean_errors, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 50.0).unwrap(), 3.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 5.0);
        assert_eq!(percentile(&v, 95.0).unwrap(), 4.8);
    }
}
