//! Canonical image representation shared by every stage of the attack.
//!
//! Intensities are stored as `f64` in `[0, 1]`, row-major and interleaved per
//! pixel. Conversion to and from 8-bit happens only at the file boundary, so
//! the optimizer never sees quantization drift.

pub(crate) mod io;
mod mask;

pub use io::{load_image, load_infrared, load_labels, save_image, save_labels};
pub use mask::{disk_mask, embed_patch, Mask};

use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidValue(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "{}x{}x{} image needs {} samples, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3);
        let value = value.clamp(0.0, 1.0);
        Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Builds an image from arbitrary samples, clamping each into `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        assert!(channels == 1 || channels == 3);
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, c: usize) -> Image {
        assert!(c < self.channels);
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self
                .data
                .iter()
                .skip(c)
                .step_by(self.channels)
                .copied()
                .collect(),
        }
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub(crate) fn ensure_same_dims(&self, other: &Image, what: &str) -> Result<()> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Applies `f` to every sample, clamping the result into `[0, 1]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    /// Single-channel luma. One-channel images are returned unchanged.
    pub fn to_grayscale(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| luma([p[0], p[1], p[2]]))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub(crate) fn from_raw_unchecked(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Image {
        debug_assert_eq!(data.len(), width * height * channels);
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Luma of one RGB triple, clamped into `[0, 1]`.
#[inline]
pub fn luma(rgb: [f64; 3]) -> f64 {
    (LUMA_WEIGHTS[0] * rgb[0] + LUMA_WEIGHTS[1] * rgb[1] + LUMA_WEIGHTS[2] * rgb[2]).clamp(0.0, 1.0)
}

pub fn to_grayscale(image: &Image) -> Image {
    image.to_grayscale()
}

/// A registered visible (RGB) and infrared (gray) pair of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    visible: Image,
    infrared: Image,
}

impl ImagePair {
    pub fn new(visible: Image, infrared: Image) -> Result<Self> {
        if visible.channels() != 3 {
            return Err(Error::Dimension(format!(
                "visible image must have 3 channels, got {}",
                visible.channels()
            )));
        }
        if infrared.channels() != 1 {
            return Err(Error::Dimension(format!(
                "infrared image must have 1 channel, got {}",
                infrared.channels()
            )));
        }
        visible.ensure_same_dims(&infrared, "visible/infrared pair")?;
        Ok(ImagePair { visible, infrared })
    }

    pub fn visible(&self) -> &Image {
        &self.visible
    }

    pub fn infrared(&self) -> &Image {
        &self.infrared
    }

    pub fn dims(&self) -> (usize, usize) {
        self.visible.dims()
    }

    pub fn into_parts(self) -> (Image, Image) {
        (self.visible, self.infrared)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_of_primaries() {
        let white = Image::filled(1, 1, 3, 1.0);
        assert!((white.to_grayscale().data()[0] - 1.0).abs() < 1e-15);

        let red = Image::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((red.to_grayscale().data()[0] - 0.299).abs() < 1e-15);

        let gray = Image::filled(2, 2, 3, 0.5);
        for v in gray.to_grayscale().data() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn grayscale_passes_single_channel_through() {
        let ir = Image::from_fn(3, 2, 1, |x, y, _| (x + y) as f64 / 4.0);
        assert_eq!(ir.to_grayscale(), ir);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(matches!(
            Image::new(2, 2, 3, vec![0.0; 11]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            Image::new(1, 1, 1, vec![1.5]),
            Err(Error::InvalidValue(_))
        ));
        assert!(Image::new(1, 1, 2, vec![0.0; 2]).is_err());
    }

    #[test]
    fn pair_requires_matching_modalities() {
        let vis = Image::filled(4, 3, 3, 0.2);
        let ir = Image::filled(4, 3, 1, 0.2);
        assert!(ImagePair::new(vis.clone(), ir.clone()).is_ok());
        assert!(ImagePair::new(ir.clone(), ir.clone()).is_err());
        assert!(ImagePair::new(vis, Image::filled(3, 4, 1, 0.0)).is_err());
    }
}
