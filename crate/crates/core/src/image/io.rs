use std::path::Path;

use image::{ColorType, DynamicImage, GrayImage, ImageFormat, ImageReader, RgbImage};

use super::Image;
use crate::error::{Error, Result};
use crate::metrics::ClassMap;

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub(crate) fn from_u8(v: u8) -> f64 {
    v as f64 / 255.0
}

/// Loads an 8-bit grayscale or RGB PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes).map_err(|reason| format_error(path, reason))
}

/// Loads an infrared image. Three-channel files are collapsed to luma with a
/// warning.
pub fn load_infrared(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let image = load_image(path)?;
    if image.channels() == 3 {
        log::warn!(
            "{}: infrared image has 3 channels; collapsing to grayscale",
            path.display()
        );
        return Ok(image.to_grayscale());
    }
    Ok(image)
}

/// Loads a class map stored as an 8-bit grayscale PNG whose pixel values are
/// class ids.
pub fn load_labels(path: impl AsRef<Path>) -> Result<ClassMap> {
    let path = path.as_ref();
    let image = load_image(path)?;
    if image.channels() != 1 {
        return Err(format_error(path, "label map must be single-channel"));
    }
    let labels = image.data().iter().map(|&v| to_u8(v)).collect();
    ClassMap::new(image.width(), image.height(), labels)
}

pub fn save_labels(map: &ClassMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = map.dims();
    let gray = GrayImage::from_raw(w as u32, h as u32, map.labels().to_vec()).expect("label buffer");
    gray.save_with_format(path, ImageFormat::Png)
        .map_err(|e| format_error(path, e.to_string()))
}

pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(image);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn decode_png(bytes: &[u8]) -> std::result::Result<Image, String> {
    let reader = ImageReader::with_format(std::io::Cursor::new(bytes), ImageFormat::Png);
    let decoded = reader.decode().map_err(|e| e.to_string())?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded.color() {
        ColorType::L8 => {
            let data = decoded.into_luma8().into_raw();
            Ok(Image::from_raw_unchecked(
                w,
                h,
                1,
                data.into_iter().map(from_u8).collect(),
            ))
        }
        ColorType::Rgb8 => {
            let data = decoded.into_rgb8().into_raw();
            Ok(Image::from_raw_unchecked(
                w,
                h,
                3,
                data.into_iter().map(from_u8).collect(),
            ))
        }
        other => Err(format!(
            "expected 8-bit grayscale or RGB, found {other:?}"
        )),
    }
}

pub(crate) fn encode_png(image: &Image) -> Vec<u8> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let raw: Vec<u8> = image.data().iter().map(|&v| to_u8(v)).collect();
    let dynamic = match image.channels() {
        1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, raw).expect("buffer size")),
        _ => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, raw).expect("buffer size")),
    };
    let mut out = std::io::Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out.into_inner()
}
