//! Input-transformation defenses and an output anomaly detector.

mod detect;
mod jpeg;
mod median;

pub use detect::{calibrate_threshold, mse_detect, percentile};
pub use jpeg::{jpeg_compress, quantization_table};
pub use median::median_filter;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{detector_images, task_metrics, GroundTruth};
use crate::image::{Image, ImagePair};
use crate::metrics::MetricTable;
use crate::targets::TargetModel;

pub const DEFAULT_JPEG_QUALITY: u8 = 75;
pub const DEFAULT_MEDIAN_KERNEL: usize = 3;
/// Clean-error percentile used to place the detector threshold.
pub const DETECTOR_PERCENTILE: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defense {
    PassThrough,
    Jpeg { quality: u8 },
    Median { kernel: usize },
    MseDetector { threshold: f64 },
}

impl Defense {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Defense::Jpeg { quality } if !(1..=100).contains(&quality) => {
                Err(Error::Config(format!("JPEG quality {quality} outside 1..=100")))
            }
            Defense::Median { kernel } if kernel < 3 || kernel % 2 == 0 => Err(Error::Config(
                format!("median kernel must be odd and >= 3, got {kernel}"),
            )),
            Defense::MseDetector { threshold } if !(threshold >= 0.0) => {
                Err(Error::Config(format!("bad detector threshold {threshold}")))
            }
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Defense::PassThrough => "none",
            Defense::Jpeg { .. } => "jpeg",
            Defense::Median { .. } => "median",
            Defense::MseDetector { .. } => "mse_detector",
        }
    }

    pub fn parameter(&self) -> String {
        match self {
            Defense::PassThrough => String::new(),
            Defense::Jpeg { quality } => quality.to_string(),
            Defense::Median { kernel } => kernel.to_string(),
            Defense::MseDetector { threshold } => format!("{threshold:e}"),
        }
    }

    /// Input transformation; the detector and pass-through leave images as
    /// they are.
    pub fn transform(&self, image: &Image) -> Result<Image> {
        match *self {
            Defense::Jpeg { quality } => jpeg_compress(image, quality),
            Defense::Median { kernel } => median_filter(image, kernel),
            Defense::PassThrough | Defense::MseDetector { .. } => Ok(image.clone()),
        }
    }

    /// Applies the transformation to both modalities.
    pub fn apply_pair(&self, pair: &ImagePair) -> Result<ImagePair> {
        ImagePair::new(self.transform(pair.visible())?, self.transform(pair.infrared())?)
    }
}

impl fmt::Display for Defense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defense::PassThrough => f.write_str("none"),
            _ => write!(f, "{}:{}", self.kind(), self.parameter()),
        }
    }
}

impl FromStr for Defense {
    type Err = Error;

    /// `none`, `jpeg[:Q]`, `median[:K]` or `mse:THETA`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let bad = |what: &str| Error::Config(format!("bad {what} in defense '{s}'"));
        let d = match (kind, arg) {
            ("none", None) => Defense::PassThrough,
            ("jpeg", a) => Defense::Jpeg {
                quality: a.map_or(Ok(DEFAULT_JPEG_QUALITY), |a| a.parse().map_err(|_| bad("quality")))?,
            },
            ("median", a) => Defense::Median {
                kernel: a.map_or(Ok(DEFAULT_MEDIAN_KERNEL), |a| a.parse().map_err(|_| bad("kernel")))?,
            },
            ("mse" | "mse_detector", Some(a)) => Defense::MseDetector {
                threshold: a.parse().map_err(|_| bad("threshold"))?,
            },
            _ => return Err(Error::Config(format!("unknown defense '{s}'"))),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub flagged: bool,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenseOutcome {
    pub defense: Defense,
    /// Effectiveness metrics of the defended clean pair.
    pub clean: MetricTable,
    /// Effectiveness metrics of the defended adversarial pair.
    pub adversarial: MetricTable,
    pub clean_detection: Option<Detection>,
    pub adversarial_detection: Option<Detection>,
}

/// Re-evaluates an attack with `defense` in front of (or, for the detector,
/// behind) the model.
pub fn attack_under_defense(
    defense: &Defense,
    clean: &ImagePair,
    adversarial: &ImagePair,
    model: &dyn TargetModel,
    truth: &GroundTruth,
) -> Result<DefenseOutcome> {
    defense.validate()?;
    let reference = model.predict(clean)?;
    let clean_in = defense.apply_pair(clean)?;
    let adv_in = defense.apply_pair(adversarial)?;
    let clean_pred = model.predict(&clean_in)?;
    let adv_pred = model.predict(&adv_in)?;
    let clean_table = task_metrics(&clean_pred, &reference, clean, truth)?;
    let adv_table = task_metrics(&adv_pred, &reference, clean, truth)?;

    let (clean_detection, adversarial_detection) = match *defense {
        Defense::MseDetector { threshold } => {
            let detect = |pred| -> Result<Detection> {
                let (img, reference_img) = detector_images(pred, &reference, truth)?;
                let (flagged, mse) = mse_detect(&img, &reference_img, threshold)?;
                Ok(Detection { flagged, mse })
            };
            (Some(detect(&clean_pred)?), Some(detect(&adv_pred)?))
        }
        _ => (None, None),
    };
    Ok(DefenseOutcome {
        defense: *defense,
        clean: clean_table,
        adversarial: adv_table,
        clean_detection,
        adversarial_detection,
    })
}

/// Detector error of one pair's prediction against its reference.
pub fn detector_error(pair: &ImagePair, model: &dyn TargetModel, truth: &GroundTruth) -> Result<f64> {
    let p = model.predict(pair)?;
    let (img, reference) = detector_images(&p, &p, truth)?;
    crate::metrics::mse(&img, &reference)
}
