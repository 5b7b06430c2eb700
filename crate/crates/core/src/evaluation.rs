//! Reporting-time effectiveness metrics, measured against ground truth when
//! it is available.

use crate::error::{Error, Result};
use crate::image::{Image, ImagePair};
use crate::metrics::{
    fusion_table, game, game0_from_counts, miou, recall, ClassMap, Metric, MetricTable,
    PointAnnotations,
};
use crate::targets::{Prediction, Task};

/// Spread of the Gaussian used to turn point annotations into a density map.
pub const GT_DENSITY_SIGMA: f64 = 4.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub points: Option<PointAnnotations>,
    pub labels: Option<ClassMap>,
}

impl GroundTruth {
    pub fn points(points: PointAnnotations) -> Self {
        GroundTruth {
            points: Some(points),
            labels: None,
        }
    }
}

fn class_count(a: &ClassMap, b: &ClassMap) -> usize {
    a.labels()
        .iter()
        .chain(b.labels())
        .max()
        .map_or(1, |&m| m as usize + 1)
}

/// Effectiveness metrics of `prediction`. Counting and segmentation compare
/// with ground truth when present and with the `clean` prediction
/// otherwise; fusion is scored against the clean `sources`.
pub fn task_metrics(
    prediction: &Prediction,
    clean: &Prediction,
    sources: &ImagePair,
    truth: &GroundTruth,
) -> Result<MetricTable> {
    let mut t = MetricTable::new();
    match prediction {
        Prediction::Count { count, density } => {
            match &truth.points {
                Some(points) => {
                    let err = game0_from_counts(*count, points.len() as f64);
                    t.set(Metric::Game0, err).set(Metric::Rmse, err);
                    if let Some(d) = density {
                        for k in 1..=3 {
                            t.set(Metric::game(k), game(d, points, k)?);
                        }
                    }
                }
                None => {
                    let reference = clean.count().ok_or_else(|| mismatch(clean, Task::Counting))?;
                    let err = game0_from_counts(*count, reference);
                    t.set(Metric::Game0, err).set(Metric::Rmse, err);
                }
            }
        }
        Prediction::Segmentation(map) => {
            let reference = match &truth.labels {
                Some(gt) => gt,
                None => clean.class_map().ok_or_else(|| mismatch(clean, Task::Segmentation))?,
            };
            let n = class_count(map, reference);
            t.set(Metric::Miou, miou(map, reference, n)?)
                .set(Metric::Recall, recall(map, reference, n)?);
        }
        Prediction::Fused(fused) => t = fusion_table(sources, fused)?,
    }
    Ok(t)
}

fn mismatch(p: &Prediction, want: Task) -> Error {
    Error::Oracle(format!("expected a {want} prediction, got {}", p.task()))
}

/// The image an anomaly detector inspects for a prediction, together with
/// the reference it is compared to.
pub fn detector_images(
    prediction: &Prediction,
    clean: &Prediction,
    truth: &GroundTruth,
) -> Result<(Image, Image)> {
    match prediction {
        Prediction::Count { density, .. } => {
            let d = density.clone().ok_or_else(|| {
                Error::InvalidValue("MSE detection needs a density map; the model returned only a count".into())
            })?;
            let reference = match &truth.points {
                Some(p) => p.density(d.dims(), GT_DENSITY_SIGMA),
                None => clean.density().cloned().ok_or_else(|| {
                    Error::InvalidValue("no reference density for MSE detection".into())
                })?,
            };
            Ok((d, reference))
        }
        Prediction::Fused(f) => {
            let reference = clean.fused().ok_or_else(|| mismatch(clean, Task::Fusion))?;
            Ok((f.clone(), reference.clone()))
        }
        Prediction::Segmentation(_) => Err(Error::InvalidValue(
            "MSE detection is defined for density maps and fused images".into(),
        )),
    }
}
