//! Task fitness `J = alpha * E + (1 - alpha) * S`, maximized by the search.
//!
//! `E` measures how far the model's prediction on the patched pair moves
//! from its prediction on the clean pair; `S` rewards similarity of the
//! patched pair to the clean one. Fusion has no `S` term.

use serde::Serialize;

use crate::de::Objective;
use crate::error::{Error, Result};
use crate::image::{Image, ImagePair};
use crate::metrics::{
    fusion_losses, fusion_ssim, fusion_table, miou, recall, ClassMap, Metric, MetricTable, Stealth,
};
use crate::patch::{apply_to, CompressionParams, Modality, ParamLayout, PatchGenome};
use crate::targets::{Prediction, TargetModel, Task};

pub const STEALTH_PSNR_WEIGHT: f64 = 1.0;
pub const STEALTH_SSIM_WEIGHT: f64 = 20.0;
pub const FUSION_INTENSITY_WEIGHT: f64 = 20.0;
pub const FUSION_GRADIENT_WEIGHT: f64 = 20.0;
pub const FUSION_SSIM_WEIGHT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessConfig {
    pub task: Task,
    pub alpha: f64,
    pub compression: CompressionParams,
    pub modality: Modality,
    /// Ground-truth class map; when set, segmentation effectiveness is
    /// measured against it instead of the clean prediction.
    pub segmentation_reference: Option<ClassMap>,
}

impl FitnessConfig {
    pub fn new(task: Task) -> Self {
        FitnessConfig {
            task,
            alpha: 1.0,
            compression: CompressionParams::default(),
            modality: Modality::Both,
            segmentation_reference: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }

    /// The alpha actually used: fusion has no stealth term and always uses 1.
    pub fn effective_alpha(&self) -> f64 {
        match self.task {
            Task::Fusion => 1.0,
            _ => self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitnessReport {
    pub e_term: f64,
    pub s_term: f64,
    pub alpha: f64,
    pub j: f64,
    pub metrics: MetricTable,
}

pub fn combine(alpha: f64, e: f64, s: f64) -> f64 {
    alpha * e + (1.0 - alpha) * s
}

pub fn stealth_term(s: &Stealth) -> f64 {
    STEALTH_PSNR_WEIGHT * (s.psnr_vis + s.psnr_inf) + STEALTH_SSIM_WEIGHT * (s.ssim_vis + s.ssim_inf)
}

pub fn counting_effectiveness(clean_count: f64, adversarial_count: f64) -> f64 {
    (adversarial_count - clean_count).abs()
}

fn num_classes(a: &ClassMap, b: &ClassMap) -> usize {
    a.labels()
        .iter()
        .chain(b.labels())
        .copied()
        .max()
        .map_or(1, |m| m as usize + 1)
}

/// `100 - 100 * mIoU(prediction, reference)`.
pub fn segmentation_effectiveness(prediction: &ClassMap, reference: &ClassMap) -> Result<f64> {
    let n = num_classes(prediction, reference);
    Ok(100.0 - 100.0 * miou(prediction, reference, n)?)
}

/// Weighted intensity loss, gradient loss and SSIM deficit of `fused`
/// against the sources.
pub fn fusion_effectiveness(visible: &Image, infrared: &Image, fused: &Image) -> Result<f64> {
    let (l_inten, l_grad) = fusion_losses(visible, infrared, fused)?;
    let s = fusion_ssim(visible, infrared, fused)?;
    Ok(FUSION_INTENSITY_WEIGHT * l_inten
        + FUSION_GRADIENT_WEIGHT * l_grad
        + FUSION_SSIM_WEIGHT * (1.0 - s))
}

/// Fitness of patches on one image pair against one model. The clean
/// prediction is computed once at construction.
pub struct PatchFitness<'a> {
    pair: &'a ImagePair,
    model: &'a dyn TargetModel,
    layout: ParamLayout,
    config: FitnessConfig,
    clean: Prediction,
}

impl<'a> PatchFitness<'a> {
    pub fn new(
        pair: &'a ImagePair,
        model: &'a dyn TargetModel,
        layout: ParamLayout,
        config: FitnessConfig,
    ) -> Result<Self> {
        config.validate()?;
        if model.task() != config.task {
            return Err(Error::Config(format!(
                "fitness for {} given a {} model",
                config.task,
                model.task()
            )));
        }
        if config.task == Task::Fusion && config.alpha != 1.0 {
            log::warn!("alpha {} ignored for fusion; using 1", config.alpha);
        }
        if let Some(r) = &config.segmentation_reference {
            if r.dims() != pair.dims() {
                return Err(Error::Dimension("reference class map size differs from the pair".into()));
            }
        }
        let clean = model.predict(pair)?.expect(config.task)?;
        Ok(PatchFitness {
            pair,
            model,
            layout,
            config,
            clean,
        })
    }

    pub fn clean_prediction(&self) -> &Prediction {
        &self.clean
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn config(&self) -> &FitnessConfig {
        &self.config
    }

    pub fn pair(&self) -> &ImagePair {
        self.pair
    }

    pub fn adversarial_pair(&self, genome: &PatchGenome) -> Result<ImagePair> {
        apply_to(genome, self.pair, self.config.compression, self.config.modality)
    }

    fn effectiveness(&self, prediction: &Prediction, table: &mut MetricTable) -> Result<f64> {
        match (self.config.task, prediction) {
            (Task::Counting, Prediction::Count { count, .. }) => {
                let clean = self.clean.count().expect("clean counting prediction");
                Ok(counting_effectiveness(clean, *count))
            }
            (Task::Segmentation, Prediction::Segmentation(map)) => {
                let reference = match &self.config.segmentation_reference {
                    Some(gt) => gt,
                    None => self.clean.class_map().expect("clean segmentation prediction"),
                };
                let n = num_classes(map, reference);
                table
                    .set(Metric::Miou, miou(map, reference, n)?)
                    .set(Metric::Recall, recall(map, reference, n)?);
                segmentation_effectiveness(map, reference)
            }
            (Task::Fusion, Prediction::Fused(fused)) => {
                fusion_effectiveness(self.pair.visible(), self.pair.infrared(), fused)
            }
            (task, p) => Err(Error::Oracle(format!(
                "expected a {task} prediction, model returned {}",
                p.task()
            ))),
        }
    }

    /// Full breakdown for one genome.
    pub fn report(&self, genome: &PatchGenome) -> Result<FitnessReport> {
        let adversarial = self.adversarial_pair(genome)?;
        let prediction = self.model.predict(&adversarial)?;
        let mut metrics = MetricTable::new();
        let e_term = self.effectiveness(&prediction, &mut metrics)?;
        let stealth = Stealth::measure(self.pair, &adversarial)?;
        stealth.record(&mut metrics);
        if let Prediction::Fused(fused) = &prediction {
            for (m, v) in fusion_table(self.pair, fused)?.iter() {
                if let Some(v) = v {
                    metrics.set(m, v);
                }
            }
        }
        let s_term = match self.config.task {
            Task::Fusion => 0.0,
            _ => stealth_term(&stealth),
        };
        let alpha = self.config.effective_alpha();
        Ok(FitnessReport {
            e_term,
            s_term,
            alpha,
            j: combine(alpha, e_term, s_term),
            metrics,
        })
    }

    /// `J` alone; skips the stealth measurement when it carries no weight.
    pub fn score(&self, genome: &PatchGenome) -> Result<f64> {
        let alpha = self.config.effective_alpha();
        if alpha < 1.0 {
            return Ok(self.report(genome)?.j);
        }
        let adversarial = self.adversarial_pair(genome)?;
        let prediction = self.model.predict(&adversarial)?;
        let e = self.effectiveness(&prediction, &mut MetricTable::new())?;
        Ok(combine(1.0, e, 0.0))
    }

    pub fn decode(&self, vector: &[f64]) -> Result<PatchGenome> {
        self.layout.decode(vector, self.pair.dims())
    }
}

impl Objective for PatchFitness<'_> {
    fn evaluate(&self, vector: &[f64]) -> Result<f64> {
        self.score(&self.decode(vector)?)
    }

    fn max_concurrency(&self) -> Option<usize> {
        self.model.max_in_flight()
    }
}

/// One-off fitness evaluation without caching the clean prediction.
pub fn evaluate_genome(
    genome: &PatchGenome,
    pair: &ImagePair,
    model: &dyn TargetModel,
    config: &FitnessConfig,
) -> Result<FitnessReport> {
    let layout = ParamLayout::fixed(genome.r, genome.colors.len())?;
    PatchFitness::new(pair, model, layout, config.clone())?.report(genome)
}
