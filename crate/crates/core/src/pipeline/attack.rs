use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Ablation, AttackConfig};
use crate::de::{self, StopReason, Trajectory};
use crate::error::Result;
use crate::evaluation::{task_metrics, GroundTruth};
use crate::fitness::{FitnessConfig, FitnessReport, PatchFitness};
use crate::image::ImagePair;
use crate::metrics::{MetricTable, Stealth};
use crate::patch::{ColorMode, Modality, ParamLayout, PatchGenome, RadiusMode, Rgb};
use crate::targets::TargetModel;

/// Stream offsets so the frozen colors and the random genome do not share
/// draws with the search itself.
const FROZEN_COLOR_STREAM: u64 = 0x636f6c6f72;
const RANDOM_GENOME_STREAM: u64 = 0x72616e646f6d;

#[derive(Debug, Clone, Serialize)]
pub struct AttackOutcome {
    pub genome: PatchGenome,
    #[serde(skip)]
    pub adversarial: ImagePair,
    pub report: FitnessReport,
    pub trajectory: Trajectory,
    pub clean_metrics: MetricTable,
    pub adversarial_metrics: MetricTable,
    pub stop_reason: Option<StopReason>,
    /// Generation at which the search ended, when it ended early.
    pub early_stop_generation: Option<usize>,
    pub evaluations: usize,
    #[serde(serialize_with = "as_seconds")]
    pub duration: Duration,
}

fn as_seconds<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_colors(n: usize, rng: &mut impl Rng) -> Vec<Rgb> {
    (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()
}

pub fn layout_for(config: &AttackConfig) -> Result<ParamLayout> {
    let colors = match config.ablation {
        Ablation::PositionOnly => {
            ColorMode::Frozen(random_colors(config.colors(), &mut rng_for(config.seed, FROZEN_COLOR_STREAM)))
        }
        _ => ColorMode::Searched(config.colors()),
    };
    let radius = match config.radius_range {
        Some((min, max)) => RadiusMode::Searched { min, max },
        None => RadiusMode::Fixed(config.radius()),
    };
    ParamLayout::new(radius, colors)
}

pub fn fitness_config(config: &AttackConfig, truth: &GroundTruth) -> FitnessConfig {
    let mut f = FitnessConfig::new(config.task);
    f.alpha = config.alpha;
    f.compression = config.compression;
    f.modality = match config.ablation {
        Ablation::VisibleOnly => Modality::VisibleOnly,
        Ablation::InfraredOnly => Modality::InfraredOnly,
        _ => Modality::Both,
    };
    if config.gt_reference {
        f.segmentation_reference = truth.labels.clone();
    }
    f
}

/// Searches for the best patch on one pair (or samples one, for the random
/// baseline) and measures the result.
pub fn run_attack(
    config: &AttackConfig,
    pair: &ImagePair,
    truth: &GroundTruth,
    model: &dyn TargetModel,
) -> Result<AttackOutcome> {
    config.validate()?;
    let started = Instant::now();
    let dims = pair.dims();
    let layout = layout_for(config)?;
    let bounds = layout.bounds(dims)?;
    let fitness = PatchFitness::new(pair, model, layout.clone(), fitness_config(config, truth))?;

    let (genome, trajectory, stop_reason, early_stop_generation, evaluations) =
        if config.ablation == Ablation::Random {
            let mut rng = rng_for(config.seed, RANDOM_GENOME_STREAM);
            let v: Vec<f64> = bounds.iter().map(|&(lo, hi)| lo + rng.gen::<f64>() * (hi - lo)).collect();
            (layout.decode(&v, dims)?, Trajectory::default(), None, None, 1)
        } else {
            let run = de::run(&config.de_config(bounds), &fitness, None)?;
            let early = (run.stop_reason != StopReason::MaxGenerations).then_some(run.stop_generation);
            (
                layout.decode(&run.best_vector, dims)?,
                run.trajectory,
                Some(run.stop_reason),
                early,
                run.evaluations,
            )
        };

    let report = fitness.report(&genome)?;
    let adversarial = fitness.adversarial_pair(&genome)?;
    let clean_pred = fitness.clean_prediction();
    let adv_pred = model.predict(&adversarial)?;

    let mut clean_metrics = task_metrics(clean_pred, clean_pred, pair, truth)?;
    Stealth::measure(pair, pair)?.record(&mut clean_metrics);
    let mut adversarial_metrics = task_metrics(&adv_pred, clean_pred, pair, truth)?;
    Stealth::measure(pair, &adversarial)?.record(&mut adversarial_metrics);

    Ok(AttackOutcome {
        genome,
        adversarial,
        report,
        trajectory,
        clean_metrics,
        adversarial_metrics,
        stop_reason,
        early_stop_generation,
        evaluations,
        duration: started.elapsed(),
    })
}
