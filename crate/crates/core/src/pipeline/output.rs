//! Files written for an attack run, and the composite visualization.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use super::attack::AttackOutcome;
use super::config::AttackConfig;
use crate::defenses::DefenseOutcome;
use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::image::{load_image, load_infrared, load_labels, save_image, save_labels, Image, ImagePair};
use crate::metrics::{format_value, MetricTable, PointAnnotations};

pub const CLEAN_VISIBLE: &str = "clean_vis.png";
pub const CLEAN_INFRARED: &str = "clean_ir.png";
pub const ADV_VISIBLE: &str = "adv_vis.png";
pub const ADV_INFRARED: &str = "adv_ir.png";
pub const GENOME: &str = "genome.txt";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const METRICS: &str = "metrics.csv";
pub const COMPOSITE: &str = "composite.png";
pub const CONFIG: &str = "config.txt";
pub const RESULT: &str = "result.json";
pub const POINTS: &str = "points.txt";
pub const LABELS: &str = "labels.png";

pub fn metrics_header() -> String {
    format!(
        "condition,defense,parameter,{},detector_mse,flagged",
        MetricTable::csv_header()
    )
}

fn metrics_row(condition: &str, defense: &str, parameter: &str, t: &MetricTable, detection: Option<(f64, bool)>) -> String {
    let (mse, flagged) = match detection {
        Some((m, f)) => (format_value(m), f.to_string()),
        None => (String::new(), String::new()),
    };
    format!("{condition},{defense},{parameter},{},{mse},{flagged}", t.csv_fields())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes every artifact of one attack into `dir`.
pub fn write_attack(
    dir: &Path,
    config: &AttackConfig,
    clean: &ImagePair,
    truth: &GroundTruth,
    outcome: &AttackOutcome,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_image(clean.visible(), dir.join(CLEAN_VISIBLE))?;
    save_image(clean.infrared(), dir.join(CLEAN_INFRARED))?;
    save_image(outcome.adversarial.visible(), dir.join(ADV_VISIBLE))?;
    save_image(outcome.adversarial.infrared(), dir.join(ADV_INFRARED))?;
    save_image(&composite(clean, &outcome.adversarial)?, dir.join(COMPOSITE))?;
    write(&dir.join(GENOME), format!("{}\n", outcome.genome))?;
    write(&dir.join(TRAJECTORY), outcome.trajectory.to_csv())?;
    write(&dir.join(CONFIG), config.to_text())?;
    if let Some(p) = &truth.points {
        write(&dir.join(POINTS), p.to_text())?;
    }
    if let Some(l) = &truth.labels {
        save_labels(l, dir.join(LABELS))?;
    }
    let csv = format!(
        "{}\n{}\n{}\n",
        metrics_header(),
        metrics_row("clean", "none", "", &outcome.clean_metrics, None),
        metrics_row("adversarial", "none", "", &outcome.adversarial_metrics, None)
    );
    write(&dir.join(METRICS), csv)?;
    let result = json!({
        "genome": outcome.genome.to_string(),
        "fitness": outcome.report,
        "stop_reason": outcome.stop_reason,
        "early_stop_generation": outcome.early_stop_generation,
        "evaluations": outcome.evaluations,
        "duration_s": outcome.duration.as_secs_f64(),
        "clean": outcome.clean_metrics,
        "adversarial": outcome.adversarial_metrics,
        "files": {
            "clean_visible": CLEAN_VISIBLE,
            "clean_infrared": CLEAN_INFRARED,
            "adversarial_visible": ADV_VISIBLE,
            "adversarial_infrared": ADV_INFRARED,
        },
    });
    write(&dir.join(RESULT), serde_json::to_string_pretty(&result).expect("json") + "\n")
}

/// A stored attack, reloaded from its output directory.
pub struct StoredAttack {
    pub config: AttackConfig,
    pub clean: ImagePair,
    pub adversarial: ImagePair,
    pub truth: GroundTruth,
}

pub fn load_attack(dir: &Path) -> Result<StoredAttack> {
    let config = AttackConfig::load(&dir.join(CONFIG))?;
    let clean = ImagePair::new(load_image(dir.join(CLEAN_VISIBLE))?, load_infrared(dir.join(CLEAN_INFRARED))?)?;
    let adversarial = ImagePair::new(load_image(dir.join(ADV_VISIBLE))?, load_infrared(dir.join(ADV_INFRARED))?)?;
    let points_path = dir.join(POINTS);
    let points = if points_path.exists() {
        let text = fs::read_to_string(&points_path).map_err(|e| Error::io(&points_path, e))?;
        Some(PointAnnotations::parse(&text, clean.dims())?)
    } else {
        None
    };
    let labels_path = dir.join(LABELS);
    let labels = labels_path.exists().then(|| load_labels(&labels_path)).transpose()?;
    Ok(StoredAttack {
        config,
        clean,
        adversarial,
        truth: GroundTruth { points, labels },
    })
}

/// Appends defense rows to the metrics CSV in `dir`.
pub fn append_defense_rows(dir: &Path, outcomes: &[DefenseOutcome]) -> Result<()> {
    let path = dir.join(METRICS);
    let mut text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    for o in outcomes {
        let (kind, param) = (o.defense.kind(), o.defense.parameter());
        let det = |d: Option<crate::defenses::Detection>| d.map(|d| (d.mse, d.flagged));
        let _ = writeln!(text, "{}", metrics_row("clean", kind, &param, &o.clean, det(o.clean_detection)));
        let _ = writeln!(
            text,
            "{}",
            metrics_row("adversarial", kind, &param, &o.adversarial, det(o.adversarial_detection))
        );
    }
    write(&path, text)
}

fn heat(v: f64) -> [f64; 3] {
    // black -> red -> yellow -> white
    let v = v.clamp(0.0, 1.0) * 3.0;
    [v.min(1.0), (v - 1.0).clamp(0.0, 1.0), (v - 2.0).clamp(0.0, 1.0)]
}

fn difference_heat(a: &Image, b: &Image) -> Vec<[f64; 3]> {
    let ch = a.channels();
    let d: Vec<f64> = a
        .data()
        .chunks(ch)
        .zip(b.data().chunks(ch))
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    d.into_iter()
        .map(|v| heat(if max > 0.0 { v / max } else { 0.0 }))
        .collect()
}

/// Two rows (visible, infrared) of three panels: clean, adversarial, and the
/// per-pixel difference scaled to the image maximum.
pub fn composite(clean: &ImagePair, adversarial: &ImagePair) -> Result<Image> {
    let (w, h) = clean.dims();
    let mut data = vec![0.0; 3 * w * 2 * h * 3];
    let rgb = |img: &Image, i: usize| -> [f64; 3] {
        let p = img.pixel(i);
        if p.len() == 3 {
            [p[0], p[1], p[2]]
        } else {
            [p[0]; 3]
        }
    };
    let rows = [
        (clean.visible(), adversarial.visible()),
        (clean.infrared(), adversarial.infrared()),
    ];
    for (row, (c, a)) in rows.iter().enumerate() {
        let diff = difference_heat(c, a);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let panels = [rgb(c, i), rgb(a, i), diff[i]];
                for (p, px) in panels.iter().enumerate() {
                    let o = ((row * h + y) * 3 * w + p * w + x) * 3;
                    data[o..o + 3].copy_from_slice(px);
                }
            }
        }
    }
    Image::new(3 * w, 2 * h, 3, data)
}
