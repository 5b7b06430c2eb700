use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::attack::{run_attack, AttackOutcome};
use super::config::AttackConfig;
use super::output::write_attack;
use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::image::{load_image, load_infrared, load_labels, ImagePair};
use crate::metrics::{format_value, Metric, MetricTable, PointAnnotations};
use crate::targets::{TargetModel, TargetSpec};

pub const BATCH_CSV: &str = "batch.csv";
pub const SUMMARY_CSV: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchItem {
    pub name: String,
    pub visible: PathBuf,
    pub infrared: PathBuf,
    pub points: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

/// Finds `<name>_vis.png` / `<name>_ir.png` pairs (with optional
/// `<name>_points.txt` and `<name>_labels.png`) in `dir`, sorted by name.
pub fn discover(dir: &Path) -> Result<Vec<BatchItem>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut items = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(file) = path.file_name().and_then(|f| f.to_str()) else {
            continue;
        };
        let Some(name) = file.strip_suffix("_vis.png") else {
            continue;
        };
        let infrared = dir.join(format!("{name}_ir.png"));
        if !infrared.exists() {
            log::warn!("skipping {file}: no matching {name}_ir.png");
            continue;
        }
        let points = dir.join(format!("{name}_points.txt"));
        let labels = dir.join(format!("{name}_labels.png"));
        items.push(BatchItem {
            name: name.to_string(),
            visible: path.clone(),
            infrared,
            points: points.exists().then_some(points),
            labels: labels.exists().then_some(labels),
        });
    }
    items.sort_by(|a, b| a.name.cmp(&b.name));
    if items.is_empty() {
        return Err(Error::Config(format!("no image pairs found in {}", dir.display())));
    }
    Ok(items)
}

/// Deterministic sample without replacement, returned in name order.
pub fn sample_items<T: Clone>(items: &[T], n: Option<usize>, seed: u64, name: impl Fn(&T) -> &str) -> Vec<T> {
    let mut chosen: Vec<T> = match n {
        Some(n) if n < items.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            items.choose_multiple(&mut rng, n).cloned().collect()
        }
        _ => items.to_vec(),
    };
    chosen.sort_by(|a, b| name(a).cmp(name(b)));
    chosen
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedItem {
    pub name: String,
    pub pair: ImagePair,
    pub truth: GroundTruth,
}

pub fn load_item(item: &BatchItem) -> Result<LoadedItem> {
    let pair = ImagePair::new(load_image(&item.visible)?, load_infrared(&item.infrared)?)?;
    let points = match &item.points {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(PointAnnotations::parse(&text, pair.dims())?)
        }
        None => None,
    };
    let labels = item.labels.as_ref().map(load_labels).transpose()?;
    if let Some(l) = &labels {
        if l.dims() != pair.dims() {
            return Err(Error::Dimension(format!("{}: label map size differs from images", item.name)));
        }
    }
    Ok(LoadedItem {
        name: item.name.clone(),
        pair,
        truth: GroundTruth { points, labels },
    })
}

/// Per-item seed: depends only on the base seed and the item name, so results
/// do not change with sampling or scheduling.
pub fn item_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    seed ^ h
}

#[derive(Debug, Clone)]
pub struct BatchRow {
    pub name: String,
    pub outcome: AttackOutcome,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub rows: Vec<BatchRow>,
}

fn e_s_j(t: &AttackOutcome) -> [f64; 3] {
    [t.report.e_term, t.report.s_term, t.report.j]
}

impl BatchReport {
    pub fn adversarial_tables(&self) -> Vec<MetricTable> {
        self.rows.iter().map(|r| r.outcome.adversarial_metrics.clone()).collect()
    }

    /// Mean and sample standard deviation of every adversarial metric. The
    /// RMSE entry of the mean is the root mean square of per-item errors.
    pub fn aggregate(&self) -> (MetricTable, MetricTable) {
        let tables = self.adversarial_tables();
        let (mut mean, mut std) = MetricTable::aggregate(&tables);
        let errs: Vec<f64> = tables.iter().filter_map(|t| t.get(Metric::Rmse)).collect();
        if !errs.is_empty() {
            let ms = errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
            mean.set(Metric::Rmse, ms.sqrt());
            std = std.with(Metric::Rmse, f64::NAN);
        }
        (mean, std)
    }

    /// Mean and sample standard deviation of `E`, `S` and `J`.
    pub fn fitness_stats(&self) -> ([f64; 3], [f64; 3]) {
        let n = self.rows.len() as f64;
        let mut mean = [0.0; 3];
        for r in &self.rows {
            for (m, v) in mean.iter_mut().zip(e_s_j(&r.outcome)) {
                *m += v / n;
            }
        }
        let mut std = [0.0; 3];
        if self.rows.len() > 1 {
            for r in &self.rows {
                for ((s, m), v) in std.iter_mut().zip(mean).zip(e_s_j(&r.outcome)) {
                    *s += (v - m) * (v - m) / (n - 1.0);
                }
            }
        }
        (mean, std.map(f64::sqrt))
    }

    pub fn mean_of(&self, metric: Metric) -> Option<f64> {
        self.aggregate().0.get(metric)
    }

    pub fn batch_csv(&self) -> String {
        let mut s = format!("name,x,y,r,e_term,s_term,j,{}\n", MetricTable::csv_header());
        for r in &self.rows {
            let g = &r.outcome.genome;
            let [e, st, j] = e_s_j(&r.outcome);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.name,
                g.x,
                g.y,
                g.r,
                format_value(e),
                format_value(st),
                format_value(j),
                r.outcome.adversarial_metrics.csv_fields()
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let (mean, std) = self.aggregate();
        let (fm, fs) = self.fitness_stats();
        let mut s = format!("statistic,items,e_term,s_term,j,{}\n", MetricTable::csv_header());
        for (label, f, t) in [("mean", fm, &mean), ("std", fs, &std)] {
            let _ = writeln!(
                s,
                "{label},{},{},{},{},{}",
                self.rows.len(),
                format_value(f[0]),
                format_value(f[1]),
                format_value(f[2]),
                t.csv_fields()
            );
        }
        s
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// Attacks every item. Surrogate models are built per item; a remote model
/// is connected once and shared.
pub fn run_items(config: &AttackConfig, items: &[LoadedItem]) -> Result<BatchReport> {
    config.validate()?;
    let shared: Option<Box<dyn TargetModel>> = match &config.target {
        TargetSpec::Remote(_) => Some(config.target.build(config.task)?),
        TargetSpec::Surrogate => None,
    };
    let attack_one = |item: &LoadedItem| -> Result<BatchRow> {
        let mut c = config.clone();
        c.seed = item_seed(config.seed, &item.name);
        let own;
        let model: &dyn TargetModel = match &shared {
            Some(m) => m.as_ref(),
            None => {
                own = c.target.build(c.task)?;
                own.as_ref()
            }
        };
        let outcome = run_attack(&c, &item.pair, &item.truth, model)?;
        log::info!("{}: E = {}", item.name, outcome.report.e_term);
        Ok(BatchRow {
            name: item.name.clone(),
            outcome,
        })
    };
    let rows = pool(config.workers)?.install(|| {
        items.par_iter().map(attack_one).collect::<Result<Vec<_>>>()
    })?;
    Ok(BatchReport { rows })
}

/// Loads, samples and attacks the pairs in `dir`, writing per-item
/// artifacts and the batch and summary CSVs under `config.out`.
pub fn run_batch(config: &AttackConfig, dir: &Path) -> Result<BatchReport> {
    let items = sample_items(&discover(dir)?, config.sample, config.seed, |i| &i.name);
    let loaded = items.iter().map(load_item).collect::<Result<Vec<_>>>()?;
    let report = run_items(config, &loaded)?;
    write_batch(config, &loaded, &report)?;
    Ok(report)
}

pub fn write_batch(config: &AttackConfig, items: &[LoadedItem], report: &BatchReport) -> Result<()> {
    let out = &config.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for (item, row) in items.iter().zip(&report.rows) {
        let mut c = config.clone();
        c.seed = item_seed(config.seed, &item.name);
        c.out = out.join(&item.name);
        write_attack(&c.out, &c, &item.pair, &item.truth, &row.outcome)?;
    }
    let write = |name: &str, text: String| {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write(BATCH_CSV, report.batch_csv())?;
    write(SUMMARY_CSV, report.summary_csv())?;
    write("config.txt", config.to_text())
}
