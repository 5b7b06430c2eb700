use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::de::DeConfig;
use crate::error::{Error, Result};
use crate::patch::CompressionParams;
use crate::targets::{RemoteEndpoint, TargetSpec, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Position and colors evolved jointly.
    Full,
    /// One random color list, frozen; only the center is evolved.
    PositionOnly,
    /// A single random genome, no search.
    Random,
    VisibleOnly,
    InfraredOnly,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::PositionOnly => "position_only",
            Ablation::Random => "random",
            Ablation::VisibleOnly => "visible_only",
            Ablation::InfraredOnly => "infrared_only",
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Ablation::Full,
            Ablation::PositionOnly,
            Ablation::Random,
            Ablation::VisibleOnly,
            Ablation::InfraredOnly,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown ablation '{s}'")))
    }
}

/// Everything that determines an attack run. `radius` and `colors` fall back
/// to per-task defaults when unset.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub task: Task,
    pub target: TargetSpec,
    pub radius: Option<usize>,
    /// When set, the radius joins the search vector within `[min, max]` and
    /// `radius` is ignored.
    pub radius_range: Option<(usize, usize)>,
    pub colors: Option<usize>,
    pub alpha: f64,
    pub population: usize,
    pub scale_factor: f64,
    pub crossover_rate: f64,
    pub generations: usize,
    pub patience: usize,
    pub ablation: Ablation,
    pub compression: CompressionParams,
    pub seed: u64,
    /// Score segmentation against supplied ground-truth maps instead of the
    /// clean prediction.
    pub gt_reference: bool,
    pub workers: Option<usize>,
    pub sample: Option<usize>,
    pub out: PathBuf,
}

impl AttackConfig {
    pub fn new(task: Task) -> Self {
        let de = DeConfig::new(Vec::new());
        AttackConfig {
            task,
            target: TargetSpec::Surrogate,
            radius: None,
            radius_range: None,
            colors: None,
            alpha: 1.0,
            population: de.population_size,
            scale_factor: de.scale_factor,
            crossover_rate: de.crossover_rate,
            generations: de.max_generations,
            patience: de.stagnation_patience,
            ablation: Ablation::Full,
            compression: CompressionParams::default(),
            seed: 0,
            gt_reference: false,
            workers: None,
            sample: None,
            out: PathBuf::from("out"),
        }
    }

    pub fn radius(&self) -> usize {
        self.radius.unwrap_or(self.task.default_radius())
    }

    pub fn colors(&self) -> usize {
        self.colors.unwrap_or(self.task.default_colors())
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius() == 0 {
            return Err(Error::Config("radius must be positive".into()));
        }
        if let Some((lo, hi)) = self.radius_range {
            if lo == 0 || lo > hi {
                return Err(Error::Config(format!("bad radius range {lo},{hi}")));
            }
        }
        if self.colors() == 0 {
            return Err(Error::Config("color count must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let TargetSpec::Remote(e) = &self.target {
            e.validate()?;
        }
        self.de_config(vec![(0.0, 1.0)]).validate()
    }

    pub fn de_config(&self, bounds: Vec<(f64, f64)>) -> DeConfig {
        DeConfig {
            population_size: self.population,
            scale_factor: self.scale_factor,
            crossover_rate: self.crossover_rate,
            max_generations: self.generations,
            stagnation_patience: self.patience,
            seed: self.seed,
            bounds,
        }
    }

    /// Sets one key from the flat configuration format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
        }
        let (key, v) = (key.trim(), value.trim());
        match key {
            "task" => self.task = v.parse()?,
            "target" => match v {
                "surrogate" => self.target = TargetSpec::Surrogate,
                "remote" => {
                    if !self.target.is_remote() {
                        return Err(Error::Config("target remote needs an endpoint key first".into()));
                    }
                }
                other => return Err(Error::Config(format!("unknown target '{other}'"))),
            },
            "endpoint" => {
                let mut e = RemoteEndpoint::parse(v)?;
                if let TargetSpec::Remote(old) = &self.target {
                    e.timeout_ms = old.timeout_ms;
                    e.max_in_flight = old.max_in_flight;
                }
                self.target = TargetSpec::Remote(e);
            }
            "timeout_ms" | "max_in_flight" => match &mut self.target {
                TargetSpec::Remote(e) if key == "timeout_ms" => e.timeout_ms = num(key, v)?,
                TargetSpec::Remote(e) => e.max_in_flight = num(key, v)?,
                TargetSpec::Surrogate => {
                    return Err(Error::Config(format!("{key} applies only to remote targets")))
                }
            },
            "radius" => self.radius = Some(num(key, v)?),
            "radius_range" => {
                let (lo, hi) = v
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("radius_range needs MIN,MAX, got '{v}'")))?;
                self.radius_range = Some((num(key, lo.trim())?, num(key, hi.trim())?));
            }
            "colors" => self.colors = Some(num(key, v)?),
            "alpha" => self.alpha = num(key, v)?,
            "pop" => self.population = num(key, v)?,
            "f" => self.scale_factor = num(key, v)?,
            "cr" => self.crossover_rate = num(key, v)?,
            "gens" => self.generations = num(key, v)?,
            "patience" => self.patience = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "ablation" => self.ablation = v.parse()?,
            "beta" => self.compression.beta = num(key, v)?,
            "gamma" => self.compression.gamma = num(key, v)?,
            "gt_reference" => self.gt_reference = num(key, v)?,
            "workers" => self.workers = Some(num(key, v)?),
            "sample" => self.sample = Some(num(key, v)?),
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment. Keys are
    /// applied in file order.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Parses a configuration; `task` is read first so task defaults apply.
    pub fn from_text(text: &str) -> Result<Self> {
        let task = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "task")
            .map(|(_, v)| v.trim().parse())
            .transpose()?
            .unwrap_or(Task::Counting);
        let mut c = AttackConfig::new(task);
        c.apply_text(text)?;
        Ok(c)
    }

    /// Fully resolved snapshot in the flat format. Keys are written in an
    /// order `from_text` accepts.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("task", self.task.name().into());
        match &self.target {
            TargetSpec::Surrogate => kv("target", "surrogate".into()),
            TargetSpec::Remote(e) => {
                kv("endpoint", e.spec());
                kv("timeout_ms", e.timeout_ms.to_string());
                kv("max_in_flight", e.max_in_flight.to_string());
                kv("target", "remote".into());
            }
        }
        kv("radius", self.radius().to_string());
        if let Some((lo, hi)) = self.radius_range {
            kv("radius_range", format!("{lo},{hi}"));
        }
        kv("colors", self.colors().to_string());
        kv("alpha", self.alpha.to_string());
        kv("pop", self.population.to_string());
        kv("f", self.scale_factor.to_string());
        kv("cr", self.crossover_rate.to_string());
        kv("gens", self.generations.to_string());
        kv("patience", self.patience.to_string());
        kv("seed", self.seed.to_string());
        kv("ablation", self.ablation.name().into());
        kv("beta", self.compression.beta.to_string());
        kv("gamma", self.compression.gamma.to_string());
        kv("gt_reference", self.gt_reference.to_string());
        if let Some(w) = self.workers {
            kv("workers", w.to_string());
        }
        if let Some(n) = self.sample {
            kv("sample", n.to_string());
        }
        kv("out", self.out.display().to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_defaults() {
        let c = AttackConfig::new(Task::Fusion);
        assert_eq!((c.radius(), c.colors()), (30, 2));
        let c = AttackConfig::new(Task::Segmentation);
        assert_eq!((c.radius(), c.colors()), (40, 10));
    }

    #[test]
    fn text_round_trip() {
        let mut c = AttackConfig::new(Task::Segmentation);
        c.apply_text("alpha = 0.5\n# comment\nradius=12 # trailing\nablation = position_only\nendpoint = tcp://127.0.0.1:9\ntimeout_ms = 50")
            .unwrap();
        assert_eq!(c.radius, Some(12));
        assert_eq!(c.ablation, Ablation::PositionOnly);
        let back = AttackConfig::from_text(&c.to_text()).unwrap();
        let mut expect = c.clone();
        expect.colors = Some(10);
        assert_eq!(back, expect);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let mut c = AttackConfig::new(Task::Counting);
        assert!(c.apply_text("bogus = 1").is_err());
        assert!(c.apply_text("alpha = lots").is_err());
        assert!(c.apply_text("just words").is_err());
        c.alpha = 2.0;
        assert!(c.validate().is_err());
    }
}
