use std::fmt::Write as _;

use serde::ser::{Serialize, SerializeMap, Serializer};

/// Every reported metric, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Game0,
    Game1,
    Game2,
    Game3,
    Rmse,
    Miou,
    Recall,
    PsnrVis,
    SsimVis,
    PsnrInf,
    SsimInf,
    Qabf,
    Viff,
    Cc,
    PsnrFused,
    SsimFused,
}

impl Metric {
    pub const ALL: [Metric; 16] = [
        Metric::Game0,
        Metric::Game1,
        Metric::Game2,
        Metric::Game3,
        Metric::Rmse,
        Metric::Miou,
        Metric::Recall,
        Metric::PsnrVis,
        Metric::SsimVis,
        Metric::PsnrInf,
        Metric::SsimInf,
        Metric::Qabf,
        Metric::Viff,
        Metric::Cc,
        Metric::PsnrFused,
        Metric::SsimFused,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Game0 => "game0",
            Metric::Game1 => "game1",
            Metric::Game2 => "game2",
            Metric::Game3 => "game3",
            Metric::Rmse => "rmse",
            Metric::Miou => "miou",
            Metric::Recall => "recall",
            Metric::PsnrVis => "psnr_vis",
            Metric::SsimVis => "ssim_vis",
            Metric::PsnrInf => "psnr_inf",
            Metric::SsimInf => "ssim_inf",
            Metric::Qabf => "qabf",
            Metric::Viff => "viff",
            Metric::Cc => "cc",
            Metric::PsnrFused => "psnr_fused",
            Metric::SsimFused => "ssim_fused",
        }
    }

    pub fn game(k: u32) -> Metric {
        [Metric::Game0, Metric::Game1, Metric::Game2, Metric::Game3][k as usize]
    }

    fn index(self) -> usize {
        Metric::ALL.iter().position(|m| *m == self).unwrap()
    }
}

/// A sparse row of named metrics; unset entries are blank in CSV output.
///
/// mIoU and recall are stored as fractions and written as percentages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    values: [Option<f64>; 16],
}

impl MetricTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.values[metric.index()]
    }

    pub fn set(&mut self, metric: Metric, value: f64) -> &mut Self {
        self.values[metric.index()] = Some(value);
        self
    }

    pub fn with(mut self, metric: Metric, value: f64) -> Self {
        self.set(metric, value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, Option<f64>)> + '_ {
        Metric::ALL.iter().map(move |&m| (m, self.get(m)))
    }

    pub fn csv_header() -> String {
        Metric::ALL.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
    }

    pub fn csv_fields(&self) -> String {
        let mut out = String::new();
        for (i, (m, v)) in self.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            if let Some(v) = v {
                let shown = match m {
                    Metric::Miou | Metric::Recall => v * 100.0,
                    _ => v,
                };
                let _ = write!(out, "{}", format_value(shown));
            }
        }
        out
    }

    /// Per-metric mean and sample standard deviation over rows that have the
    /// metric set.
    pub fn aggregate(rows: &[MetricTable]) -> (MetricTable, MetricTable) {
        let mut mean = MetricTable::new();
        let mut std = MetricTable::new();
        for m in Metric::ALL {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.get(m)).collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let mu = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            mean.set(m, mu);
            std.set(m, var.sqrt());
        }
        (mean, std)
    }
}

/// Fixed six-decimal rendering used by every CSV report.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

impl Serialize for MetricTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let set: Vec<_> = self.iter().filter_map(|(m, v)| v.map(|v| (m, v))).collect();
        let mut map = serializer.serialize_map(Some(set.len()))?;
        for (m, v) in set {
            map.serialize_entry(m.name(), &v)?;
        }
        map.end()
    }
}
