use std::fmt::Write as _;
use std::str::FromStr;

use super::batch::{run_items, BatchReport, LoadedItem};
use super::config::AttackConfig;
use crate::error::{Error, Result};
use crate::metrics::{format_value, MetricTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Radius,
    Colors,
    Alpha,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Radius => "radius",
            SweepParameter::Colors => "colors",
            SweepParameter::Alpha => "alpha",
        }
    }

    pub fn apply(self, config: &AttackConfig, value: f64) -> Result<AttackConfig> {
        let mut c = config.clone();
        let whole = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} must be a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepParameter::Radius => c.radius = Some(whole()?),
            SweepParameter::Colors => c.colors = Some(whole()?),
            SweepParameter::Alpha => c.alpha = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radius" => Ok(SweepParameter::Radius),
            "colors" => Ok(SweepParameter::Colors),
            "alpha" => Ok(SweepParameter::Alpha),
            other => Err(Error::Config(format!("cannot sweep '{other}'"))),
        }
    }
}

pub struct SweepPoint {
    pub value: f64,
    pub report: BatchReport,
}

pub fn run_sweep(
    config: &AttackConfig,
    items: &[LoadedItem],
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let c = parameter.apply(config, value)?;
            Ok(SweepPoint {
                value,
                report: run_items(&c, items)?,
            })
        })
        .collect()
}

/// One row per value: mean fitness terms and mean metrics.
pub fn sweep_csv(parameter: SweepParameter, points: &[SweepPoint]) -> String {
    let mut s = format!("parameter,value,e_term,s_term,j,{}\n", MetricTable::csv_header());
    for p in points {
        let (f, _) = p.report.fitness_stats();
        let (mean, _) = p.report.aggregate();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            parameter.name(),
            p.value,
            format_value(f[0]),
            format_value(f[1]),
            format_value(f[2]),
            mean.csv_fields()
        );
    }
    s
}
