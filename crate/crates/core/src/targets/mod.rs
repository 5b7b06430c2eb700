//! Target models queried by the attack. Only predictions cross this
//! boundary; the optimizer never sees model internals.

pub mod protocol;
mod remote;
mod surrogate;

pub use remote::{RemoteEndpoint, RemoteModel, Transport};
pub use surrogate::{
    connected_components, gaussian_blur, surrogate_count, surrogate_fuse, surrogate_segment,
    Components, SurrogateCounter, SurrogateCountingParams, SurrogateFuser, SurrogateSegmenter,
    DEFAULT_BANDS,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, ImagePair};
use crate::metrics::ClassMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Counting,
    Segmentation,
    Fusion,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Counting, Task::Segmentation, Task::Fusion];

    pub fn name(self) -> &'static str {
        match self {
            Task::Counting => "counting",
            Task::Segmentation => "segmentation",
            Task::Fusion => "fusion",
        }
    }

    /// Task name used on the wire.
    pub fn wire_name(self) -> &'static str {
        match self {
            Task::Counting => "count",
            Task::Segmentation => "segment",
            Task::Fusion => "fuse",
        }
    }

    pub fn from_wire(name: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.wire_name() == name)
    }

    pub fn default_radius(self) -> usize {
        match self {
            Task::Counting | Task::Segmentation => 40,
            Task::Fusion => 30,
        }
    }

    pub fn default_colors(self) -> usize {
        match self {
            Task::Counting | Task::Segmentation => 10,
            Task::Fusion => 2,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "counting" | "count" => Ok(Task::Counting),
            "segmentation" | "segment" => Ok(Task::Segmentation),
            "fusion" | "fuse" => Ok(Task::Fusion),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Total count, plus a density map when the model exposes one.
    Count { count: f64, density: Option<Image> },
    Segmentation(ClassMap),
    Fused(Image),
}

impl Prediction {
    pub fn task(&self) -> Task {
        match self {
            Prediction::Count { .. } => Task::Counting,
            Prediction::Segmentation(_) => Task::Segmentation,
            Prediction::Fused(_) => Task::Fusion,
        }
    }

    pub fn count(&self) -> Option<f64> {
        match self {
            Prediction::Count { count, .. } => Some(*count),
            _ => None,
        }
    }

    pub fn density(&self) -> Option<&Image> {
        match self {
            Prediction::Count { density, .. } => density.as_ref(),
            _ => None,
        }
    }

    pub fn class_map(&self) -> Option<&ClassMap> {
        match self {
            Prediction::Segmentation(m) => Some(m),
            _ => None,
        }
    }

    pub fn fused(&self) -> Option<&Image> {
        match self {
            Prediction::Fused(f) => Some(f),
            _ => None,
        }
    }

    pub(crate) fn expect(self, task: Task) -> Result<Self> {
        if self.task() == task {
            Ok(self)
        } else {
            Err(Error::Oracle(format!(
                "expected a {task} prediction, model returned {}",
                self.task()
            )))
        }
    }
}

/// A black-box model: image pair in, prediction out.
pub trait TargetModel: Send + Sync {
    fn task(&self) -> Task;

    fn predict(&self, pair: &ImagePair) -> Result<Prediction>;

    /// Maximum concurrent `predict` calls the model accepts; `None` is
    /// unbounded.
    fn max_in_flight(&self) -> Option<usize> {
        None
    }
}

/// The built-in surrogate for `task`.
pub fn surrogate_for(task: Task) -> Box<dyn TargetModel> {
    match task {
        Task::Counting => Box::new(SurrogateCounter::default()),
        Task::Segmentation => Box::new(SurrogateSegmenter::default()),
        Task::Fusion => Box::new(SurrogateFuser),
    }
}

/// How to obtain a target model.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Surrogate,
    Remote(RemoteEndpoint),
}

impl TargetSpec {
    pub fn build(&self, task: Task) -> Result<Box<dyn TargetModel>> {
        match self {
            TargetSpec::Surrogate => Ok(surrogate_for(task)),
            TargetSpec::Remote(endpoint) => Ok(Box::new(RemoteModel::connect(endpoint, task)?)),
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, TargetSpec::Remote(_))
    }
}
