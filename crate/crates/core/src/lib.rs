//! Black-box adversarial patch optimization for registered visible-infrared
//! image pairs.

pub mod de;
pub mod defenses;
pub mod error;
pub mod evaluation;
pub mod fitness;
pub mod image;
pub mod metrics;
pub mod patch;
pub mod pipeline;
pub mod targets;

pub use error::{Error, Result};
