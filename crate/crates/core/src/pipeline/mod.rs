//! End-to-end attack runs, batch evaluation, sweeps and fixtures.

mod attack;
mod batch;
mod config;
pub mod fixtures;
mod output;
mod sweep;

pub use attack::{fitness_config, layout_for, run_attack, AttackOutcome};
pub use batch::{
    discover, item_seed, load_item, run_batch, run_items, sample_items, write_batch, BatchItem,
    BatchReport, BatchRow, LoadedItem, BATCH_CSV, SUMMARY_CSV,
};
pub use config::{Ablation, AttackConfig};
pub use output::{
    append_defense_rows, composite, load_attack, metrics_header, write_attack, StoredAttack,
    ADV_INFRARED, ADV_VISIBLE, CLEAN_INFRARED, CLEAN_VISIBLE, COMPOSITE, CONFIG, GENOME, METRICS,
    LABELS, POINTS, RESULT, TRAJECTORY,
};
pub use sweep::{run_sweep, sweep_csv, SweepParameter, SweepPoint};
