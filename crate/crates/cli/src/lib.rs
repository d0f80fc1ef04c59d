//! Batch harness: duration sweeps, the multistart baseline and CSV/JSON
//! export of learning curves and optimized controls.

pub mod analysis;
pub mod config;
pub mod export;
pub mod run;

pub use config::{Metadata, Mode, RunConfig};
pub use run::{multistart_baseline, sweep_f_of_t, PointResult, SweepRecord};
