//! File formats and drivers around `jpcomp-core`: TOML scenario files,
//! CSV traces and parallel parameter sweeps.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{load_config, parse_config, with_override};
pub use output::{write_csv, write_rows};
pub use sweep::{run_sweep, SweepCell, SweepReport, SweepSummary};
