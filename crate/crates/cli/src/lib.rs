//! Experiment driver: config files, runs, CSV traces, SVG snapshots and reports.

pub mod config;
pub mod experiment;
pub mod svg;
pub mod trace_io;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig};
pub use experiment::{replay, run_experiment, Exit, Outcome};
pub use svg::{emit_snapshot_svg, View, ViewBox};
