//! Experiment harness: configuration, parallel execution, CSV and SVG
//! emission, and summary statistics.
//!
//! The canonical artifact of a run is the results CSV (one row per path);
//! SVG plots are derived views regenerated from the CSV. Output bytes are a
//! pure function of the configuration: paths are keyed by `(seed, path_id)`
//! and rows are emitted in path order, so worker count and scheduling cannot
//! change the artifact.

mod config;
mod output;
mod runner;

pub use config::{ExperimentConfig, PayoffKind, Preset, StrategyKind};
pub use output::{
    csv_columns, csv_text, read_csv_xy, read_matrix_json, render_scatter, solve_report,
    write_csv, write_svg_scatter,
};
pub use runner::{
    run_experiment, BetaStats, ExperimentRow, PathOutcome, RunOutcome, StrategyMetrics, Summary,
};
