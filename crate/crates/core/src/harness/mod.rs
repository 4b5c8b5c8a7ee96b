//! Experiment orchestration: configuration, multi-seed runs, artifacts, plots
//! and comparison reports.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod train;

pub use config::{ExperimentConfig, LandscapeConfig};
pub use plot::{emit_plot, render_svg};
pub use report::{compare_report, Report};
pub use run::{run_experiment, run_seed, Manifest, RunArtifacts, RunSummary, SeedSummary};
pub use train::{Budget, EpisodeRecord, Trainer};
