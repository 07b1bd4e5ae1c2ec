//! Monte Carlo experiments: configuration, trial runners and summaries.

mod config;
mod runner;
mod scenarios;
mod selftest;
mod summary;

pub use config::{
    BoundsSettings, ExperimentConfig, GmmSettings, KMeansSettings, NoiseModel, ReportFormat, ResolventSettings,
    Scenario, SelftestSettings, SubmatrixSettings,
};
pub use runner::{run_monte_carlo, run_trial};
pub use scenarios::bounds_instance;
pub use summary::{emit_report, failure_budget, nearest_rank, render_report, SummaryReport, TheoremSummary, TrialRow};
