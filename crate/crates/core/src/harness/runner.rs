use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Scenario};
use super::scenarios::{bounds_trial, gmm_trial, resolvent_trial, submatrix_trial};
use super::selftest::selftest_trial;
use super::summary::SummaryReport;
use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::models::derive_seed;

/// Reports of one trial; deterministic in `(config, trial)`.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<BoundReport>> {
    let seed = derive_seed(cfg.base_seed, trial as u64);
    let missing = || Error::Config(format!("the {} scenario needs its settings block", cfg.scenario));
    match cfg.scenario {
        Scenario::Bounds => bounds_trial(cfg, cfg.bounds.as_ref().ok_or_else(missing)?, seed),
        Scenario::Gmm => gmm_trial(cfg, cfg.gmm.as_ref().ok_or_else(missing)?, seed),
        Scenario::Submatrix => submatrix_trial(cfg, cfg.submatrix.as_ref().ok_or_else(missing)?, seed),
        Scenario::Resolvent => resolvent_trial(cfg, cfg.resolvent.as_ref().ok_or_else(missing)?, trial, seed),
        Scenario::Selftest => {
            let set = cfg.selftest.clone().unwrap_or_default();
            selftest_trial(cfg, &set, seed)
        }
    }
}

/// Runs every trial, in parallel when `threads` allows, and summarizes the
/// reports in trial order.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<SummaryReport> {
    cfg.validate()?;
    let start = Instant::now();
    let run = || (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect::<Result<Vec<_>>>();
    let trials = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a pool of {n} threads: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut report = SummaryReport::from_trials(cfg.clone(), &trials);
    if cfg.record_timing {
        report.wall_time_secs = Some(start.elapsed().as_secs_f64());
    }
    Ok(report)
}
