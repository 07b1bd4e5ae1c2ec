use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ReportFormat};
use crate::bounds::{exceeds, BoundReport, BoundRow};
use crate::error::Result;

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Largest tolerated violation rate: the theorem's failure probability plus
/// three binomial standard errors over `valid` trials.
pub fn failure_budget(failure_prob: f64, valid: usize) -> f64 {
    let p = failure_prob.clamp(0.0, 1.0);
    if valid == 0 {
        return p;
    }
    p + 3.0 * (p * (1.0 - p) / valid as f64).sqrt()
}

/// Aggregate of every report sharing one theorem id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSummary {
    pub theorem_id: String,
    /// Reports produced.
    pub trials: usize,
    /// Reports carrying a claim (preconditions met, bound defined).
    pub valid: usize,
    pub violations: usize,
    /// `violations / valid`.
    pub rate: Option<f64>,
    pub ratio_p50: Option<f64>,
    pub ratio_p90: Option<f64>,
    pub ratio_p99: Option<f64>,
    pub precondition_failures: usize,
    /// Reports with `empirical > bound` regardless of preconditions.
    pub exceedances: usize,
    pub empirical_p50: Option<f64>,
    pub empirical_p90: Option<f64>,
    pub empirical_p99: Option<f64>,
    /// Smallest guaranteed probability among valid reports.
    pub prob_floor: Option<f64>,
    /// [`failure_budget`] at `1 − prob_floor`.
    pub budget: Option<f64>,
    pub within_budget: Option<bool>,
    pub quantitative: bool,
}

impl TheoremSummary {
    fn from_reports(theorem_id: String, reports: &[&BoundReport]) -> Self {
        let claims: Vec<&&BoundReport> = reports.iter().filter(|r| r.has_claim()).collect();
        let valid = claims.len();
        let violations = reports.iter().filter(|r| r.violated == Some(true)).count();
        let quantitative = reports.iter().all(|r| r.quantitative);
        let sorted = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v
        };
        let ratios = sorted(reports.iter().filter_map(|r| r.ratio).collect());
        let empirical = sorted(reports.iter().filter_map(|r| r.empirical).collect());
        let exceedances = reports
            .iter()
            .filter(|r| matches!((r.empirical, r.bound), (Some(e), Some(b)) if exceeds(e, b)))
            .count();
        let prob_floor = claims.iter().filter_map(|r| r.prob_floor).min_by(f64::total_cmp);
        let rate = (valid > 0).then(|| violations as f64 / valid as f64);
        let budget = match (quantitative, prob_floor) {
            (true, Some(p)) => Some(failure_budget(1.0 - p, valid)),
            _ => None,
        };
        Self {
            theorem_id,
            trials: reports.len(),
            valid,
            violations,
            rate,
            ratio_p50: nearest_rank(&ratios, 0.5),
            ratio_p90: nearest_rank(&ratios, 0.9),
            ratio_p99: nearest_rank(&ratios, 0.99),
            precondition_failures: reports.iter().filter(|r| !r.preconditions.all()).count(),
            exceedances,
            empirical_p50: nearest_rank(&empirical, 0.5),
            empirical_p90: nearest_rank(&empirical, 0.9),
            empirical_p99: nearest_rank(&empirical, 0.99),
            prob_floor,
            budget,
            within_budget: rate.zip(budget).map(|(r, b)| r <= b),
            quantitative,
        }
    }
}

/// One per-trial report, tagged with its trial index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    #[serde(flatten)]
    pub row: BoundRow,
}

/// Result of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub toolkit_version: String,
    pub config: ExperimentConfig,
    /// Sorted by theorem id.
    pub theorems: Vec<TheoremSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<TrialRow>,
}

impl SummaryReport {
    /// Aggregates per-trial reports given in trial order.
    pub fn from_trials(config: ExperimentConfig, trials: &[Vec<BoundReport>]) -> Self {
        let mut groups: BTreeMap<&str, Vec<&BoundReport>> = BTreeMap::new();
        for r in trials.iter().flatten() {
            groups.entry(r.theorem_id.as_str()).or_default().push(r);
        }
        let theorems = groups
            .into_iter()
            .map(|(id, reports)| TheoremSummary::from_reports(id.to_string(), &reports))
            .collect();
        let rows = if config.include_rows {
            trials
                .iter()
                .enumerate()
                .flat_map(|(trial, reports)| reports.iter().map(move |r| TrialRow { trial, row: r.row() }))
                .collect()
        } else {
            Vec::new()
        };
        Self { toolkit_version: env!("CARGO_PKG_VERSION").to_string(), config, theorems, wall_time_secs: None, rows }
    }

    pub fn theorem(&self, id: &str) -> Option<&TheoremSummary> {
        self.theorems.iter().find(|t| t.theorem_id == id)
    }

    /// Summaries whose id starts with `family`.
    pub fn family<'a>(&'a self, family: &'a str) -> impl Iterator<Item = &'a TheoremSummary> + 'a {
        self.theorems.iter().filter(move |t| t.theorem_id.starts_with(family))
    }

    /// True when some theorem's violation rate exceeds its budget.
    pub fn any_over_budget(&self) -> bool {
        self.theorems.iter().any(|t| t.within_budget == Some(false))
    }
}

const CSV_HEADER: [&str; 8] = ["theorem_id", "trials", "valid", "violations", "rate", "ratio_p50", "ratio_p90", "ratio_p99"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_report(report: &SummaryReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for t in &report.theorems {
                w.write_record([
                    t.theorem_id.clone(),
                    t.trials.to_string(),
                    t.valid.to_string(),
                    t.violations.to_string(),
                    opt(t.rate),
                    opt(t.ratio_p50),
                    opt(t.ratio_p90),
                    opt(t.ratio_p99),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
    }
}

pub fn emit_report(report: &SummaryReport, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render_report(report, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::PreconditionFlags;
    use crate::harness::config::Scenario;

    fn report(id: &str, bound: f64, empirical: f64) -> BoundReport {
        BoundReport::new(id, Some(bound), 0.99, PreconditionFlags::ALL).with_empirical(empirical)
    }

    #[test]
    fn quantiles_use_nearest_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.5), Some(5.0));
        assert_eq!(nearest_rank(&v, 0.9), Some(9.0));
        assert_eq!(nearest_rank(&v, 0.99), Some(10.0));
        assert_eq!(nearest_rank(&[], 0.5), None);
        assert_eq!(nearest_rank(&[3.0], 0.0), Some(3.0));
    }

    #[test]
    fn budget_adds_three_standard_errors() {
        assert_eq!(failure_budget(0.0, 100), 0.0);
        let b = failure_budget(0.01, 100);
        assert!((b - (0.01 + 3.0 * (0.01f64 * 0.99 / 100.0).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn aggregation_counts() {
        let trials = vec![vec![report("a", 1.0, 0.5), report("b", 1.0, 2.0)], vec![report("a", 1.0, 3.0)]];
        let s = SummaryReport::from_trials(ExperimentConfig::new(Scenario::Selftest, 2, 0), &trials);
        let a = s.theorem("a").unwrap();
        assert_eq!((a.trials, a.valid, a.violations, a.exceedances), (2, 2, 1, 1));
        assert_eq!(a.rate, Some(0.5));
        assert_eq!(s.theorems[0].theorem_id, "a");
        assert!(s.any_over_budget());
    }

    #[test]
    fn empty_report_is_header_only() {
        let s = SummaryReport::from_trials(ExperimentConfig::new(Scenario::Selftest, 1, 0), &[]);
        let csv = render_report(&s, ReportFormat::Csv).unwrap();
        assert_eq!(csv, "theorem_id,trials,valid,violations,rate,ratio_p50,ratio_p90,ratio_p99\n");
    }

    #[test]
    fn single_row_and_json_round_trip() {
        let mut cfg = ExperimentConfig::new(Scenario::Selftest, 1, 0);
        cfg.include_rows = true;
        let s = SummaryReport::from_trials(cfg, &[vec![report("a", 2.0, 1.0)]]);
        let csv = render_report(&s, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("a,1,1,0,0,0.5,0.5,0.5"));
        let json = render_report(&s, ReportFormat::Json).unwrap();
        let back: SummaryReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
