use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::matrix::NormSpec;
use crate::models::{GmmSpec, LowRankSpec, SubmatrixSpec};

/// Which Monte Carlo driver a config selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Bounds,
    Gmm,
    Submatrix,
    Resolvent,
    Selftest,
}

impl Scenario {
    /// Theorem families the scenario can evaluate, in evaluation order.
    pub fn families(self) -> &'static [&'static str] {
        match self {
            Self::Bounds => &[
                "mirsky",
                "wedin",
                "gauss_sin_theta",
                "gauss_sin_theta_proof",
                "simplified_sin_theta",
                "gauss_sv_location",
                "general_sv",
                "general_sin_theta",
                "entrywise",
                "entrywise_shape",
                "linear_bilinear",
                "weighted",
                "weighted_corollary",
                "spectral_norm_event",
            ],
            Self::Gmm => &["gmm_recovery", "gmm_embedding_gap"],
            Self::Submatrix => &["submatrix_recovery"],
            Self::Resolvent => &[
                "spectral_norm_event",
                "phi_identity",
                "phi_monotone",
                "uphiu_block",
                "resolvent_lemmas",
                "dense_oracle",
                "local_law",
            ],
            Self::Selftest => &[
                "mirsky",
                "wedin",
                "principal_cosines",
                "procrustes_spectrum",
                "frobenius_sandwich",
                "alignment_inequalities",
                "phi_identity",
                "phi_monotone",
            ],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Bounds => "bounds",
            Self::Gmm => "gmm",
            Self::Submatrix => "submatrix",
            Self::Resolvent => "resolvent",
            Self::Selftest => "selftest",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

/// Bounds families that assume standard Gaussian noise.
pub(crate) const GAUSSIAN_FAMILIES: [&str; 10] = [
    "gauss_sin_theta",
    "gauss_sin_theta_proof",
    "simplified_sin_theta",
    "gauss_sv_location",
    "entrywise",
    "entrywise_shape",
    "linear_bilinear",
    "weighted",
    "weighted_corollary",
    "spectral_norm_event",
];

/// How the noise matrix of the bounds scenario is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// I.i.d. standard Gaussian entries.
    #[default]
    Standard,
    /// A Gaussian direction rescaled so that `‖E‖` is log-uniform on
    /// `[low·σ_r, high·σ₁]`. Only deterministic theorems apply.
    SpectralRange { low: f64, high: f64 },
}

/// Settings of the bounds scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSettings {
    pub signal: LowRankSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "one_usize")]
    pub k: usize,
    /// Defaults to `k`.
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default = "two")]
    pub b: f64,
    #[serde(rename = "K", default = "one")]
    pub big_k: f64,
    /// Norms for the norm-generic theorems.
    #[serde(default = "default_norms")]
    pub norms: Vec<NormSpec>,
}

impl BoundsSettings {
    pub fn window(&self) -> (usize, usize) {
        (self.k, self.s.unwrap_or(self.k))
    }
}

/// k-means parameters shared by the recovery scenarios; seeds are derived
/// per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansSettings {
    #[serde(default = "ten")]
    pub restarts: usize,
    #[serde(default = "hundred")]
    pub max_iter: usize,
    #[serde(default = "kmeans_tol")]
    pub tol: f64,
}

impl Default for KMeansSettings {
    fn default() -> Self {
        Self { restarts: 10, max_iter: 100, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmSettings {
    pub model: GmmSpec,
    #[serde(default)]
    pub kmeans: KMeansSettings,
    /// Exponent `L` of the recovery theorem.
    #[serde(rename = "L", default = "one")]
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmatrixSettings {
    pub model: SubmatrixSpec,
    #[serde(default)]
    pub kmeans: KMeansSettings,
    #[serde(rename = "L", default = "one")]
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventSettings {
    /// Noise shapes `(N, n)`; trial `i` uses entry `i mod len`.
    pub shapes: Vec<(usize, usize)>,
    #[serde(default = "two")]
    pub b: f64,
    #[serde(rename = "K", default = "one")]
    pub big_k: f64,
    /// Random `(x, y, z)` local-law probes per trial.
    #[serde(default = "hundred")]
    pub probes: usize,
    /// Points of the real monotonicity grid on `[M, 3M]`.
    #[serde(default = "fifty")]
    pub grid: usize,
    /// Rank of the random factors used for the block identity.
    #[serde(default = "two_usize")]
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestSettings {
    #[serde(default = "thirty")]
    pub size: usize,
    #[serde(default = "three")]
    pub rank: usize,
    #[serde(default = "forty")]
    pub max_ambient: usize,
    #[serde(default = "eight")]
    pub max_dim: usize,
}

impl Default for SelftestSettings {
    fn default() -> Self {
        Self { size: 30, rank: 3, max_ambient: 40, max_dim: 8 }
    }
}

/// A complete Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Theorem families to evaluate; empty selects all of the scenario.
    #[serde(default)]
    pub theorems: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    /// Worker threads; `None` uses every core. Results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Adds wall time to the report, which then differs between runs.
    #[serde(default)]
    pub record_timing: bool,
    /// Adds every per-trial report row to JSON output.
    #[serde(default)]
    pub include_rows: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmm: Option<GmmSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submatrix: Option<SubmatrixSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolvent: Option<ResolventSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelftestSettings>,
}

impl ExperimentConfig {
    /// A config for `scenario` with no settings block.
    pub fn new(scenario: Scenario, trials: usize, base_seed: u64) -> Self {
        Self {
            scenario,
            trials,
            base_seed,
            theorems: Vec::new(),
            output: None,
            format: ReportFormat::Csv,
            threads: None,
            record_timing: false,
            include_rows: false,
            bounds: None,
            gmm: None,
            submatrix: None,
            resolvent: None,
            selftest: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Selected families in the scenario's evaluation order.
    pub fn families(&self) -> Vec<&'static str> {
        self.scenario
            .families()
            .iter()
            .copied()
            .filter(|f| self.theorems.is_empty() || self.theorems.iter().any(|t| t == f))
            .collect()
    }

    pub fn wants(&self, family: &str) -> bool {
        self.theorems.is_empty() || self.theorems.iter().any(|t| t == family)
    }

    pub fn validate(&self) -> Result<()> {
        let config = |msg: String| Error::Config(msg);
        ensure!(self.trials >= 1, Config, "trials must be at least 1");
        ensure!(self.threads != Some(0), Config, "threads must be at least 1");
        for t in &self.theorems {
            ensure!(
                self.scenario.families().contains(&t.as_str()),
                Config,
                "unknown theorem {t:?} for scenario {}; known: {}",
                self.scenario,
                self.scenario.families().join(", ")
            );
        }
        let missing = |name: &str| config(format!("scenario {} needs a \"{name}\" settings block", self.scenario));
        match self.scenario {
            Scenario::Bounds => {
                let b = self.bounds.as_ref().ok_or_else(|| missing("bounds"))?;
                b.signal.validate().map_err(|e| config(e.to_string()))?;
                let (k, s) = b.window();
                let r = b.signal.rank();
                ensure!(1 <= k && k <= s && s <= r, Config, "need 1 <= k <= s <= r, got k={k}, s={s}, r={r}");
                ensure!(b.b >= 2.0, Config, "b must be >= 2");
                ensure!(b.big_k > 0.0, Config, "K must be positive");
                ensure!(!b.norms.is_empty(), Config, "norms must not be empty");
                for norm in &b.norms {
                    norm.validate().map_err(|e| config(e.to_string()))?;
                }
                if let NoiseModel::SpectralRange { low, high } = b.noise {
                    ensure!(low > 0.0 && high > 0.0, Config, "noise range factors must be positive");
                    let chosen: Vec<&str> = self.families().into_iter().filter(|f| GAUSSIAN_FAMILIES.contains(f)).collect();
                    ensure!(
                        self.theorems.is_empty() || chosen.is_empty(),
                        Config,
                        "{} need standard Gaussian noise",
                        chosen.join(", ")
                    );
                }
            }
            Scenario::Gmm => {
                let g = self.gmm.as_ref().ok_or_else(|| missing("gmm"))?;
                g.model.validate().map_err(|e| config(e.to_string()))?;
                check_kmeans(&g.kmeans)?;
                ensure!(g.l > 0.0, Config, "L must be positive");
            }
            Scenario::Submatrix => {
                let s = self.submatrix.as_ref().ok_or_else(|| missing("submatrix"))?;
                s.model.validate().map_err(|e| config(e.to_string()))?;
                check_kmeans(&s.kmeans)?;
                ensure!(s.l > 0.0, Config, "L must be positive");
            }
            Scenario::Resolvent => {
                let r = self.resolvent.as_ref().ok_or_else(|| missing("resolvent"))?;
                ensure!(!r.shapes.is_empty(), Config, "shapes must not be empty");
                ensure!(
                    r.shapes.iter().all(|&(a, b)| a >= 1 && b >= 1 && r.rank <= a.min(b)),
                    Config,
                    "every shape needs positive dimensions of at least rank {}",
                    r.rank
                );
                ensure!(r.b >= 2.0 && r.big_k > 0.0, Config, "need b >= 2 and K > 0");
                ensure!(r.grid >= 2 && r.rank >= 1, Config, "grid needs 2 points and rank at least 1");
            }
            Scenario::Selftest => {
                let s = self.selftest.clone().unwrap_or_default();
                ensure!(
                    s.rank >= 1 && s.rank < s.size && s.max_dim >= 1 && s.max_dim <= s.max_ambient,
                    Config,
                    "selftest sizes need 1 <= rank < size and 1 <= max_dim <= max_ambient"
                );
            }
        }
        Ok(())
    }
}

fn check_kmeans(k: &KMeansSettings) -> Result<()> {
    ensure!(
        k.restarts >= 1 && k.max_iter >= 1 && k.tol >= 0.0,
        Config,
        "k-means needs restarts >= 1, max_iter >= 1 and tol >= 0"
    );
    Ok(())
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn two_usize() -> usize {
    2
}
fn three() -> usize {
    3
}
fn eight() -> usize {
    8
}
fn ten() -> usize {
    10
}
fn thirty() -> usize {
    30
}
fn forty() -> usize {
    40
}
fn fifty() -> usize {
    50
}
fn hundred() -> usize {
    100
}
fn kmeans_tol() -> f64 {
    1e-8
}
fn default_norms() -> Vec<NormSpec> {
    vec![NormSpec::Operator]
}
