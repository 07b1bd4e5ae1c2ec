use serde::{Deserialize, Serialize};

use super::report::PreconditionFlags;
use crate::error::{ensure, Result};

/// `χ(b) = 1 + 1/(4b(b−1))`.
pub fn chi(b: f64) -> f64 {
    1.0 + 1.0 / (4.0 * b * (b - 1.0))
}

/// `ξ(b) = 1 + 1/(2(b−1)²)`.
pub fn xi(b: f64) -> f64 {
    1.0 + 1.0 / (2.0 * (b - 1.0).powi(2))
}

/// Which squared factor multiplies the `η`-term of the Gaussian bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadingConstant {
    /// `(b+1)²/(b−1)²`, as stated in the theorems.
    #[default]
    Statement,
    /// `(b+2)²/(b−1)²`, the factor produced by the intermediate lemma.
    Proof,
}

impl LeadingConstant {
    pub fn factor(self, b: f64) -> f64 {
        let shift = match self {
            Self::Statement => 1.0,
            Self::Proof => 2.0,
        };
        (b + shift).powi(2) / (b - 1.0).powi(2)
    }
}

/// Parameters of the Gaussian-noise theorems for a rank-`r` signal
/// `A ∈ ℝ^{N×n}` and the window `k..=s` of singular triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBoundParams {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub k: usize,
    pub s: usize,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(rename = "K", default = "default_k")]
    pub big_k: f64,
    /// `σ₁ ≥ … ≥ σ_r > 0`.
    pub sigma: Vec<f64>,
    /// Realized `‖E‖`; `None` falls back to `2(√N+√n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_norm: Option<f64>,
}

fn default_b() -> f64 {
    2.0
}

fn default_k() -> f64 {
    1.0
}

impl GaussianBoundParams {
    pub fn new(big_n: usize, n: usize, sigma: Vec<f64>, k: usize, s: usize, b: f64, big_k: f64) -> Result<Self> {
        let p = Self { big_n, n, k, s, b, big_k, sigma, noise_norm: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_noise_norm(mut self, norm: f64) -> Self {
        self.noise_norm = Some(norm);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.r();
        ensure!(self.big_n >= 1 && self.n >= 1, InvalidParameter, "dimensions must be positive");
        ensure!(r >= 1, InvalidParameter, "need at least one singular value");
        ensure!(
            r <= self.big_n.min(self.n),
            InvalidParameter,
            "rank {r} exceeds min({}, {})",
            self.big_n,
            self.n
        );
        ensure!(
            1 <= self.k && self.k <= self.s && self.s <= r,
            InvalidParameter,
            "need 1 <= k <= s <= r, got k={}, s={}, r={r}",
            self.k,
            self.s
        );
        ensure!(self.b >= 2.0 && self.b.is_finite(), InvalidParameter, "b must be >= 2, got {}", self.b);
        ensure!(self.big_k > 0.0 && self.big_k.is_finite(), InvalidParameter, "K must be positive, got {}", self.big_k);
        ensure!(
            self.sigma.iter().all(|s| *s > 0.0 && s.is_finite()),
            InvalidParameter,
            "singular values must be positive and finite"
        );
        ensure!(
            self.sigma.windows(2).all(|w| w[0] >= w[1]),
            InvalidParameter,
            "singular values must be non-increasing"
        );
        if let Some(e) = self.noise_norm {
            ensure!(e >= 0.0 && e.is_finite(), InvalidParameter, "noise norm must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn r(&self) -> usize {
        self.sigma.len()
    }

    /// `ln(N+n)`.
    pub fn log_dim(&self) -> f64 {
        ((self.big_n + self.n) as f64).ln()
    }

    /// `√N + √n`.
    pub fn root_sum(&self) -> f64 {
        (self.big_n as f64).sqrt() + (self.n as f64).sqrt()
    }

    /// `σ_i` with `σ₀ = ∞` and `σ_i = 0` for `i > r`.
    pub fn sigma_at(&self, i: usize) -> f64 {
        match i {
            0 => f64::INFINITY,
            i if i <= self.r() => self.sigma[i - 1],
            _ => 0.0,
        }
    }

    /// `δ_i = σ_i − σ_{i+1}` with `δ₀ = ∞`.
    pub fn delta(&self, i: usize) -> f64 {
        if i == 0 {
            f64::INFINITY
        } else {
            self.sigma_at(i) - self.sigma_at(i + 1)
        }
    }

    /// `min(δ_{k−1}, δ_s)`.
    pub fn window_gap(&self) -> f64 {
        self.delta(self.k - 1).min(self.delta(self.s))
    }

    /// `s − k + 1`.
    pub fn width(&self) -> usize {
        self.s - self.k + 1
    }

    /// `b²/(b−1)²`.
    pub fn snr_factor(&self) -> f64 {
        self.b.powi(2) / (self.b - 1.0).powi(2)
    }

    /// `η = 11b²/(b−1)² · √(2 ln9·r + (K+7) ln(N+n))`.
    pub fn eta(&self) -> f64 {
        11.0 * self.snr_factor()
            * (2.0 * 9f64.ln() * self.r() as f64 + (self.big_k + 7.0) * self.log_dim()).sqrt()
    }

    /// `γ = 9b²/(b−1)² · √(r(K+7) ln(N+n))`.
    pub fn gamma(&self) -> f64 {
        9.0 * self.snr_factor() * (self.r() as f64 * (self.big_k + 7.0) * self.log_dim()).sqrt()
    }

    pub fn chi(&self) -> f64 {
        chi(self.b)
    }

    pub fn xi(&self) -> f64 {
        xi(self.b)
    }

    /// `M = 2b(√N+√n)`.
    pub fn m_radius(&self) -> f64 {
        2.0 * self.b * self.root_sum()
    }

    /// `k₀ = min(k, r−k)`.
    pub fn k0(&self) -> usize {
        self.k.min(self.r() - self.k)
    }

    /// `‖E‖`, measured when available.
    pub fn noise_norm_or_default(&self) -> f64 {
        self.noise_norm.unwrap_or(2.0 * self.root_sum())
    }

    /// Largest `r₀ ≤ r` with `σ_{r₀} ≥ 2b(√N+√n) + 80bηr` and
    /// `δ_{r₀} ≥ 75χηr`.
    pub fn r0(&self) -> Option<usize> {
        let r = self.r() as f64;
        let eta = self.eta();
        let sigma_floor = self.m_radius() + 80.0 * self.b * eta * r;
        let gap_floor = 75.0 * self.chi() * eta * r;
        (1..=self.r()).rev().find(|&i| self.sigma_at(i) >= sigma_floor && self.delta(i) >= gap_floor)
    }

    pub fn dim_ok(&self) -> bool {
        self.root_sum().powi(2) >= 32.0 * (self.big_k + 7.0) * self.log_dim() + 64.0 * 9f64.ln() * self.r() as f64
    }

    /// Hypotheses of the Gaussian-noise theorems for the window `k..=s`.
    pub fn preconditions(&self) -> PreconditionFlags {
        PreconditionFlags {
            dim_ok: self.dim_ok(),
            snr_ok: self.r0().is_some_and(|r0| self.s <= r0),
            gap_ok: self.window_gap() >= 75.0 * self.chi() * self.eta() * self.r() as f64,
        }
    }

    /// `1 − c(N+n)^{−K}` floored at zero.
    pub fn probability(&self, c: f64) -> f64 {
        (1.0 - c * ((self.big_n + self.n) as f64).powf(-self.big_k)).max(0.0)
    }
}

/// Realized or assumed noise magnitudes for the general-noise theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralNoiseParams {
    /// Bound on `‖UᵀEV‖`.
    #[serde(rename = "L")]
    pub l: f64,
    /// Bound on `‖E‖`.
    #[serde(rename = "B")]
    pub b: f64,
    /// Bound on `‖U_kᵀEV_k‖`.
    pub t: f64,
    /// Failure probability of the bounds above.
    pub epsilon: f64,
}

impl GeneralNoiseParams {
    pub fn new(l: f64, b: f64, t: f64, epsilon: f64) -> Result<Self> {
        let p = Self { l, b, t, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            [self.l, self.b, self.t].iter().all(|x| *x >= 0.0 && x.is_finite()),
            InvalidParameter,
            "L, B and t must be finite and nonnegative"
        );
        ensure!(
            self.epsilon >= 0.0 && self.epsilon < 1.0,
            InvalidParameter,
            "epsilon must lie in [0, 1), got {}",
            self.epsilon
        );
        Ok(())
    }
}

/// `‖U‖_{2,∞}` and `‖V‖_{2,∞}` of the signal factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceStats {
    pub u_2inf: f64,
    pub v_2inf: f64,
    /// `‖U_{k,s}‖_{2,∞}` of the evaluated window; `None` uses `u_2inf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_2inf: Option<f64>,
}

impl IncoherenceStats {
    pub fn new(u_2inf: f64, v_2inf: f64) -> Result<Self> {
        let s = Self { u_2inf, v_2inf, window_2inf: None };
        s.validate()?;
        Ok(s)
    }

    pub fn with_window(mut self, window_2inf: f64) -> Self {
        self.window_2inf = Some(window_2inf);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1.0 + 1e-9;
        let ok = |x: f64| (0.0..=tol).contains(&x);
        ensure!(
            ok(self.u_2inf) && ok(self.v_2inf) && self.window_2inf.is_none_or(ok),
            InvalidParameter,
            "incoherence values must lie in [0, 1]"
        );
        Ok(())
    }

    pub fn window(&self) -> f64 {
        self.window_2inf.unwrap_or(self.u_2inf)
    }
}
