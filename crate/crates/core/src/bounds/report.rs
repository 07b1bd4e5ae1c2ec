use serde::{Deserialize, Serialize};

/// Relative slack applied before an inequality counts as violated.
pub const VIOLATION_SLACK: f64 = 1e-9;

/// Hypotheses of a theorem, each evaluated on the instance at hand.
///
/// Theorems without a dimension or signal-strength clause report `true`
/// for that flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreconditionFlags {
    /// Dimension clause, e.g. `(√N+√n)² ≥ 32(K+7)ln(N+n) + 64 ln9·r`.
    pub dim_ok: bool,
    /// Signal-strength clauses (`σ_{r0}` lower bound, `s ≤ r0`, and any
    /// extra magnitude hypothesis of the theorem).
    pub snr_ok: bool,
    /// Gap clauses, e.g. `min(δ_{k−1}, δ_s) ≥ 75χ(b)ηr` or `δ̂_k > 0`.
    pub gap_ok: bool,
}

impl PreconditionFlags {
    pub const ALL: Self = Self { dim_ok: true, snr_ok: true, gap_ok: true };

    pub fn all(&self) -> bool {
        self.dim_ok && self.snr_ok && self.gap_ok
    }
}

/// `empirical > bound + slack · max(1, bound)`.
pub fn exceeds(empirical: f64, bound: f64) -> bool {
    empirical > bound + VIOLATION_SLACK * bound.max(1.0)
}

/// `empirical / bound`, with `0/0 = 0` and no ratio for a positive value
/// over a zero bound.
pub fn ratio(empirical: f64, bound: f64) -> Option<f64> {
    if bound > 0.0 {
        Some(empirical / bound)
    } else if empirical == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// One evaluation of a theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem_id: String,
    /// `None` when the theorem makes no claim (unmet deterministic
    /// precondition or undefined quantity).
    pub bound: Option<f64>,
    /// Guaranteed probability of the inequality; `None` when the
    /// preconditions fail or the theorem has no explicit constant.
    pub prob_floor: Option<f64>,
    pub preconditions: PreconditionFlags,
    pub empirical: Option<f64>,
    pub ratio: Option<f64>,
    /// Set once an empirical value is attached to a quantitative claim.
    pub violated: Option<bool>,
    /// `false` for shape-only evaluators of asymptotic statements, which
    /// use constant 1 and cannot be violated.
    pub quantitative: bool,
    /// Index picked by the evaluator, e.g. the `j₀` of the location theorem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_index: Option<usize>,
}

impl BoundReport {
    pub fn new(theorem_id: impl Into<String>, bound: Option<f64>, prob_floor: f64, pre: PreconditionFlags) -> Self {
        let claim = pre.all() && bound.is_some();
        Self {
            theorem_id: theorem_id.into(),
            bound,
            prob_floor: claim.then_some(prob_floor.clamp(0.0, 1.0)),
            preconditions: pre,
            empirical: None,
            ratio: None,
            violated: None,
            quantitative: true,
            chosen_index: None,
        }
    }

    /// A constant-free evaluator of an asymptotic statement.
    pub fn shape_only(theorem_id: impl Into<String>, bound: f64, pre: PreconditionFlags) -> Self {
        Self { quantitative: false, prob_floor: None, ..Self::new(theorem_id, Some(bound), 1.0, pre) }
    }

    /// A claim exists: the preconditions hold and a bound was produced.
    pub fn has_claim(&self) -> bool {
        self.preconditions.all() && self.bound.is_some()
    }

    pub fn with_empirical(mut self, empirical: f64) -> Self {
        self.empirical = Some(empirical);
        if let Some(b) = self.bound {
            self.ratio = ratio(empirical, b);
            if self.quantitative && self.preconditions.all() {
                self.violated = Some(exceeds(empirical, b));
            }
        }
        self
    }

    pub fn row(&self) -> BoundRow {
        BoundRow {
            theorem_id: self.theorem_id.clone(),
            bound: self.bound,
            empirical: self.empirical,
            ratio: self.ratio,
            prob_floor: self.prob_floor,
            pre_dim: self.preconditions.dim_ok,
            pre_snr: self.preconditions.snr_ok,
            pre_gap: self.preconditions.gap_ok,
            violated: self.violated,
        }
    }
}

/// Flat serialization of a [`BoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub theorem_id: String,
    pub bound: Option<f64>,
    pub empirical: Option<f64>,
    pub ratio: Option<f64>,
    pub prob_floor: Option<f64>,
    pub pre_dim: bool,
    pub pre_snr: bool,
    pub pre_gap: bool,
    pub violated: Option<bool>,
}
