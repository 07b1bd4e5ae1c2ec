use serde::{Deserialize, Serialize};

use super::params::{GaussianBoundParams, LeadingConstant};
use super::report::{exceeds, BoundReport, PreconditionFlags};
use crate::error::{ensure, Error, Result};
use crate::matrix::NormSpec;
use crate::models::PerturbationInstance;

/// Which sin-Θ bound of the Gaussian-noise theorem to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubspaceVariant {
    /// Any unitarily invariant norm; needs the measured cross term
    /// `|||P_{U⊥}EP_{Ṽ_{k,s}} ⊕ P_{V⊥}EᵀP_{Ũ_{k,s}}|||`.
    GeneralNorm { norm: NormSpec },
    /// Operator norm, using `‖E‖` from the parameters.
    Operator,
}

impl SubspaceVariant {
    pub fn norm(&self) -> NormSpec {
        match self {
            Self::GeneralNorm { norm } => *norm,
            Self::Operator => NormSpec::Operator,
        }
    }
}

fn probability_and_pre(p: &GaussianBoundParams) -> Result<PreconditionFlags> {
    p.validate()?;
    Ok(p.preconditions())
}

/// Gaussian-noise sin-Θ bound for the window `k..=s` with the stated
/// leading constant.
pub fn gauss_subspace_bound(
    p: &GaussianBoundParams,
    variant: SubspaceVariant,
    cross_term: Option<f64>,
) -> Result<BoundReport> {
    gauss_subspace_bound_with(p, variant, cross_term, LeadingConstant::Statement)
}

pub fn gauss_subspace_bound_with(
    p: &GaussianBoundParams,
    variant: SubspaceVariant,
    cross_term: Option<f64>,
    constant: LeadingConstant,
) -> Result<BoundReport> {
    let pre = probability_and_pre(p)?;
    let r = p.r();
    let w = p.width();
    let factor = constant.factor(p.b);
    let eta_term = p.eta() * (w as f64).sqrt() / p.window_gap();
    let sigma_s = p.sigma_at(p.s);
    let suffix = match constant {
        LeadingConstant::Statement => String::new(),
        LeadingConstant::Proof => ";proof_constant".into(),
    };
    let (bound, label) = match variant {
        SubspaceVariant::GeneralNorm { norm } => {
            norm.validate()?;
            ensure!(
                norm.is_unitarily_invariant(),
                InvalidParameter,
                "the sin-theta bound needs a unitarily invariant norm, got {norm}"
            );
            let cross = cross_term.ok_or_else(|| {
                Error::InvalidParameter("the general-norm bound needs the measured cross term".into())
            })?;
            let m = w.min(r - w) as f64;
            (6.0 * 2f64.sqrt() * factor * m.sqrt() * eta_term + 2.0 * cross / sigma_s, norm.to_string())
        }
        SubspaceVariant::Operator => {
            let indicator = if w != r { 1.0 } else { 0.0 };
            let e = p.noise_norm_or_default();
            (3.0 * 2f64.sqrt() * factor * indicator * eta_term + 2.0 * e / sigma_s, "operator".into())
        }
    };
    let id = format!("gauss_sin_theta[{label};k={},s={}{suffix}]", p.k, p.s);
    Ok(BoundReport::new(id, Some(bound), p.probability(20.0), pre))
}

/// Constant-free forms of the asymptotic sin-Θ statements for `U_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimplifiedVariant {
    /// `√(k·k₀)·√(r+ln(N+n))/δ_k + (|||P_{U⊥}EP_{Ṽ_k}||| + |||P_{V⊥}EᵀP_{Ũ_k}|||)/σ_k`.
    GeneralNorm { norm: NormSpec },
    /// `√k·√(r+ln(N+n))/δ_k·𝟙{k≠r} + ‖E‖/σ_k`.
    Operator,
    /// `√(k·k₀)·√(r+ln(N+n))/δ_k + k‖E‖/σ_k`.
    Corollary { norm: NormSpec },
}

/// Shape-only evaluator of the simplified asymptotic bound for the top-`k`
/// subspace, `k = p.k`. Preconditions are those of the explicit-constant
/// theorem for the window `1..=k`.
pub fn simplified_subspace_bound(
    p: &GaussianBoundParams,
    variant: SimplifiedVariant,
    cross_sum: Option<f64>,
) -> Result<BoundReport> {
    p.validate()?;
    let k = p.k;
    let top = GaussianBoundParams { k: 1, s: k, ..p.clone() };
    let pre = top.preconditions();
    let root = (p.r() as f64 + p.log_dim()).sqrt();
    let (delta_k, sigma_k) = (p.delta(k), p.sigma_at(k));
    let kk0 = ((k * p.k0()) as f64).sqrt();
    let e = p.noise_norm_or_default();
    let (bound, label) = match variant {
        SimplifiedVariant::GeneralNorm { norm } => {
            let cross = cross_sum.ok_or_else(|| {
                Error::InvalidParameter("the simplified general-norm bound needs the measured cross terms".into())
            })?;
            (kk0 * root / delta_k + cross / sigma_k, format!("general:{norm}"))
        }
        SimplifiedVariant::Operator => {
            let indicator = if k != p.r() { 1.0 } else { 0.0 };
            ((k as f64).sqrt() * root / delta_k * indicator + e / sigma_k, "operator".into())
        }
        SimplifiedVariant::Corollary { norm } => {
            (kk0 * root / delta_k + k as f64 * e / sigma_k, format!("corollary:{norm}"))
        }
    };
    Ok(BoundReport::shape_only(format!("simplified_sin_theta[{label};k={k}]"), bound, pre))
}

/// `‖E‖ ≤ 2(√N+√n)` for standard Gaussian `E`, which holds with
/// probability at least `1 − 2e^{−(√N+√n)²/2}`.
pub fn noise_norm_event(rows: usize, cols: usize, noise_norm: f64) -> BoundReport {
    let root = (rows as f64).sqrt() + (cols as f64).sqrt();
    let prob = 1.0 - 2.0 * (-root * root / 2.0).exp();
    BoundReport::new(format!("spectral_norm_event[N={rows},n={cols}]"), Some(2.0 * root), prob, PreconditionFlags::ALL)
        .with_empirical(noise_norm)
}

/// Is the real point `x` inside `S_σ`.
pub fn in_location_set(p: &GaussianBoundParams, sigma: f64, x: f64) -> bool {
    let half_width = 20.0 * p.chi() * p.eta() * p.r() as f64;
    sigma - half_width <= x && x <= p.chi() * sigma + half_width
}

/// Checks that `σ̃_j ∈ S_{σ_{j₀}}` for some `j₀ ∈ k..=s` and that
/// `|φ(σ̃_j) − σ_{j₀}²| ≤ 20ξχηr(σ̃_j + χσ_{j₀})`.
///
/// `j₀` minimizes the ratio of the location residual to its bound, with
/// members of the location set preferred. The report is violated when the
/// membership or the residual inequality fails.
pub fn gauss_sv_location_check(
    inst: &PerturbationInstance,
    p: &GaussianBoundParams,
    j: usize,
    phi_at: impl Fn(f64) -> Result<f64>,
) -> Result<BoundReport> {
    let pre = probability_and_pre(p)?;
    ensure!(
        p.k <= j && j <= p.s,
        InvalidParameter,
        "j = {j} outside the window {}..={}",
        p.k,
        p.s
    );
    let id = format!("gauss_sv_location[k={},s={},j={j}]", p.k, p.s);
    let sigma_tilde = inst
        .svd_sum
        .sigma(j)
        .ok_or_else(|| Error::InvalidInput(format!("σ̃_{j} of the observation was not computed")))?;
    let phi = match phi_at(sigma_tilde) {
        Ok(v) => v,
        Err(Error::Domain(_)) => {
            let pre = PreconditionFlags { snr_ok: false, ..pre };
            return Ok(BoundReport::new(id, None, 1.0, pre));
        }
        Err(e) => return Err(e),
    };

    let scale = 20.0 * p.xi() * p.chi() * p.eta() * p.r() as f64;
    let candidates = (p.k..=p.s).map(|j0| {
        let sigma = p.sigma_at(j0);
        let bound = scale * (sigma_tilde + p.chi() * sigma);
        let residual = (phi - sigma * sigma).abs();
        (j0, in_location_set(p, sigma, sigma_tilde), residual, bound)
    });
    let (j0, member, residual, bound) = candidates
        .min_by(|a, b| (!a.1).cmp(&!b.1).then((a.2 / a.3).total_cmp(&(b.2 / b.3))))
        .expect("window is non-empty");

    let mut report = BoundReport::new(id, Some(bound), p.probability(10.0), pre).with_empirical(residual);
    report.chosen_index = Some(j0);
    if report.violated.is_some() {
        report.violated = Some(!member || exceeds(residual, bound));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use crate::models::{gen_low_rank, FactorMode, LowRankSpec, PerturbationInstance};

    fn reference() -> GaussianBoundParams {
        GaussianBoundParams::new(900, 900, vec![2e5, 1.2e5], 1, 1, 2.0, 1.0).unwrap()
    }

    #[test]
    fn eta_matches_closed_form() {
        let expected = 44.0 * (4.0 * 9f64.ln() + 8.0 * 1800f64.ln()).sqrt();
        assert!((reference().eta() - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn full_window_operator_drops_first_term() {
        let p = GaussianBoundParams::new(900, 900, vec![2e5, 1.2e5], 1, 2, 2.0, 1.0).unwrap().with_noise_norm(60.0);
        let r = gauss_subspace_bound(&p, SubspaceVariant::Operator, None).unwrap();
        assert!((r.bound.unwrap() - 2.0 * 60.0 / 1.2e5).abs() < 1e-15);
    }

    #[test]
    fn proof_constant_is_larger() {
        let p = reference();
        let a = gauss_subspace_bound(&p, SubspaceVariant::Operator, None).unwrap();
        let b = gauss_subspace_bound_with(&p, SubspaceVariant::Operator, None, LeadingConstant::Proof).unwrap();
        assert!(b.bound.unwrap() > a.bound.unwrap());
        assert!(b.theorem_id.contains("proof_constant"));
    }

    #[test]
    fn general_norm_needs_cross_term() {
        let v = SubspaceVariant::GeneralNorm { norm: NormSpec::Frobenius };
        assert!(gauss_subspace_bound(&reference(), v, None).is_err());
        let r = gauss_subspace_bound(&reference(), v, Some(10.0)).unwrap();
        assert_eq!(r.prob_floor, Some(1.0 - 20.0 / 1800.0));
        let bad = SubspaceVariant::GeneralNorm { norm: NormSpec::Max };
        assert!(gauss_subspace_bound(&reference(), bad, Some(1.0)).is_err());
    }

    #[test]
    fn simplified_forms() {
        let p = GaussianBoundParams::new(50, 50, vec![10.0, 5.0], 2, 2, 2.0, 1.0).unwrap().with_noise_norm(1.0);
        // k = r: k₀ = 0 and the operator indicator vanishes.
        let c = simplified_subspace_bound(&p, SimplifiedVariant::Corollary { norm: NormSpec::Frobenius }, None).unwrap();
        assert!((c.bound.unwrap() - 2.0 / 5.0).abs() < 1e-15);
        let o = simplified_subspace_bound(&p, SimplifiedVariant::Operator, None).unwrap();
        assert!((o.bound.unwrap() - 1.0 / 5.0).abs() < 1e-15);
        assert!(!o.quantitative);
        assert_eq!(o.prob_floor, None);
    }

    #[test]
    fn noise_norm_event_probability() {
        let r = noise_norm_event(9, 9, 5.0);
        assert!((r.prob_floor.unwrap() - (1.0 - 2.0 * (-18f64).exp())).abs() < 1e-15);
        assert_eq!(r.bound, Some(12.0));
        assert_eq!(r.violated, Some(false));
        assert_eq!(noise_norm_event(9, 9, 13.0).violated, Some(true));
    }

    #[test]
    fn location_set_contains_center() {
        let p = reference();
        for s in [2e5, 1.2e5] {
            assert!(in_location_set(&p, s, s));
            assert!(!in_location_set(&p, s, 0.5 * s));
        }
    }

    fn tiny_instance() -> PerturbationInstance {
        let spec = LowRankSpec { rows: 40, cols: 30, singulars: vec![2e5, 1.2e5], factor_mode: FactorMode::Haar };
        let signal = gen_low_rank(&spec, 3).unwrap();
        let e = DenseMatrix::zeros(40, 30);
        PerturbationInstance::from_signal(signal, e, 3, Some(3)).unwrap()
    }

    #[test]
    fn location_with_exact_phi() {
        // Without noise φ(z) = z², so the residual vanishes at j₀ = j.
        let inst = tiny_instance();
        let p = GaussianBoundParams::new(900, 900, vec![2e5, 1.2e5], 1, 2, 2.0, 1.0).unwrap();
        for j in 1..=2 {
            let r = gauss_sv_location_check(&inst, &p, j, |z| Ok(z * z)).unwrap();
            assert_eq!(r.chosen_index, Some(j));
            assert_eq!(r.violated, Some(false));
        }
        let r = gauss_sv_location_check(&inst, &p, 1, |_| Err(Error::Domain("inside".into()))).unwrap();
        assert!(!r.preconditions.snr_ok);
        assert_eq!(r.bound, None);
    }
}
