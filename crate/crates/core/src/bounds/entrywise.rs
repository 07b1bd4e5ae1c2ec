use serde::{Deserialize, Serialize};

use super::params::{GaussianBoundParams, IncoherenceStats, LeadingConstant};
use super::report::{BoundReport, PreconditionFlags};
use crate::error::{ensure, Result};

/// Entrywise bounds on the singular subspace perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntrywiseForm {
    /// Shape of `‖ũ_k − (ũ_kᵀu_k)u_k‖_∞`.
    VectorInf,
    /// Shape of `‖Ũ_k − P_{U_k}Ũ_k‖_{2,∞}`.
    Matrix2Inf,
    /// Explicit bound on `‖Ũ_{k,s} − P_{U_{k,s}}Ũ_{k,s}‖_{2,∞}`.
    InfnormNonasymptotic,
    /// Shape of `min_O ‖Ũ_k − U_kO‖_{2,∞}`.
    CorollaryAligned,
    /// Shape of `‖Ũ_{k,s} − U_{k,s}O‖_max`.
    MaxAligned,
}

impl EntrywiseForm {
    pub fn label(self) -> &'static str {
        match self {
            Self::VectorInf => "vector_inf",
            Self::Matrix2Inf => "matrix_2inf",
            Self::InfnormNonasymptotic => "infnorm_nonasymptotic",
            Self::CorollaryAligned => "corollary_aligned",
            Self::MaxAligned => "max_aligned",
        }
    }
}

/// Forms of the singular-value-weighted bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightedForm {
    /// Bound on `‖Ũ_{k,s}D̃_{k,s} − P_{U_{k,s}}Ũ_{k,s}D̃_{k,s}‖_{2,∞}`.
    Theorem,
    /// Bound on `min_O ‖Ũ_rD̃_r − U·O·D̃_r‖_{2,∞}`, for `k = 1`, `s = r`.
    CorollaryFull,
}

fn indicator(p: &GaussianBoundParams) -> f64 {
    if p.width() != p.r() {
        1.0
    } else {
        0.0
    }
}

/// `2√2 b²/(b−1)²`.
fn second_factor(p: &GaussianBoundParams) -> f64 {
    2.0 * 2f64.sqrt() * p.snr_factor()
}

/// `3√2 (b+1)²/(b−1)²`.
fn first_factor(p: &GaussianBoundParams) -> f64 {
    3.0 * 2f64.sqrt() * LeadingConstant::Statement.factor(p.b)
}

pub fn entrywise_bound(p: &GaussianBoundParams, inc: &IncoherenceStats, form: EntrywiseForm) -> Result<BoundReport> {
    p.validate()?;
    inc.validate()?;
    let u = inc.u_2inf;
    let (k, s) = (p.k, p.s);
    let r = p.r() as f64;
    let ln = p.log_dim();
    let e = p.noise_norm_or_default();
    let id = match form {
        EntrywiseForm::InfnormNonasymptotic | EntrywiseForm::MaxAligned => {
            format!("entrywise[{};k={k},s={s}]", form.label())
        }
        _ => format!("entrywise[{};k={k}]", form.label()),
    };
    if form == EntrywiseForm::InfnormNonasymptotic {
        let n2 = (p.n as f64).powi(2);
        let gamma = p.gamma();
        let sum: f64 = (k..=s)
            .map(|i| {
                let sigma = p.sigma_at(i);
                if sigma <= n2 {
                    (gamma / sigma).powi(2)
                } else {
                    16.0 * p.n as f64 / sigma.powi(2)
                }
            })
            .sum();
        let first = first_factor(p) * u * p.eta() * (p.width() as f64).sqrt() / p.window_gap() * indicator(p);
        let bound = first + second_factor(p) * (1.0 + u) * sum.sqrt();
        return Ok(BoundReport::new(id, Some(bound), p.probability(40.0), p.preconditions()));
    }

    let root = (r + ln).sqrt();
    let noise_term = (r * ln).sqrt();
    let sk = p.sigma_at(k);
    let (gap, bound) = match form {
        EntrywiseForm::VectorInf => {
            let gap = p.delta(k - 1).min(p.delta(k));
            (gap, root / gap * u + noise_term / sk * (1.0 + u))
        }
        EntrywiseForm::Matrix2Inf | EntrywiseForm::CorollaryAligned => {
            let gap = p.delta(k);
            let rk = (k as f64).sqrt();
            let mut b = rk * root / gap * u + rk * noise_term / sk * (1.0 + u);
            if form == EntrywiseForm::CorollaryAligned {
                b += (e / sk).powi(2) * inc.window();
            }
            (gap, b)
        }
        EntrywiseForm::MaxAligned => {
            let ss = p.sigma_at(s);
            let gap = p.window_gap();
            (gap, root / gap * u + noise_term / ss * (1.0 + u) + (e / ss).powi(2) * inc.window())
        }
        EntrywiseForm::InfnormNonasymptotic => unreachable!(),
    };
    let pre = PreconditionFlags { dim_ok: true, snr_ok: sk >= 2.0 * e, gap_ok: gap >= r * root };
    Ok(BoundReport::shape_only(id, bound, pre))
}

/// Linear-form and bilinear-form bounds for unit `x ∈ ℝ^N` with
/// `‖xᵀU‖ = xu_norm` and unit `y ∈ ℝ^{s−k+1}`.
pub fn linear_bilinear_bound(p: &GaussianBoundParams, xu_norm: f64, y: &[f64]) -> Result<(BoundReport, BoundReport)> {
    p.validate()?;
    ensure!(
        y.len() == p.width(),
        DimensionMismatch,
        "y has length {} but the window has {} columns",
        y.len(),
        p.width()
    );
    ensure!((0.0..=1.0 + 1e-9).contains(&xu_norm), InvalidParameter, "‖xᵀU‖ must lie in [0, 1]");
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    ensure!((y_norm - 1.0).abs() <= 1e-9, InvalidParameter, "y must be a unit vector");

    let mut pre = p.preconditions();
    pre.snr_ok &= p.sigma_at(1) <= (p.n as f64).powi(2);
    let gamma = p.gamma();
    let gap = p.window_gap();
    let lead = first_factor(p) * xu_norm * p.eta() / gap * indicator(p);
    let tail = second_factor(p) * gamma * (1.0 + xu_norm);
    let prob = p.probability(40.0);

    let inv_sq: f64 = (p.k..=p.s).map(|i| p.sigma_at(i).powi(-2)).sum();
    let linear = lead * (p.width() as f64).sqrt() + tail * inv_sq.sqrt();
    let l0 = y.iter().filter(|v| **v != 0.0).count() as f64;
    let weighted: f64 = (p.k..=p.s).zip(y).map(|(i, yi)| yi.abs() / p.sigma_at(i)).sum();
    let bilinear = lead * l0.sqrt() + tail * weighted;

    let suffix = format!("k={},s={}", p.k, p.s);
    Ok((
        BoundReport::new(format!("linear_form[{suffix}]"), Some(linear), prob, pre),
        BoundReport::new(format!("bilinear_form[{suffix}]"), Some(bilinear), prob, pre),
    ))
}

pub fn weighted_bound(p: &GaussianBoundParams, inc: &IncoherenceStats, form: WeightedForm) -> Result<BoundReport> {
    p.validate()?;
    inc.validate()?;
    let u = inc.u_2inf;
    let prob = p.probability(40.0);
    match form {
        WeightedForm::Theorem => {
            let w = p.width() as f64;
            let first = first_factor(p) * u * p.eta() * p.sigma_at(p.k) * w.sqrt() / p.window_gap() * indicator(p);
            let second = second_factor(p) * (1.0 + u) * (p.gamma().powi(2) * w + 16.0).sqrt();
            let id = format!("weighted[theorem;k={},s={}]", p.k, p.s);
            Ok(BoundReport::new(id, Some(first + second), prob, p.preconditions()))
        }
        WeightedForm::CorollaryFull => {
            ensure!(
                p.k == 1 && p.s == p.r(),
                InvalidParameter,
                "the full-rank corollary needs k = 1 and s = r"
            );
            let r = p.r() as f64;
            let lead = 36.0 * p.snr_factor().powi(2) * r * ((p.big_k + 7.0) * p.log_dim()).sqrt() * (1.0 + u);
            let e = p.noise_norm_or_default();
            let bound = lead + 2.0 * u * e * e / p.sigma_at(p.r());
            let mut pre = p.preconditions();
            pre.snr_ok &= p.r0() == Some(p.r());
            Ok(BoundReport::new("weighted[corollary_full]", Some(bound), prob, pre))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, s: usize) -> GaussianBoundParams {
        GaussianBoundParams::new(900, 900, vec![2e5, 1.2e5], k, s, 2.0, 1.0).unwrap()
    }

    fn inc(u: f64) -> IncoherenceStats {
        IncoherenceStats::new(u, u).unwrap()
    }

    #[test]
    fn full_window_drops_first_term() {
        let p = params(1, 2);
        let a = entrywise_bound(&p, &inc(0.1), EntrywiseForm::InfnormNonasymptotic).unwrap();
        let b = entrywise_bound(&p, &inc(0.0), EntrywiseForm::InfnormNonasymptotic).unwrap();
        // Only the (1 + ‖U‖) factor changes when the indicator vanishes.
        assert!((a.bound.unwrap() / b.bound.unwrap() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn large_singular_values_use_tail_sum() {
        let p = GaussianBoundParams::new(10, 10, vec![1e3], 1, 1, 2.0, 1.0).unwrap();
        let r = entrywise_bound(&p, &inc(0.0), EntrywiseForm::InfnormNonasymptotic).unwrap();
        let expected = 2.0 * 2f64.sqrt() * 4.0 * (160.0f64 / 1e6).sqrt();
        assert!((r.bound.unwrap() - expected).abs() < 1e-15);
        assert!(160.0 / 1e6 < 16.0 / 100.0);
    }

    #[test]
    fn canonical_y_reduces() {
        let p = params(1, 2);
        let (lin, bil) = linear_bilinear_bound(&p, 0.0, &[0.0, 1.0]).unwrap();
        let tail = 2.0 * 2f64.sqrt() * 4.0 * p.gamma();
        assert!((bil.bound.unwrap() - tail / 1.2e5).abs() < 1e-12);
        let inv = (2e5f64.powi(-2) + 1.2e5f64.powi(-2)).sqrt();
        assert!((lin.bound.unwrap() - tail * inv).abs() < 1e-12);
        assert!(linear_bilinear_bound(&p, 0.0, &[1.0]).is_err());
        assert!(linear_bilinear_bound(&p, 0.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn sigma_above_n_squared_fails_hypothesis() {
        let p = GaussianBoundParams::new(100, 100, vec![2e5], 1, 1, 2.0, 1.0).unwrap();
        let (lin, _) = linear_bilinear_bound(&p, 0.5, &[1.0]).unwrap();
        assert!(!lin.preconditions.snr_ok);
    }

    #[test]
    fn corollary_constant_at_two() {
        let p = params(1, 2).with_noise_norm(0.0);
        let r = weighted_bound(&p, &inc(0.0), WeightedForm::CorollaryFull).unwrap();
        let expected = 576.0 * 2.0 * (8.0 * 1800f64.ln()).sqrt();
        assert!((r.bound.unwrap() - expected).abs() < 1e-9);
        let coherent = weighted_bound(&p, &inc(1.0), WeightedForm::CorollaryFull).unwrap();
        assert!((coherent.bound.unwrap() - 2.0 * expected).abs() < 1e-9);
        assert!(weighted_bound(&params(1, 1), &inc(0.0), WeightedForm::CorollaryFull).is_err());
    }

    #[test]
    fn weighted_theorem_full_window() {
        let p = params(1, 2);
        let r = weighted_bound(&p, &inc(0.0), WeightedForm::Theorem).unwrap();
        let expected = 2.0 * 2f64.sqrt() * 4.0 * (2.0 * p.gamma().powi(2) + 16.0).sqrt();
        assert!((r.bound.unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn asymptotic_forms_are_shape_only() {
        let p = params(1, 1).with_noise_norm(60.0);
        for f in [EntrywiseForm::VectorInf, EntrywiseForm::Matrix2Inf, EntrywiseForm::CorollaryAligned, EntrywiseForm::MaxAligned] {
            let r = entrywise_bound(&p, &inc(0.05).with_window(0.05), f).unwrap();
            assert!(!r.quantitative);
            assert!(r.preconditions.all());
        }
    }
}
