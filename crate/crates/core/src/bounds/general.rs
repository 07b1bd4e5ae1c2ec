use super::params::GeneralNoiseParams;
use super::report::{BoundReport, PreconditionFlags};
use crate::error::{ensure, Error, Result};
use crate::matrix::NormSpec;
use crate::models::PerturbationInstance;

/// Lower and upper general-noise bounds on `σ̃_k`.
///
/// The empirical values are the shortfall `max(σ_k − σ̃_k, 0)` against `t`
/// and the excess `max(σ̃_k − σ_k, 0)` against the upper-bound increment.
pub fn general_sv_bounds(
    inst: &PerturbationInstance,
    k: usize,
    gp: &GeneralNoiseParams,
) -> Result<(BoundReport, BoundReport)> {
    gp.validate()?;
    let r = inst.signal_rank();
    ensure!(k >= 1 && k <= r, InvalidParameter, "k = {k} outside 1..={r}");
    let sigma = inst.svd_a.singulars[k - 1];
    let sigma_tilde = inst
        .svd_sum
        .sigma(k)
        .ok_or_else(|| Error::InvalidInput(format!("σ̃_{k} of the observation was not computed")))?;
    let prob = 1.0 - gp.epsilon;

    let lower = BoundReport::new(format!("general_sv_lower[k={k}]"), Some(gp.t), prob, PreconditionFlags::ALL)
        .with_empirical((sigma - sigma_tilde).max(0.0));

    let id = format!("general_sv_upper[k={k}]");
    let upper = if sigma_tilde > 0.0 {
        let kf = k as f64;
        let b = gp.b;
        let increment = 2.0 * kf.sqrt() * b * b / sigma_tilde + kf * b.powi(3) / sigma_tilde.powi(2) + gp.l;
        BoundReport::new(id, Some(increment), prob, PreconditionFlags::ALL)
            .with_empirical((sigma_tilde - sigma).max(0.0))
    } else {
        let pre = PreconditionFlags { snr_ok: false, ..PreconditionFlags::ALL };
        BoundReport::new(id, None, prob, pre)
    };
    Ok((lower, upper))
}

/// General-noise bound on `|||sin∠(U_k, Ũ_k)|||`; the operator norm uses
/// the sharper form with `𝟙{k<r}`.
pub fn general_subspace_bound(
    k: usize,
    r: usize,
    delta_k: f64,
    sigma_k: f64,
    gp: &GeneralNoiseParams,
    spec: NormSpec,
) -> Result<BoundReport> {
    gp.validate()?;
    spec.validate()?;
    ensure!(spec.is_unitarily_invariant(), InvalidParameter, "need a unitarily invariant norm, got {spec}");
    ensure!(k >= 1 && k <= r, InvalidParameter, "k = {k} outside 1..={r}");
    ensure!(sigma_k > 0.0 && delta_k >= 0.0, InvalidParameter, "need σ_k > 0 and δ_k ≥ 0");
    let pre = PreconditionFlags { gap_ok: delta_k >= 2.0 * gp.l, ..PreconditionFlags::ALL };
    let inner = gp.l / delta_k + 2.0 * gp.b * gp.b / (delta_k * sigma_k);
    let kf = k as f64;
    let bound = if spec == NormSpec::Operator {
        let indicator = if k < r { 1.0 } else { 0.0 };
        2.0 * kf.sqrt() * inner * indicator + 2.0 * gp.b / sigma_k
    } else {
        let m = k.min(r - k) as f64;
        2.0 * (kf * m).sqrt() * inner + 2.0 * kf * gp.b / sigma_k
    };
    let bound = if bound.is_finite() { Some(bound) } else { None };
    Ok(BoundReport::new(format!("general_sin_theta[{spec};k={k}]"), bound, 1.0 - gp.epsilon, pre))
}

/// `f(t) = 2e^{−t²/2}`, a tail function for standard Gaussian noise.
pub fn gaussian_tail(t: f64) -> f64 {
    2.0 * (-t * t / 2.0).exp()
}

/// `1 − r²9^{2r}f(t/2r) − k²9^{2k}f(δ_k/4k)` floored at zero.
pub fn fbounded_probability(f: impl Fn(f64) -> f64, t: f64, r: usize, k: usize, delta_k: f64) -> f64 {
    let term = |m: usize, x: f64| {
        let fx = f(x);
        if fx <= 0.0 {
            0.0
        } else {
            let m = m as f64;
            (2.0 * m.ln() + 2.0 * m * 9f64.ln() + fx.ln()).exp()
        }
    };
    let p = 1.0 - term(r, t / (2.0 * r as f64)) - term(k, delta_k / (4.0 * k as f64));
    p.clamp(0.0, 1.0)
}

/// Operator-norm sin-Θ bound for `f`-bounded noise with realized `‖E‖`.
pub fn fbounded_subspace_bound(
    k: usize,
    r: usize,
    delta_k: f64,
    sigma_k: f64,
    noise_norm: f64,
    t: f64,
    f: impl Fn(f64) -> f64,
) -> Result<BoundReport> {
    ensure!(k >= 1 && k <= r, InvalidParameter, "k = {k} outside 1..={r}");
    ensure!(sigma_k > 0.0 && t > 0.0 && noise_norm >= 0.0, InvalidParameter, "need σ_k > 0, t > 0, ‖E‖ ≥ 0");
    let pre = PreconditionFlags { gap_ok: delta_k > 0.0, ..PreconditionFlags::ALL };
    let indicator = if k < r { 1.0 } else { 0.0 };
    let bound = 2.0 * (k as f64).sqrt() * (t / delta_k + 2.0 * noise_norm.powi(2) / (delta_k * sigma_k)) * indicator
        + 2.0 * noise_norm / sigma_k;
    let bound = if pre.gap_ok { Some(bound) } else { None };
    let prob = fbounded_probability(f, t, r, k, delta_k);
    Ok(BoundReport::new(format!("fbounded_sin_theta[k={k}]"), bound, prob, pre))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{from_row_major, DenseMatrix};
    use crate::models::perturb;

    fn params(l: f64, b: f64, t: f64) -> GeneralNoiseParams {
        GeneralNoiseParams::new(l, b, t, 0.05).unwrap()
    }

    #[test]
    fn zero_noise_is_tight() {
        let a = from_row_major(3, 3, &[4.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let inst = perturb(&a, &DenseMatrix::zeros(3, 3)).unwrap();
        let (lo, up) = general_sv_bounds(&inst, 2, &params(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(lo.bound, Some(0.0));
        assert!(lo.empirical.unwrap() < 1e-12 && up.empirical.unwrap() < 1e-12);
        assert_eq!(lo.violated, Some(false));
        assert_eq!(up.violated, Some(false));
        assert!(general_sv_bounds(&inst, 3, &params(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn operator_full_rank_reduces() {
        let r = general_subspace_bound(3, 3, 1.0, 4.0, &params(0.1, 0.5, 0.0), NormSpec::Operator).unwrap();
        assert!((r.bound.unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(r.prob_floor, Some(0.95));
    }

    #[test]
    fn zero_noise_subspace_bound() {
        let r = general_subspace_bound(1, 3, 1.0, 4.0, &params(0.0, 0.0, 0.0), NormSpec::Frobenius).unwrap();
        assert_eq!(r.bound, Some(0.0));
    }

    #[test]
    fn small_gap_is_flagged() {
        let r = general_subspace_bound(1, 3, 0.1, 4.0, &params(0.1, 0.5, 0.0), NormSpec::Frobenius).unwrap();
        assert!(!r.preconditions.gap_ok);
        assert_eq!(r.prob_floor, None);
    }

    #[test]
    fn fbounded_extremes() {
        assert_eq!(fbounded_probability(|_| 0.0, 1.0, 3, 2, 1.0), 1.0);
        assert_eq!(fbounded_probability(|_| 1.0, 1.0, 3, 2, 1.0), 0.0);
        let expected = 1.0 - 162.0 * gaussian_tail(10.0);
        assert!((fbounded_probability(gaussian_tail, 20.0, 1, 1, 40.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn fbounded_large_rank_does_not_overflow() {
        let p = fbounded_probability(gaussian_tail, 1e4, 200, 1, 1e3);
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
    }
}
