use super::empirical::{left_pair, projected_singulars, right_pair};
use super::report::{BoundReport, PreconditionFlags};
use crate::error::{ensure, Result};
use crate::matrix::{apply_norm, NormSpec};
use crate::models::PerturbationInstance;
use crate::subspace::sin_theta_norm;

fn require_invariant(spec: NormSpec) -> Result<()> {
    spec.validate()?;
    ensure!(
        spec.is_unitarily_invariant(),
        InvalidParameter,
        "the bound needs a unitarily invariant norm, got {spec}"
    );
    Ok(())
}

/// `|||diag(σ_i − σ̃_i)||| ≤ |||E|||`. Needs the complete spectrum of `Ã`.
pub fn mirsky_check(inst: &PerturbationInstance, spec: NormSpec) -> Result<BoundReport> {
    require_invariant(spec)?;
    let sigma = inst.svd_a.all_singulars()?;
    let sigma_tilde = inst.svd_sum.all_singulars()?;
    let diffs: Vec<f64> = sigma.iter().zip(&sigma_tilde).map(|(a, b)| (a - b).abs()).collect();
    let bound = apply_norm(&inst.e, spec)?;
    Ok(BoundReport::new(format!("mirsky[{spec}]"), Some(bound), 1.0, PreconditionFlags::ALL)
        .with_empirical(spec.gauge(&diffs)?))
}

/// Wedin's bound on `sin∠(U_k, Ũ_k)` and `sin∠(V_k, Ṽ_k)`:
/// `max{|||P_{Ũ_k⊥} E P_{V_k}|||, |||P_{Ṽ_k⊥} Eᵀ P_{U_k}|||} / δ̂_k` with gap
/// `δ̂_k = σ_k − σ̃_{k+1}`. The residuals project the signal singular vectors
/// off the observed subspaces, which is the pairing that matches this gap.
pub fn wedin_check(inst: &PerturbationInstance, k: usize, spec: NormSpec) -> Result<BoundReport> {
    require_invariant(spec)?;
    ensure!(
        k >= 1 && k <= inst.svd_a.len(),
        InvalidParameter,
        "k = {k} outside the {} stored signal triplets",
        inst.svd_a.len()
    );
    let id = format!("wedin[{spec};k={k}]");
    let sigma_k = inst.svd_a.singulars[k - 1];
    let next = inst.svd_sum.sigma(k + 1).ok_or_else(|| {
        crate::Error::InvalidInput(format!("σ̃_{} of the observation was not computed", k + 1))
    })?;
    let gap = sigma_k - next;
    if gap <= 0.0 {
        let pre = PreconditionFlags { gap_ok: false, ..PreconditionFlags::ALL };
        return Ok(BoundReport::new(id, None, 1.0, pre));
    }

    let (u, ut) = left_pair(inst, 1, k)?;
    let (v, vt) = right_pair(inst, 1, k)?;
    let left = spec.gauge(&projected_singulars(&ut, &inst.e, v.basis())?)?;
    let right = spec.gauge(&projected_singulars(&vt, &inst.e.transpose(), u.basis())?)?;
    let bound = left.max(right) / gap;
    let empirical = sin_theta_norm(&u, &ut, spec)?.max(sin_theta_norm(&v, &vt, spec)?);
    Ok(BoundReport::new(id, Some(bound), 1.0, PreconditionFlags::ALL).with_empirical(empirical))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{from_row_major, DenseMatrix};
    use crate::models::{gen_gaussian, perturb};

    #[test]
    fn mirsky_zero_noise() {
        let a = gen_gaussian(4, 3, 1);
        let inst = perturb(&a, &DenseMatrix::zeros(4, 3)).unwrap();
        let r = mirsky_check(&inst, NormSpec::Nuclear).unwrap();
        assert!(r.empirical.unwrap() < 1e-12);
        assert_eq!(r.bound, Some(0.0));
        assert_eq!(r.violated, Some(false));
    }

    #[test]
    fn mirsky_diagonal_equality() {
        let a = from_row_major(2, 2, &[3.0, 0.0, 0.0, 1.0]).unwrap();
        let e = from_row_major(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        let r = mirsky_check(&perturb(&a, &e).unwrap(), NormSpec::Operator).unwrap();
        assert!((r.empirical.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.bound.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.violated, Some(false));
    }

    #[test]
    fn mirsky_random_nuclear() {
        let inst = perturb(&gen_gaussian(30, 20, 2), &(gen_gaussian(30, 20, 3) * 0.5)).unwrap();
        let r = mirsky_check(&inst, NormSpec::Nuclear).unwrap();
        assert_eq!(r.violated, Some(false));
        assert!(mirsky_check(&inst, NormSpec::TwoInf).is_err());
    }

    #[test]
    fn wedin_rank_one_orthogonal_noise() {
        // A = 2 e₁e₁ᵀ, E = 0.5 e₂e₃ᵀ: Ã keeps the same top pair exactly.
        let mut a = DenseMatrix::zeros(3, 3);
        a[(0, 0)] = 2.0;
        let mut e = DenseMatrix::zeros(3, 3);
        e[(1, 2)] = 0.5;
        let r = wedin_check(&perturb(&a, &e).unwrap(), 1, NormSpec::Frobenius).unwrap();
        assert!(r.empirical.unwrap() < 1e-12);
        assert!(r.bound.unwrap() < 1e-12);
        assert_eq!(r.violated, Some(false));
    }

    #[test]
    fn wedin_zero_noise() {
        let a = from_row_major(3, 2, &[3.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let r = wedin_check(&perturb(&a, &DenseMatrix::zeros(3, 2)).unwrap(), 1, NormSpec::Operator).unwrap();
        assert_eq!(r.bound, Some(0.0));
        assert!(r.empirical.unwrap() < 1e-12);
    }

    #[test]
    fn wedin_holds_where_the_observed_side_residual_does_not() {
        // Residuals P_{U_1⊥} E P_{Ṽ_1} over the same gap give 0.795 < sin∠ = 0.851.
        let a = from_row_major(2, 2, &[9.0, 0.0, 0.0, 0.0]).unwrap();
        let e = from_row_major(2, 2, &[-5.0, -6.0, 0.0, -2.0]).unwrap();
        let r = wedin_check(&perturb(&a, &e).unwrap(), 1, NormSpec::Operator).unwrap();
        assert!((r.empirical.unwrap() - 0.850_650_808_352).abs() < 1e-9);
        assert!((r.bound.unwrap() - 0.935_351_044_459).abs() < 1e-9);
        assert_eq!(r.violated, Some(false));
    }

    #[test]
    fn wedin_without_gap() {
        let a = from_row_major(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let e = from_row_major(2, 2, &[0.0, 0.0, 0.0, 2.0]).unwrap();
        let r = wedin_check(&perturb(&a, &e).unwrap(), 1, NormSpec::Operator).unwrap();
        assert!(!r.preconditions.gap_ok);
        assert_eq!(r.bound, None);
        assert_eq!(r.violated, None);
    }
}
