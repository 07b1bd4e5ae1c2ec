use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::matrix::{self, two_inf_norm, DenseMatrix, NormSpec};
use crate::models::PerturbationInstance;
use crate::subspace::{procrustes_align, sin_theta_norm, OrthonormalBasis};

/// Left-hand sides of the perturbation theorems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmpiricalQuantity {
    /// `max(|||sin∠(U_{k,s}, Ũ_{k,s})|||, |||sin∠(V_{k,s}, Ṽ_{k,s})|||)`.
    SinTheta { k: usize, s: usize, norm: NormSpec },
    /// `‖Ũ_{k,s} − P_{U_{k,s}} Ũ_{k,s}‖_{2,∞}`.
    TwoInfProj { k: usize, s: usize },
    /// `‖Ũ_{k,s} − U_{k,s}O‖_{2,∞}` with `O` the Procrustes alignment.
    TwoInfAligned { k: usize, s: usize },
    /// `‖Ũ_{k,s} − U_{k,s}O‖_max`.
    MaxAligned { k: usize, s: usize },
    /// `‖xᵀ(Ũ_{k,s} − P_{U_{k,s}} Ũ_{k,s})‖`.
    Linear { x: Vec<f64>, k: usize, s: usize },
    /// `|xᵀ(Ũ_{k,s} − P_{U_{k,s}} Ũ_{k,s}) y|`.
    Bilinear { x: Vec<f64>, y: Vec<f64>, k: usize, s: usize },
    /// `‖Ũ_{k,s}D̃_{k,s} − P_{U_{k,s}} Ũ_{k,s}D̃_{k,s}‖_{2,∞}`.
    Weighted2Inf { k: usize, s: usize },
    /// `‖Ũ_rD̃_r − U·O·D̃_r‖_{2,∞}` with `O` aligning `U` to `Ũ_r`.
    WeightedAligned,
    /// `σ_k − σ_{k+1}` of the signal.
    SvGap { k: usize },
}

pub fn empirical_quantity(inst: &PerturbationInstance, which: &EmpiricalQuantity) -> Result<f64> {
    use EmpiricalQuantity as Q;
    match which {
        Q::SinTheta { k, s, norm } => {
            let (u, ut) = left_pair(inst, *k, *s)?;
            let (v, vt) = right_pair(inst, *k, *s)?;
            Ok(sin_theta_norm(&u, &ut, *norm)?.max(sin_theta_norm(&v, &vt, *norm)?))
        }
        Q::TwoInfProj { k, s } => {
            let (u, ut) = left_pair(inst, *k, *s)?;
            Ok(two_inf_norm(&u.residual(ut.basis())))
        }
        Q::TwoInfAligned { k, s } => Ok(two_inf_norm(&aligned_residual(inst, *k, *s)?)),
        Q::MaxAligned { k, s } => Ok(aligned_residual(inst, *k, *s)?.amax()),
        Q::Linear { x, k, s } => {
            let (u, ut) = left_pair(inst, *k, *s)?;
            ensure!(x.len() == u.ambient_dim(), DimensionMismatch, "x must have length {}", u.ambient_dim());
            Ok((DVector::from_column_slice(x).transpose() * u.residual(ut.basis())).norm())
        }
        Q::Bilinear { x, y, k, s } => {
            let (u, ut) = left_pair(inst, *k, *s)?;
            ensure!(
                x.len() == u.ambient_dim() && y.len() == u.dim(),
                DimensionMismatch,
                "bilinear form needs x of length {} and y of length {}",
                u.ambient_dim(),
                u.dim()
            );
            let d = u.residual(ut.basis());
            Ok((DVector::from_column_slice(x).transpose() * d * DVector::from_column_slice(y))[0].abs())
        }
        Q::Weighted2Inf { k, s } => {
            let (u, ut) = left_pair(inst, *k, *s)?;
            let weighted = scale_columns(ut.basis(), &tilde_singulars(inst, *k, *s)?);
            Ok(two_inf_norm(&u.residual(&weighted)))
        }
        Q::WeightedAligned => {
            let r = inst.signal_rank();
            let (u, ut) = left_pair(inst, 1, r)?;
            let o = procrustes_align(&u, &ut)?;
            let d = tilde_singulars(inst, 1, r)?;
            Ok(two_inf_norm(&scale_columns(&(ut.basis() - u.basis() * o), &d)))
        }
        Q::SvGap { k } => {
            ensure!(*k >= 1 && *k <= inst.svd_a.len(), InvalidParameter, "gap index {k} outside the signal rank");
            Ok(inst.svd_a.sigma(*k).unwrap_or(0.0) - inst.svd_a.sigma(k + 1).unwrap_or(0.0))
        }
    }
}

/// `(U_{k,s}, Ũ_{k,s})`.
pub fn left_pair(inst: &PerturbationInstance, k: usize, s: usize) -> Result<(OrthonormalBasis, OrthonormalBasis)> {
    Ok((
        OrthonormalBasis::new(inst.svd_a.left_range(k, s)?)?,
        OrthonormalBasis::new(inst.svd_sum.left_range(k, s)?)?,
    ))
}

/// `(V_{k,s}, Ṽ_{k,s})`.
pub fn right_pair(inst: &PerturbationInstance, k: usize, s: usize) -> Result<(OrthonormalBasis, OrthonormalBasis)> {
    Ok((
        OrthonormalBasis::new(inst.svd_a.right_range(k, s)?)?,
        OrthonormalBasis::new(inst.svd_sum.right_range(k, s)?)?,
    ))
}

/// Singular values of `(I − P_X) M W` for orthonormal `W`, i.e. those of
/// `P_{X⊥} M P_W`.
pub fn projected_singulars(x: &OrthonormalBasis, m: &DenseMatrix, w: &DenseMatrix) -> Result<Vec<f64>> {
    matrix::singular_values(&x.residual(&(m * w)))
}

/// `|||P_{U⊥} E P_{Ṽ_{k,s}} ⊕ P_{V⊥} Eᵀ P_{Ũ_{k,s}}|||` with `U, V` the
/// full signal factors.
pub fn cross_term_direct_sum(inst: &PerturbationInstance, k: usize, s: usize, spec: NormSpec) -> Result<f64> {
    let (left, right) = cross_term_parts(inst, k, s)?;
    spec.gauge(&[left, right].concat())
}

/// `|||P_{U⊥} E P_{Ṽ_{k,s}}||| + |||P_{V⊥} Eᵀ P_{Ũ_{k,s}}|||`.
pub fn cross_term_sum(inst: &PerturbationInstance, k: usize, s: usize, spec: NormSpec) -> Result<f64> {
    let (left, right) = cross_term_parts(inst, k, s)?;
    Ok(spec.gauge(&left)? + spec.gauge(&right)?)
}

fn cross_term_parts(inst: &PerturbationInstance, k: usize, s: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = inst.signal_rank();
    let u = OrthonormalBasis::new(inst.svd_a.left_range(1, r)?)?;
    let v = OrthonormalBasis::new(inst.svd_a.right_range(1, r)?)?;
    let left = projected_singulars(&u, &inst.e, &inst.svd_sum.right_range(k, s)?)?;
    let right = projected_singulars(&v, &inst.e.transpose(), &inst.svd_sum.left_range(k, s)?)?;
    Ok((left, right))
}

fn aligned_residual(inst: &PerturbationInstance, k: usize, s: usize) -> Result<DenseMatrix> {
    let (u, ut) = left_pair(inst, k, s)?;
    let o = procrustes_align(&u, &ut)?;
    Ok(ut.basis() - u.basis() * o)
}

fn tilde_singulars(inst: &PerturbationInstance, k: usize, s: usize) -> Result<Vec<f64>> {
    ensure!(s <= inst.svd_sum.len(), InvalidParameter, "index {s} outside the computed spectrum");
    Ok((k..=s).map(|i| inst.svd_sum.singulars[i - 1]).collect())
}

fn scale_columns(m: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    let mut out = m.clone();
    for (j, s) in d.iter().enumerate() {
        out.column_mut(j).scale_mut(*s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::from_row_major;
    use crate::models::perturb;

    fn rank_one_rotated(eps: f64) -> PerturbationInstance {
        let a = from_row_major(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let e = from_row_major(2, 2, &[0.0, 0.0, eps, 0.0]).unwrap();
        perturb(&a, &e).unwrap()
    }

    #[test]
    fn zero_noise_gives_zero() {
        let a = from_row_major(3, 2, &[3.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let inst = perturb(&a, &DenseMatrix::zeros(3, 2)).unwrap();
        let qs = [
            EmpiricalQuantity::SinTheta { k: 1, s: 2, norm: NormSpec::Frobenius },
            EmpiricalQuantity::TwoInfProj { k: 1, s: 2 },
            EmpiricalQuantity::TwoInfAligned { k: 1, s: 1 },
            EmpiricalQuantity::MaxAligned { k: 1, s: 2 },
            EmpiricalQuantity::Bilinear { x: vec![1.0, 0.0, 0.0], y: vec![0.6, 0.8], k: 1, s: 2 },
            EmpiricalQuantity::Weighted2Inf { k: 1, s: 2 },
            EmpiricalQuantity::WeightedAligned,
        ];
        for q in &qs {
            assert!(empirical_quantity(&inst, q).unwrap() < 1e-12, "{q:?}");
        }
        assert_eq!(empirical_quantity(&inst, &EmpiricalQuantity::SvGap { k: 1 }).unwrap(), 2.0);
        assert_eq!(empirical_quantity(&inst, &EmpiricalQuantity::SvGap { k: 2 }).unwrap(), 1.0);
    }

    #[test]
    fn rank_one_rotation_closed_form() {
        // [[1,0],[ε,0]] has left vector (1,ε)/√(1+ε²) and right vector e₁.
        let eps = 0.3;
        let inst = rank_one_rotated(eps);
        let expected = eps / (1.0 + eps * eps).sqrt();
        let q = EmpiricalQuantity::SinTheta { k: 1, s: 1, norm: NormSpec::Operator };
        assert!((empirical_quantity(&inst, &q).unwrap() - expected).abs() < 1e-12);
        let proj = empirical_quantity(&inst, &EmpiricalQuantity::TwoInfProj { k: 1, s: 1 }).unwrap();
        assert!((proj - expected).abs() < 1e-12);
    }

    #[test]
    fn cross_terms_vanish_without_noise_leakage() {
        // Noise supported on the signal block has no cross component.
        let a = from_row_major(3, 3, &[5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let e = from_row_major(3, 3, &[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let inst = perturb(&a, &e).unwrap();
        let mut inst = inst;
        inst.svd_a = crate::matrix::leading(&inst.svd_a, 1);
        inst.svd_a.coverage = crate::matrix::Coverage::Exact;
        assert!(cross_term_direct_sum(&inst, 1, 1, NormSpec::Frobenius).unwrap() < 1e-12);
        assert!(cross_term_sum(&inst, 1, 1, NormSpec::Operator).unwrap() < 1e-12);
    }
}
