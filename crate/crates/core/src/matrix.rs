//! Dense matrices, singular value decompositions and matrix norms.
//!
//! Matrices are plain `nalgebra::DMatrix<f64>` values. SVDs come from
//! LAPACK's `dgesdd` with a deterministic sign convention added on top,
//! and the norm layer evaluates every unitarily invariant norm through its
//! symmetric gauge function of the singular values.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Absolute tolerance used when checking `BᵀB = I`.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Entries below this magnitude are skipped when fixing singular vector signs.
const SIGN_EPS: f64 = 1e-12;

/// Builds a matrix from row-major entries.
pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<DenseMatrix> {
    ensure!(rows > 0 && cols > 0, InvalidInput, "matrix shape {rows}x{cols} is empty");
    ensure!(
        entries.len() == rows * cols,
        InvalidInput,
        "{} entries do not fill a {rows}x{cols} matrix",
        entries.len()
    );
    let m = DMatrix::from_row_slice(rows, cols, entries);
    check_finite(&m)?;
    Ok(m)
}

pub fn check_finite(a: &DenseMatrix) -> Result<()> {
    ensure!(
        a.iter().all(|x| x.is_finite()),
        InvalidInput,
        "matrix contains non-finite entries"
    );
    Ok(())
}

/// Which singular triplets an [`SvdFactors`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// All `min(N, n)` triplets.
    Complete,
    /// A thin factorization; every omitted singular value is exactly zero.
    Exact,
    /// Only the leading triplets; omitted singular values are unknown.
    Leading,
}

/// `A = left · diag(singulars) · rightᵀ`, singular values descending.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub left: DenseMatrix,
    pub singulars: DenseVector,
    pub right: DenseMatrix,
    pub coverage: Coverage,
}

impl SvdFactors {
    /// Number of stored triplets.
    pub fn len(&self) -> usize {
        self.singulars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singulars.is_empty()
    }

    pub fn nrows(&self) -> usize {
        self.left.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.right.nrows()
    }

    /// `σ_i` with a 1-based index and `σ_i = 0` past the rank, when known.
    pub fn sigma(&self, i: usize) -> Option<f64> {
        assert!(i >= 1, "singular values are 1-indexed");
        if i <= self.len() {
            Some(self.singulars[i - 1])
        } else if self.coverage != Coverage::Leading {
            Some(0.0)
        } else {
            None
        }
    }

    /// All `min(N, n)` singular values, zero padded for exact thin factors.
    pub fn all_singulars(&self) -> Result<Vec<f64>> {
        let m = self.nrows().min(self.ncols());
        match self.coverage {
            Coverage::Leading if self.len() < m => Err(Error::InvalidInput(format!(
                "only the leading {} of {m} singular values were computed",
                self.len()
            ))),
            _ => {
                let mut v: Vec<f64> = self.singulars.iter().copied().collect();
                v.resize(m, 0.0);
                Ok(v)
            }
        }
    }

    /// Left singular vectors `k..=s` (1-based, inclusive).
    pub fn left_range(&self, k: usize, s: usize) -> Result<DenseMatrix> {
        self.check_range(k, s)?;
        Ok(self.left.columns(k - 1, s - k + 1).into_owned())
    }

    /// Right singular vectors `k..=s` (1-based, inclusive).
    pub fn right_range(&self, k: usize, s: usize) -> Result<DenseMatrix> {
        self.check_range(k, s)?;
        Ok(self.right.columns(k - 1, s - k + 1).into_owned())
    }

    fn check_range(&self, k: usize, s: usize) -> Result<()> {
        ensure!(
            k >= 1 && k <= s && s <= self.len(),
            InvalidParameter,
            "index range {k}..={s} outside the {} stored singular triplets",
            self.len()
        );
        Ok(())
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.left.clone();
        for (j, s) in self.singulars.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.right.transpose()
    }
}

/// Full thin SVD with descending singular values and the sign convention
/// "first non-negligible entry of each left vector is positive".
pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    check_finite(a)?;
    let (left, singulars, right) = gesdd(a, true)?;
    let (mut left, mut right) = (left.expect("vectors requested"), right.expect("vectors requested"));
    canonicalize_signs(&mut left, &mut right);
    Ok(SvdFactors { left, singulars: DVector::from_vec(singulars), right, coverage: Coverage::Complete })
}

/// Singular values only, descending.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_finite(a)?;
    Ok(gesdd(a, false)?.1)
}

type GesddOutput = (Option<DenseMatrix>, Vec<f64>, Option<DenseMatrix>);

/// `dgesdd` on a copy of `a`; returns `(U, σ, V)` with thin factors when
/// `vectors` is set.
fn gesdd(a: &DenseMatrix, vectors: bool) -> Result<GesddOutput> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        let empty = |rows| vectors.then(|| DMatrix::zeros(rows, 0));
        return Ok((empty(m), Vec::new(), empty(n)));
    }
    let dim = |x: usize| i32::try_from(x).map_err(|_| Error::InvalidInput(format!("dimension {x} exceeds LAPACK's range")));
    let (mi, ni, ki) = (dim(m)?, dim(n)?, dim(k)?);
    let mut work_a = a.clone();
    let mut s = vec![0.0; k];
    let (mut u, mut vt) = if vectors { (DMatrix::zeros(m, k), DMatrix::zeros(k, n)) } else { (DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)) };
    let (ldu, ldvt) = if vectors { (mi, ki) } else { (1, 1) };
    let jobz = if vectors { b'S' } else { b'N' } as std::ffi::c_char;
    let mut iwork = vec![0i32; 8 * k];
    let mut info = 0i32;
    let mut call = |work: &mut [f64], lwork: i32, info: &mut i32| {
        // SAFETY: every buffer is sized as dgesdd documents for these
        // leading dimensions and job, and outlives the call.
        unsafe {
            lapack_sys::dgesdd_(
                &jobz,
                &mi,
                &ni,
                work_a.as_mut_ptr(),
                &mi,
                s.as_mut_ptr(),
                u.as_mut_ptr(),
                &ldu,
                vt.as_mut_ptr(),
                &ldvt,
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                info,
            )
        }
    };
    let mut query = [0.0];
    call(&mut query, -1, &mut info);
    ensure!(info == 0, NumericalFailure, "dgesdd workspace query failed with info = {info}");
    let lwork = query[0] as usize;
    let mut work = vec![0.0; lwork.max(1)];
    call(&mut work, dim(lwork.max(1))?, &mut info);
    ensure!(info == 0, NumericalFailure, "dgesdd failed with info = {info}");
    Ok(if vectors { (Some(u), s, Some(vt.transpose())) } else { (None, s, None) })
}

/// Leading `t` singular triplets by randomized subspace iteration.
///
/// Iterates until every Ritz residual `‖A v_i − σ_i u_i‖` is below
/// `1e-12 · σ₁`; falls back to the full SVD when that does not happen within
/// the iteration budget. The sketch uses a fixed seed so results are
/// reproducible.
pub fn truncated_svd(a: &DenseMatrix, t: usize) -> Result<SvdFactors> {
    check_finite(a)?;
    let (rows, cols) = a.shape();
    let m = rows.min(cols);
    ensure!(t >= 1 && t <= m, InvalidParameter, "cannot take {t} of {m} singular triplets");
    // Small problems gain nothing from sketching.
    if m <= 64 || t * 4 >= m {
        return svd(a).map(|f| leading(&f, t));
    }
    let width = (t + 10).min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0F_5B_D0 ^ ((rows as u64) << 32) ^ cols as u64);
    let omega = DMatrix::from_fn(cols, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(&(a * omega));
    let at = a.transpose();

    for _ in 0..40 {
        let z = orthonormalize(&(&at * &q));
        q = orthonormalize(&(a * z));
        let b = q.transpose() * a;
        let small = svd(&b)?;
        let left = &q * &small.left;
        let sigma1 = small.singulars[0];
        let converged = (0..t).all(|i| {
            let resid = a * small.right.column(i) - left.column(i) * small.singulars[i];
            resid.norm() <= 1e-12 * sigma1.max(f64::MIN_POSITIVE)
        });
        if converged || sigma1 == 0.0 {
            let mut left = left.columns(0, t).into_owned();
            let mut right = small.right.columns(0, t).into_owned();
            canonicalize_signs(&mut left, &mut right);
            let singulars = small.singulars.rows(0, t).into_owned();
            return Ok(SvdFactors { left, singulars, right, coverage: Coverage::Leading });
        }
    }
    svd(a).map(|f| leading(&f, t))
}

/// The first `t` triplets of `f`.
pub fn leading(f: &SvdFactors, t: usize) -> SvdFactors {
    let t = t.min(f.len());
    let coverage = if t == f.len() { f.coverage } else { Coverage::Leading };
    SvdFactors {
        left: f.left.columns(0, t).into_owned(),
        singulars: f.singulars.rows(0, t).into_owned(),
        right: f.right.columns(0, t).into_owned(),
        coverage,
    }
}

/// Orthonormal basis of the column space of `y` (thin Householder QR).
pub(crate) fn orthonormalize(y: &DenseMatrix) -> DenseMatrix {
    y.clone().qr().q()
}

pub(crate) fn canonicalize_signs(left: &mut DenseMatrix, right: &mut DenseMatrix) {
    for j in 0..left.ncols() {
        let lead = left.column(j).iter().copied().find(|x| x.abs() > SIGN_EPS);
        if matches!(lead, Some(x) if x < 0.0) {
            left.column_mut(j).neg_mut();
            right.column_mut(j).neg_mut();
        }
    }
}

/// A matrix norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    Operator,
    Frobenius,
    Nuclear,
    Schatten { p: f64 },
    KyFan { k: usize },
    /// Largest row length.
    TwoInf,
    /// Largest absolute entry.
    Max,
}

impl NormSpec {
    pub fn is_unitarily_invariant(&self) -> bool {
        !matches!(self, NormSpec::TwoInf | NormSpec::Max)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NormSpec::Schatten { p } => {
                ensure!(p >= 1.0 && !p.is_nan(), InvalidParameter, "Schatten p = {p} must be >= 1");
            }
            NormSpec::KyFan { k } => {
                ensure!(k >= 1, InvalidParameter, "Ky Fan index must be >= 1");
            }
            _ => {}
        }
        Ok(())
    }

    /// Symmetric gauge function applied to `values` (any order or sign).
    ///
    /// Vectors shorter than a Ky Fan index are treated as zero padded, which
    /// is how one gauge function defines norms on every matrix shape.
    pub fn gauge(&self, values: &[f64]) -> Result<f64> {
        self.validate()?;
        let mut abs: Vec<f64> = values.iter().map(|x| x.abs()).collect();
        Ok(match *self {
            NormSpec::Operator => abs.iter().copied().fold(0.0, f64::max),
            NormSpec::Frobenius => abs.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormSpec::Nuclear => abs.iter().sum(),
            NormSpec::Schatten { p } if p.is_infinite() => abs.iter().copied().fold(0.0, f64::max),
            NormSpec::Schatten { p } => {
                let top = abs.iter().copied().fold(0.0, f64::max);
                if top == 0.0 {
                    0.0
                } else {
                    top * abs.iter().map(|x| (x / top).powf(p)).sum::<f64>().powf(1.0 / p)
                }
            }
            NormSpec::KyFan { k } => {
                abs.sort_by(|a, b| b.total_cmp(a));
                abs.iter().take(k).sum()
            }
            NormSpec::TwoInf | NormSpec::Max => {
                return Err(Error::InvalidParameter(format!(
                    "{self} is not unitarily invariant and has no gauge function"
                )))
            }
        })
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSpec::Operator => write!(f, "operator"),
            NormSpec::Frobenius => write!(f, "frobenius"),
            NormSpec::Nuclear => write!(f, "nuclear"),
            NormSpec::Schatten { p } => write!(f, "schatten({p})"),
            NormSpec::KyFan { k } => write!(f, "kyfan({k})"),
            NormSpec::TwoInf => write!(f, "two_inf"),
            NormSpec::Max => write!(f, "max"),
        }
    }
}

pub fn apply_norm(a: &DenseMatrix, spec: NormSpec) -> Result<f64> {
    spec.validate()?;
    match spec {
        NormSpec::TwoInf => Ok(two_inf_norm(a)),
        NormSpec::Max => Ok(a.iter().fold(0.0, |m, x| m.max(x.abs()))),
        NormSpec::Frobenius => Ok(a.norm()),
        NormSpec::KyFan { k } => {
            let m = a.nrows().min(a.ncols());
            ensure!(k <= m, InvalidParameter, "Ky Fan index {k} exceeds min dimension {m}");
            spec.gauge(&singular_values(a)?)
        }
        _ => spec.gauge(&singular_values(a)?),
    }
}

pub fn two_inf_norm(a: &DenseMatrix) -> f64 {
    a.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

pub fn operator_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Number of `σ_i > tol · σ₁`; zero when `σ₁ = 0`.
pub fn effective_rank(f: &SvdFactors, tol: f64) -> usize {
    let top = f.singulars.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    f.singulars.iter().filter(|&&s| s > tol * top).count()
}

/// Largest absolute deviation of `BᵀB` from the identity.
pub fn orthonormality_defect(b: &DenseMatrix) -> f64 {
    let gram = b.transpose() * b;
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn check_orthonormal(b: &DenseMatrix) -> Result<()> {
    check_finite(b)?;
    let defect = orthonormality_defect(b);
    ensure!(
        defect <= ORTHONORMAL_TOL,
        InvalidInput,
        "columns are not orthonormal (max |BᵀB - I| = {defect:.3e})"
    );
    Ok(())
}

/// `P = B Bᵀ` for a matrix with orthonormal columns.
pub fn orth_projector(b: &DenseMatrix) -> Result<DenseMatrix> {
    check_orthonormal(b)?;
    Ok(b * b.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> DenseMatrix {
        DMatrix::from_diagonal(&DVector::from_column_slice(values))
    }

    #[test]
    fn svd_reconstructs_near_identity_cross_grams() {
        use crate::models::{haar_orthonormal, rng_from_seed};
        let mut rng = rng_from_seed(369);
        for _ in 0..300 {
            let u = haar_orthonormal(7, 6, &mut rng);
            let w = haar_orthonormal(7, 6, &mut rng);
            let v = (&u * 0.7 + w * 0.3).qr().q();
            let c = u.transpose() * v;
            let f = svd(&c).unwrap();
            let rebuilt = &f.left * DMatrix::from_diagonal(&f.singulars) * f.right.transpose();
            assert!((rebuilt - &c).amax() < 1e-13);
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let f = svd(&diag(&[3.0, 1.0])).unwrap();
        assert_eq!(f.singulars.as_slice(), &[3.0, 1.0]);
        assert!((f.left.clone() - DMatrix::identity(2, 2)).abs().max() < 1e-15);
        assert!((f.right.clone() - DMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn svd_of_zero_matrix() {
        let f = svd(&DMatrix::zeros(2, 3)).unwrap();
        assert_eq!(f.singulars.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(5, 4, |_, _| StandardNormal.sample(&mut rng));
        let f = svd(&a).unwrap();
        let resid = (f.reconstruct() - &a).norm();
        assert!(resid <= 1e-8 * a.norm().max(1.0));
        assert!(orthonormality_defect(&f.left) < 1e-10);
        assert!(orthonormality_defect(&f.right) < 1e-10);
        assert!(f.singulars.as_slice().windows(2).all(|w| w[0] >= w[1]));
        for j in 0..f.len() {
            let lead = f.left.column(j).iter().copied().find(|x| x.abs() > SIGN_EPS).unwrap();
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn svd_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(7, 3, |_, _| StandardNormal.sample(&mut rng));
        let f1 = svd(&a).unwrap();
        let f2 = svd(&a).unwrap();
        assert_eq!(f1.left, f2.left);
        assert_eq!(f1.right, f2.right);
    }

    #[test]
    fn truncated_matches_full_on_gapped_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = DMatrix::from_fn(150, 120, |_, _| { let x: f64 = StandardNormal.sample(&mut rng); x * 0.1 });
        let u = orthonormalize(&DMatrix::from_fn(150, 3, |_, _| StandardNormal.sample(&mut rng)));
        let v = orthonormalize(&DMatrix::from_fn(120, 3, |_, _| StandardNormal.sample(&mut rng)));
        let a = &u * diag(&[50.0, 30.0, 20.0]) * v.transpose() + noise;
        let full = svd(&a).unwrap();
        let part = truncated_svd(&a, 3).unwrap();
        assert_eq!(part.coverage, Coverage::Leading);
        for i in 0..3 {
            assert!((full.singulars[i] - part.singulars[i]).abs() < 1e-10 * full.singulars[0]);
            let dot = full.left.column(i).dot(&part.left.column(i));
            assert!((dot - 1.0).abs() < 1e-10, "left vector {i}: dot {dot}");
        }
        assert!(part.all_singulars().is_err());
        assert!(part.sigma(4).is_none());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(apply_norm(&diag(&[3.0, 4.0]), NormSpec::Schatten { p: 2.0 }).unwrap(), 5.0);
        assert!((apply_norm(&DMatrix::identity(2, 2), NormSpec::Nuclear).unwrap() - 2.0).abs() < 1e-15);
        let a = from_row_major(2, 2, &[3.0, 4.0, 0.0, 1.0]).unwrap();
        assert_eq!(apply_norm(&a, NormSpec::TwoInf).unwrap(), 5.0);
        assert_eq!(apply_norm(&a, NormSpec::Max).unwrap(), 4.0);
    }

    #[test]
    fn kyfan_index_is_checked() {
        let a = DMatrix::<f64>::identity(2, 3);
        assert!(matches!(apply_norm(&a, NormSpec::KyFan { k: 3 }), Err(Error::InvalidParameter(_))));
        assert!(matches!(apply_norm(&a, NormSpec::Schatten { p: 0.5 }), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn gauge_rejects_non_invariant_norms() {
        assert!(NormSpec::TwoInf.gauge(&[1.0]).is_err());
        assert!(NormSpec::Max.gauge(&[1.0]).is_err());
    }

    #[test]
    fn effective_rank_examples() {
        let f = |s: &[f64]| SvdFactors {
            left: DMatrix::zeros(3, s.len()),
            singulars: DVector::from_column_slice(s),
            right: DMatrix::zeros(3, s.len()),
            coverage: Coverage::Complete,
        };
        assert_eq!(effective_rank(&f(&[5.0, 3.0, 1e-14]), 1e-10), 2);
        assert_eq!(effective_rank(&f(&[0.0, 0.0]), 1e-10), 0);
        assert_eq!(effective_rank(&f(&[2.0, 1.0]), 0.0), 2);
    }

    #[test]
    fn projector_examples() {
        let e1 = from_row_major(2, 1, &[1.0, 0.0]).unwrap();
        assert_eq!(orth_projector(&e1).unwrap(), from_row_major(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap());
        assert_eq!(orth_projector(&DMatrix::identity(2, 2)).unwrap(), DMatrix::identity(2, 2));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p = orth_projector(&from_row_major(2, 1, &[h, h]).unwrap()).unwrap();
        assert!((p - DMatrix::from_element(2, 2, 0.5)).abs().max() < 1e-15);
        let bad = from_row_major(2, 1, &[1.0, 1.0]).unwrap();
        assert!(matches!(orth_projector(&bad), Err(Error::InvalidInput(_))));
    }
}
