//! Principal angles, sin-Θ distances and Procrustes alignment.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::matrix::{self, two_inf_norm, DenseMatrix, DenseVector, NormSpec};

/// A matrix with orthonormal columns spanning a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    basis: DenseMatrix,
}

impl OrthonormalBasis {
    /// Wraps `basis` after checking `BᵀB = I` to [`matrix::ORTHONORMAL_TOL`].
    pub fn new(basis: DenseMatrix) -> Result<Self> {
        ensure!(basis.ncols() >= 1, InvalidInput, "a basis needs at least one column");
        ensure!(
            basis.ncols() <= basis.nrows(),
            InvalidInput,
            "{} columns cannot be orthonormal in dimension {}",
            basis.ncols(),
            basis.nrows()
        );
        matrix::check_orthonormal(&basis)?;
        Ok(Self { basis })
    }

    /// Orthonormal basis for the column span of an arbitrary full-rank matrix.
    pub fn from_span(columns: &DenseMatrix) -> Result<Self> {
        matrix::check_finite(columns)?;
        Self::new(matrix::orthonormalize(columns))
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.basis
    }

    pub fn projector(&self) -> DenseMatrix {
        &self.basis * self.basis.transpose()
    }

    /// `‖B‖_{2,∞}`, the incoherence of the basis.
    pub fn two_inf(&self) -> f64 {
        two_inf_norm(&self.basis)
    }

    /// `w − B Bᵀ w` for every column `w` of `m`.
    pub fn residual(&self, m: &DenseMatrix) -> DenseMatrix {
        m - &self.basis * (self.basis.transpose() * m)
    }
}

/// Principal angles `0 ≤ θ₁ ≤ … ≤ θ_d ≤ π/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSpectrum {
    angles: Vec<f64>,
}

impl AngleSpectrum {
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn sines(&self) -> Vec<f64> {
        self.angles.iter().map(|t| t.sin()).collect()
    }

    pub fn cosines(&self) -> Vec<f64> {
        self.angles.iter().map(|t| t.cos()).collect()
    }

    pub fn largest(&self) -> f64 {
        self.angles.last().copied().unwrap_or(0.0)
    }
}

fn check_pair(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<()> {
    ensure!(
        u.ambient_dim() == v.ambient_dim() && u.dim() == v.dim(),
        InvalidInput,
        "subspaces of shape {}x{} and {}x{} are not comparable",
        u.ambient_dim(),
        u.dim(),
        v.ambient_dim(),
        v.dim()
    );
    Ok(())
}

/// Principal angles between two subspaces of equal dimension.
///
/// Cosines come from the singular values of `UᵀV` and sines from those of
/// `V − U(UᵀV)`. Each angle is recovered from whichever of the two is
/// better conditioned, so small angles keep full relative accuracy instead
/// of the `√ε` floor of a plain arccos.
pub fn principal_angles(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<AngleSpectrum> {
    check_pair(u, v)?;
    let cross = u.basis().transpose() * v.basis();
    let cosines = matrix::singular_values(&cross)?; // descending
    let mut sines = matrix::singular_values(&(v.basis() - u.basis() * &cross))?;
    sines.reverse(); // ascending, pairs with descending cosines
    let mut angles = cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            let s = s.clamp(0.0, 1.0);
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect::<Vec<_>>();
    angles.sort_by(f64::total_cmp);
    Ok(AngleSpectrum { angles })
}

/// `|||sin∠(U, V)|||` for a unitarily invariant norm.
pub fn sin_theta_norm(u: &OrthonormalBasis, v: &OrthonormalBasis, spec: NormSpec) -> Result<f64> {
    ensure!(
        spec.is_unitarily_invariant(),
        InvalidParameter,
        "sin-theta distance needs a unitarily invariant norm, got {spec}"
    );
    spec.gauge(&principal_angles(u, v)?.sines())
}

/// `|||P_U − P_V|||`, whose singular values are the sines of the principal
/// angles, each repeated twice.
pub fn projector_distance(u: &OrthonormalBasis, v: &OrthonormalBasis, spec: NormSpec) -> Result<f64> {
    ensure!(
        spec.is_unitarily_invariant(),
        InvalidParameter,
        "projector distance needs a unitarily invariant norm, got {spec}"
    );
    let doubled: Vec<f64> = principal_angles(u, v)?
        .sines()
        .into_iter()
        .flat_map(|s| [s, s])
        .collect();
    spec.gauge(&doubled)
}

/// Orthogonal `O = O₁O₂ᵀ` from the SVD `UᵀV = O₁ cos∠(U,V) O₂ᵀ`, so that
/// `U·O` is the closest rotation of `U` onto `V` in Frobenius norm.
pub fn procrustes_align(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<DenseMatrix> {
    check_pair(u, v)?;
    polar_factor(&(u.basis().transpose() * v.basis()))
}

/// Orthogonal polar factor `O₁O₂ᵀ` of a square matrix with SVD `O₁ S O₂ᵀ`.
pub fn polar_factor(m: &DenseMatrix) -> Result<DenseMatrix> {
    ensure!(m.is_square(), InvalidInput, "polar factor needs a square matrix");
    let f = matrix::svd(m)?;
    Ok(&f.left * f.right.transpose())
}

/// `|||U·O − V|||` with `O` the Procrustes alignment.
///
/// For the Frobenius and operator norms this lies between
/// `|||sin∠(U,V)|||` and `√2·|||sin∠(U,V)|||`; for other norms the same
/// alignment is used without that guarantee.
pub fn aligned_distance(u: &OrthonormalBasis, v: &OrthonormalBasis, spec: NormSpec) -> Result<f64> {
    ensure!(
        spec.is_unitarily_invariant(),
        InvalidParameter,
        "aligned distance needs a unitarily invariant norm, got {spec}"
    );
    let o = procrustes_align(u, v)?;
    matrix::apply_norm(&(u.basis() * o - v.basis()), spec)
}

/// How the reference subspace is matched to `W` in [`two_inf_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// `‖W − P_U W‖_{2,∞}`.
    Projector,
    /// `‖W − U·O‖_{2,∞}` with the Procrustes alignment `O` of `(U, W)`.
    Aligned,
}

pub fn two_inf_residual(u: &OrthonormalBasis, w: &OrthonormalBasis, mode: ResidualMode) -> Result<f64> {
    ensure!(
        u.ambient_dim() == w.ambient_dim(),
        InvalidInput,
        "ambient dimensions {} and {} differ",
        u.ambient_dim(),
        w.ambient_dim()
    );
    match mode {
        ResidualMode::Projector => {
            ensure!(
                u.dim() >= w.dim(),
                InvalidInput,
                "projector residual needs dim U ({}) >= dim W ({})",
                u.dim(),
                w.dim()
            );
            Ok(two_inf_norm(&u.residual(w.basis())))
        }
        ResidualMode::Aligned => {
            let o = procrustes_align(u, w)?;
            Ok(two_inf_norm(&(w.basis() - u.basis() * o)))
        }
    }
}

/// Both sides of one alignment inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
}

impl Inequality {
    /// `rhs − lhs`, negative when the inequality fails.
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self, rel_tol: f64) -> bool {
        self.lhs <= self.rhs + rel_tol * self.rhs.abs().max(1.0)
    }
}

/// The three inequalities relating the Procrustes residual `V − U·O` to the
/// projector residual `V − P_U V`, evaluated at a row direction `x` (unit,
/// ambient) and a column direction `y` (unit, subspace dimension).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentInequalities {
    pub row: Inequality,
    pub bilinear: Inequality,
    pub two_inf: Inequality,
}

impl AlignmentInequalities {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.row.holds(rel_tol) && self.bilinear.holds(rel_tol) && self.two_inf.holds(rel_tol)
    }
}

pub fn alignment_inequalities(
    u: &OrthonormalBasis,
    v: &OrthonormalBasis,
    x: &DenseVector,
    y: &DenseVector,
) -> Result<AlignmentInequalities> {
    check_pair(u, v)?;
    ensure!(
        x.len() == u.ambient_dim() && y.len() == u.dim(),
        DimensionMismatch,
        "x must have length {} and y length {}",
        u.ambient_dim(),
        u.dim()
    );
    let o = procrustes_align(u, v)?;
    let aligned = v.basis() - u.basis() * o;
    let projected = u.residual(v.basis());
    let sin2 = principal_angles(u, v)?.largest().sin().powi(2);
    let xu = (x.transpose() * u.basis()).norm();
    let xa = x.transpose() * &aligned;
    let xp = x.transpose() * &projected;
    Ok(AlignmentInequalities {
        row: Inequality { lhs: xa.norm(), rhs: xp.norm() + xu * sin2 },
        bilinear: Inequality { lhs: (&xa * y)[0].abs(), rhs: (&xp * y)[0].abs() + xu * sin2 },
        two_inf: Inequality {
            lhs: two_inf_norm(&aligned),
            rhs: two_inf_norm(&projected) + u.two_inf() * sin2,
        },
    })
}

impl From<OrthonormalBasis> for DenseMatrix {
    fn from(b: OrthonormalBasis) -> Self {
        b.basis
    }
}

impl TryFrom<DenseMatrix> for OrthonormalBasis {
    type Error = Error;

    fn try_from(m: DenseMatrix) -> Result<Self> {
        Self::new(m)
    }
}
