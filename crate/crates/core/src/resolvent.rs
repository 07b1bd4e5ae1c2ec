//! Resolvent of the symmetric linearization `𝓔 = [[0, E], [Eᵀ, 0]]`.
//!
//! With the thin SVD `E = P diag(η) Qᵀ`, the linearization has eigenvalues
//! `±η_i` with eigenvectors `(p_i; ±q_i)/√2` and a null space spanned by
//! `span(P)^⊥ ⊕ span(Q)^⊥`. Every quantity below is evaluated from that
//! structure, so no `(N+n) × (N+n)` matrix is formed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::matrix::{self, DenseMatrix, DenseVector};

/// Singular values (and optionally vectors) of a noise matrix `E`.
#[derive(Debug, Clone)]
pub struct LinearizationSpectrum {
    rows: usize,
    cols: usize,
    /// Singular values of `E`, descending, length `min(N, n)`.
    eta: Vec<f64>,
    left: Option<DenseMatrix>,
    right: Option<DenseMatrix>,
}

impl LinearizationSpectrum {
    /// Full spectral data of `E`, needed for bilinear forms.
    pub fn from_noise(e: &DenseMatrix) -> Result<Self> {
        let f = matrix::svd(e)?;
        Ok(Self {
            rows: e.nrows(),
            cols: e.ncols(),
            eta: f.singulars.iter().copied().collect(),
            left: Some(f.left),
            right: Some(f.right),
        })
    }

    /// Singular values only; enough for `φ₁`, `φ₂` and norms of `G`.
    pub fn from_singular_values(rows: usize, cols: usize, mut eta: Vec<f64>) -> Result<Self> {
        let m = rows.min(cols);
        ensure!(rows >= 1 && cols >= 1, InvalidInput, "noise shape must be positive");
        ensure!(eta.len() <= m, InvalidInput, "{} singular values for a {rows}x{cols} matrix", eta.len());
        ensure!(
            eta.iter().all(|x| x.is_finite() && *x >= 0.0),
            InvalidInput,
            "singular values must be finite and nonnegative"
        );
        eta.sort_by(|a, b| b.total_cmp(a));
        eta.resize(m, 0.0);
        Ok(Self { rows, cols, eta, left: None, right: None })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `‖E‖ = η₁`.
    pub fn norm(&self) -> f64 {
        self.eta.first().copied().unwrap_or(0.0)
    }

    /// `2b(√N + √n)`, the radius beyond which the resolvent lemmas apply.
    pub fn regime_radius(&self, b: f64) -> f64 {
        2.0 * b * ((self.rows as f64).sqrt() + (self.cols as f64).sqrt())
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        ensure!(
            z.norm() > self.norm(),
            Domain,
            "|z| = {} does not exceed ‖E‖ = {}",
            z.norm(),
            self.norm()
        );
        Ok(())
    }

    /// `Σ_i z/(z² − η_i²)`, the part of both block traces carried by the
    /// singular pairs.
    fn paired_trace(&self, z: Complex64) -> Complex64 {
        let z2 = z * z;
        self.eta.iter().map(|&h| z / (z2 - h * h)).sum()
    }
}

/// `φ₁`, `φ₂`, `φ = φ₁φ₂`, `α` and `β` at one point `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub z: Complex64,
    pub phi1: Complex64,
    pub phi2: Complex64,
    pub varphi: Complex64,
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl ResolventProbe {
    /// `φ₁ − φ₂ + (n − N)/z`, zero in exact arithmetic.
    pub fn identity_residual(&self, rows: usize, cols: usize) -> Complex64 {
        self.phi1 - self.phi2 + (cols as f64 - rows as f64) / self.z
    }
}

/// `φ₁(z) = z − tr 𝓘ᵈG(z)` and `φ₂(z) = z − tr 𝓘ᵘG(z)`.
pub fn phi_values(spec: &LinearizationSpectrum, z: Complex64) -> Result<ResolventProbe> {
    spec.check_domain(z)?;
    let m = spec.eta.len() as f64;
    let paired = spec.paired_trace(z);
    let trace_up = paired + (spec.rows as f64 - m) / z;
    let trace_down = paired + (spec.cols as f64 - m) / z;
    let phi1 = z - trace_down;
    let phi2 = z - trace_up;
    Ok(ResolventProbe {
        z,
        phi1,
        phi2,
        varphi: phi1 * phi2,
        alpha: 0.5 * (1.0 / phi1 + 1.0 / phi2),
        beta: 0.5 * (1.0 / phi1 - 1.0 / phi2),
    })
}

/// `φ(x)` at a real point `x > ‖E‖`.
pub fn varphi_real(spec: &LinearizationSpectrum, x: f64) -> Result<f64> {
    Ok(phi_values(spec, Complex64::new(x, 0.0))?.varphi.re)
}

fn split(spec: &LinearizationSpectrum, v: &DenseVector) -> Result<(DenseVector, DenseVector)> {
    ensure!(
        v.len() == spec.rows + spec.cols,
        DimensionMismatch,
        "vector of length {} does not match N + n = {}",
        v.len(),
        spec.rows + spec.cols
    );
    Ok((v.rows(0, spec.rows).into_owned(), v.rows(spec.rows, spec.cols).into_owned()))
}

fn vectors(spec: &LinearizationSpectrum) -> Result<(&DenseMatrix, &DenseMatrix)> {
    match (&spec.left, &spec.right) {
        (Some(p), Some(q)) => Ok((p, q)),
        _ => Err(Error::InvalidInput(
            "bilinear forms need singular vectors; build the spectrum with from_noise".into(),
        )),
    }
}

/// `xᵀ G(z) y` for vectors in `ℝ^{N+n}`.
pub fn resolvent_bilinear(
    spec: &LinearizationSpectrum,
    z: Complex64,
    x: &DenseVector,
    y: &DenseVector,
) -> Result<Complex64> {
    spec.check_domain(z)?;
    let (p, q) = vectors(spec)?;
    let (xu, xd) = split(spec, x)?;
    let (yu, yd) = split(spec, y)?;
    let (a, b) = (p.transpose() * &xu, q.transpose() * &xd);
    let (c, d) = (p.transpose() * &yu, q.transpose() * &yd);
    let z2 = z * z;
    let mut total = (xu.dot(&yu) - a.dot(&c) + xd.dot(&yd) - b.dot(&d)) / z;
    for (i, &h) in spec.eta.iter().enumerate() {
        let denom = z2 - h * h;
        total += (z * (a[i] * c[i] + b[i] * d[i]) + h * (a[i] * d[i] + b[i] * c[i])) / denom;
    }
    Ok(total)
}

/// `|xᵀ(G(z) − Φ(z))y|` where `Φ = diag(I_N/φ₁, I_n/φ₂)`.
pub fn local_law_gap(spec: &LinearizationSpectrum, z: Complex64, x: &DenseVector, y: &DenseVector) -> Result<f64> {
    let g = resolvent_bilinear(spec, z, x, y)?;
    let probe = phi_values(spec, z)?;
    let (xu, xd) = split(spec, x)?;
    let (yu, yd) = split(spec, y)?;
    let phi_form = xu.dot(&yu) / probe.phi1 + xd.dot(&yd) / probe.phi2;
    Ok((g - phi_form).norm())
}

/// `5b²/(b−1)² · √((K+1) ln(N+n)) / |z|²`.
pub fn local_law_threshold(rows: usize, cols: usize, b: f64, k_exp: f64, z: Complex64) -> f64 {
    let c = 5.0 * b * b / ((b - 1.0) * (b - 1.0));
    c * ((k_exp + 1.0) * ((rows + cols) as f64).ln()).sqrt() / z.norm_sqr()
}

/// `1 − 9(N+n)^{−(K+1)}`, floored at zero.
pub fn local_law_probability(rows: usize, cols: usize, k_exp: f64) -> f64 {
    (1.0 - 9.0 * ((rows + cols) as f64).powf(-(k_exp + 1.0))).max(0.0)
}

/// Columns `(u_j; v_j)/√2` for every `j`, followed by `(u_j; −v_j)/√2`.
pub fn linearized_basis(u: &DenseMatrix, v: &DenseMatrix) -> Result<DenseMatrix> {
    ensure!(u.ncols() == v.ncols(), DimensionMismatch, "U and V need the same number of columns");
    let (rows, cols, r) = (u.nrows(), v.nrows(), u.ncols());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = DMatrix::zeros(rows + cols, 2 * r);
    for j in 0..r {
        out.view_mut((0, j), (rows, 1)).copy_from(&(u.column(j) * h));
        out.view_mut((rows, j), (cols, 1)).copy_from(&(v.column(j) * h));
        out.view_mut((0, r + j), (rows, 1)).copy_from(&(u.column(j) * h));
        out.view_mut((rows, r + j), (cols, 1)).copy_from(&(v.column(j) * -h));
    }
    Ok(out)
}

/// Largest entrywise deviation of `𝒰ᵀΦ(z)𝒰` from `[[αI, βI], [βI, αI]]`.
pub fn uphiu_deviation(spec: &LinearizationSpectrum, u_lin: &DenseMatrix, z: Complex64) -> Result<f64> {
    ensure!(
        u_lin.nrows() == spec.rows + spec.cols && u_lin.ncols() % 2 == 0 && u_lin.ncols() > 0,
        DimensionMismatch,
        "linearized basis must be (N+n) x 2r, got {:?}",
        u_lin.shape()
    );
    matrix::check_orthonormal(u_lin)?;
    let probe = phi_values(spec, z)?;
    let r = u_lin.ncols() / 2;
    let top = u_lin.rows(0, spec.rows);
    let bottom = u_lin.rows(spec.rows, spec.cols);
    let gram_up = top.transpose() * top;
    let gram_down = bottom.transpose() * bottom;
    let mut worst: f64 = 0.0;
    for i in 0..2 * r {
        for j in 0..2 * r {
            let got = gram_up[(i, j)] / probe.phi1 + gram_down[(i, j)] / probe.phi2;
            let expected = if i == j {
                probe.alpha
            } else if i % r == j % r {
                probe.beta
            } else {
                Complex64::new(0.0, 0.0)
            };
            worst = worst.max((got - expected).norm());
        }
    }
    Ok(worst)
}

const BISECTION_TOL: f64 = 1e-8;
const BISECTION_MAX_ITER: usize = 200;

/// The root `z_j ≥ M = 2b(√N+√n)` of `φ(z) = σ_j²`, by bisection.
///
/// `φ` is increasing on `[M, ∞)` with `φ(M) < M² ≤ σ_j²`, so the bracket
/// starts at `M` and the upper end `2χ(b)σ_j` is doubled until `φ` exceeds
/// `σ_j²`.
pub fn solve_zj(spec: &LinearizationSpectrum, sigma_j: f64, b: f64) -> Result<f64> {
    ensure!(b > 1.0, InvalidParameter, "b = {b} must exceed 1");
    let m = spec.regime_radius(b);
    ensure!(spec.norm() < m, Domain, "‖E‖ = {} is not below M = {m}", spec.norm());
    let target = sigma_j * sigma_j;
    let f = |z: f64| -> Result<f64> { Ok(varphi_real(spec, z)? - target) };
    let mut lo = m;
    ensure!(f(lo)? < 0.0, Domain, "σ_j = {sigma_j} lies below the bracket start M = {m}");
    let chi = 1.0 + 1.0 / (4.0 * b * (b - 1.0));
    let mut hi = 2.0 * chi * sigma_j.max(m);
    let mut expansions = 0;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        expansions += 1;
        ensure!(expansions <= 64, NumericalFailure, "no sign change of φ(z) − σ² up to z = {hi}");
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let val = f(mid)?;
        if val.abs() <= BISECTION_TOL * target || hi - lo <= f64::EPSILON * hi {
            return Ok(mid);
        }
        if val < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NumericalFailure(format!("bisection for σ_j = {sigma_j} did not reach tolerance")))
}

/// Spectral norms of `G(z)`, `G(z) − I/z` and `G(z) − I/z − 𝓔/z²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventNorms {
    pub g: f64,
    pub first_order: f64,
    pub second_order: f64,
}

/// `G(z)` is a normal matrix with eigenvalues `1/(z − λ)` over the
/// eigenvalues `λ ∈ {±η_i, 0}` of `𝓔`, so each norm is a maximum over `λ`.
pub fn resolvent_norms(spec: &LinearizationSpectrum, z: Complex64) -> Result<ResolventNorms> {
    spec.check_domain(z)?;
    let mut lambdas: Vec<f64> = spec.eta.iter().flat_map(|&h| [h, -h]).collect();
    if spec.rows + spec.cols > 2 * spec.eta.len() {
        lambdas.push(0.0);
    }
    let mut out = ResolventNorms { g: 0.0, first_order: 0.0, second_order: 0.0 };
    for l in lambdas {
        let inv = 1.0 / (z - l);
        out.g = out.g.max(inv.norm());
        out.first_order = out.first_order.max((l * inv / z).norm());
        out.second_order = out.second_order.max((l * l * inv / (z * z)).norm());
    }
    Ok(out)
}

/// The deterministic resolvent lemmas at one point, evaluated on the event
/// `‖E‖ ≤ 2(√N+√n)` and for `|z| ≥ 2b(√N+√n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventLemmaCheck {
    /// `‖E‖ ≤ 2(√N+√n)`.
    pub event: bool,
    /// `|z| ≥ 2b(√N+√n)`.
    pub regime: bool,
    pub phi_bounds: bool,
    pub g_bound: bool,
    pub first_order: bool,
    pub second_order: bool,
}

impl ResolventLemmaCheck {
    /// True unless a bound fails where its hypotheses hold.
    pub fn consistent(&self) -> bool {
        !(self.event && self.regime) || (self.phi_bounds && self.g_bound && self.first_order && self.second_order)
    }
}

pub fn check_resolvent_lemmas(spec: &LinearizationSpectrum, z: Complex64, b: f64, rel_tol: f64) -> Result<ResolventLemmaCheck> {
    let probe = phi_values(spec, z)?;
    let norms = resolvent_norms(spec, z)?;
    let az = z.norm();
    let c = b / (b - 1.0);
    let dev = 1.0 / (4.0 * b * (b - 1.0));
    let e = spec.norm();
    let le = |lhs: f64, rhs: f64| lhs <= rhs * (1.0 + rel_tol);
    let phi_ok = |p: Complex64| le((1.0 - dev) * az, p.norm()) && le(p.norm(), (1.0 + dev) * az);
    Ok(ResolventLemmaCheck {
        event: e <= spec.regime_radius(1.0),
        regime: az >= spec.regime_radius(b),
        phi_bounds: phi_ok(probe.phi1) && phi_ok(probe.phi2),
        g_bound: le(norms.g, c / az),
        first_order: le(norms.first_order, c * e / (az * az)),
        second_order: le(norms.second_order, c * e * e / (az * az * az)),
    })
}

/// Dense reference implementations, `O((N+n)³)` per call; for small sizes.
pub mod dense {
    use super::*;

    /// `[[0, E], [Eᵀ, 0]]`.
    pub fn linearization(e: &DenseMatrix) -> DenseMatrix {
        let (rows, cols) = e.shape();
        let mut out = DMatrix::zeros(rows + cols, rows + cols);
        out.view_mut((0, rows), (rows, cols)).copy_from(e);
        out.view_mut((rows, 0), (cols, rows)).copy_from(&e.transpose());
        out
    }

    /// `(zI − 𝓔)⁻¹` by LU inversion.
    pub fn resolvent(e: &DenseMatrix, z: Complex64) -> Result<DMatrix<Complex64>> {
        let lin = linearization(e).map(|x| Complex64::new(x, 0.0));
        let size = lin.nrows();
        let shifted = DMatrix::from_diagonal_element(size, size, z) - lin;
        shifted
            .try_inverse()
            .ok_or_else(|| Error::Domain(format!("z = {z} is an eigenvalue of the linearization")))
    }

    /// `φ₁`, `φ₂` from the traces of the diagonal blocks of a dense resolvent.
    pub fn phi_values(e: &DenseMatrix, z: Complex64) -> Result<(Complex64, Complex64)> {
        let g = resolvent(e, z)?;
        let rows = e.nrows();
        let trace_up: Complex64 = (0..rows).map(|i| g[(i, i)]).sum();
        let trace_down: Complex64 = (rows..g.nrows()).map(|i| g[(i, i)]).sum();
        Ok((z - trace_down, z - trace_up))
    }

    pub fn bilinear(e: &DenseMatrix, z: Complex64, x: &DenseVector, y: &DenseVector) -> Result<Complex64> {
        let g = resolvent(e, z)?;
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let yc = y.map(|v| Complex64::new(v, 0.0));
        Ok((xc.transpose() * g * yc)[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gen_gaussian, random_unit_vector, rng_from_seed};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn zero_noise_phi() {
        let spec = LinearizationSpectrum::from_noise(&DMatrix::zeros(3, 5)).unwrap();
        let z = c(2.0);
        let p = phi_values(&spec, z).unwrap();
        assert!(close(p.phi1, z - 5.0 / z, 1e-15));
        assert!(close(p.phi2, z - 3.0 / z, 1e-15));
    }

    #[test]
    fn phi_identity_holds() {
        let e = gen_gaussian(7, 4, 3);
        let spec = LinearizationSpectrum::from_noise(&e).unwrap();
        for z in [c(3.0 * spec.norm()), Complex64::new(spec.norm(), spec.norm())] {
            let p = phi_values(&spec, z).unwrap();
            assert!(p.identity_residual(7, 4).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_oracle() {
        let e = gen_gaussian(8, 6, 11);
        let spec = LinearizationSpectrum::from_noise(&e).unwrap();
        let z = c(3.0 * spec.norm());
        let (p1, p2) = dense::phi_values(&e, z).unwrap();
        let p = phi_values(&spec, z).unwrap();
        assert!(close(p.phi1, p1, 1e-8) && close(p.phi2, p2, 1e-8));

        let mut rng = rng_from_seed(1);
        let x = random_unit_vector(14, &mut rng);
        let y = random_unit_vector(14, &mut rng);
        let zc = Complex64::new(0.5, 2.0 * spec.norm());
        let got = resolvent_bilinear(&spec, zc, &x, &y).unwrap();
        let want = dense::bilinear(&e, zc, &x, &y).unwrap();
        assert!(close(got, want, 1e-8), "{got} vs {want}");
    }

    #[test]
    fn bilinear_zero_noise() {
        let spec = LinearizationSpectrum::from_noise(&DMatrix::zeros(2, 2)).unwrap();
        let x = DenseVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
        let y = DenseVector::from_column_slice(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(resolvent_bilinear(&spec, c(2.0), &x, &y).unwrap(), c(0.0));
        assert!(close(resolvent_bilinear(&spec, c(2.0), &x, &x).unwrap(), c(0.5), 1e-15));
    }

    #[test]
    fn local_law_gap_off_block_is_resolvent_entry() {
        let e = gen_gaussian(4, 3, 2);
        let spec = LinearizationSpectrum::from_noise(&e).unwrap();
        let x = DenseVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let y = DenseVector::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let z = c(4.0 * spec.norm());
        let gap = local_law_gap(&spec, z, &x, &y).unwrap();
        assert!((gap - resolvent_bilinear(&spec, z, &x, &y).unwrap().norm()).abs() < 1e-15);
    }

    #[test]
    fn domain_is_enforced() {
        let spec = LinearizationSpectrum::from_noise(&gen_gaussian(3, 3, 0)).unwrap();
        assert!(matches!(phi_values(&spec, c(0.5 * spec.norm())), Err(Error::Domain(_))));
    }

    #[test]
    fn uphiu_block_structure() {
        let e = gen_gaussian(9, 7, 5);
        let spec = LinearizationSpectrum::from_noise(&e).unwrap();
        let mut rng = rng_from_seed(2);
        let u = crate::models::haar_orthonormal(9, 2, &mut rng);
        let v = crate::models::haar_orthonormal(7, 2, &mut rng);
        let lin = linearized_basis(&u, &v).unwrap();
        let dev = uphiu_deviation(&spec, &lin, c(5.0 * spec.norm())).unwrap();
        assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn solve_zj_zero_noise_quartic() {
        let spec = LinearizationSpectrum::from_singular_values(10, 12, vec![]).unwrap();
        let sigma = 200.0;
        let z = solve_zj(&spec, sigma, 2.0).unwrap();
        let varphi = (z - 12.0 / z) * (z - 10.0 / z);
        assert!((varphi - sigma * sigma).abs() <= 1e-8 * sigma * sigma);
        assert!(z >= sigma);
    }

    #[test]
    fn varphi_is_increasing_and_crude_bounds_hold() {
        let e = gen_gaussian(30, 20, 7);
        let spec = LinearizationSpectrum::from_noise(&e).unwrap();
        let m = spec.regime_radius(2.0);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..50 {
            let x = m + 2.0 * m * i as f64 / 49.0;
            let v = varphi_real(&spec, x).unwrap();
            assert!(v > prev && v > 0.0 && v < x * x);
            prev = v;
        }
    }

    #[test]
    fn norms_match_dense_oracle() {
        let e = gen_gaussian(5, 3, 9);
        let spec = LinearizationSpectrum::from_noise(&e).unwrap();
        let z = Complex64::new(2.0 * spec.norm(), 1.0);
        let g = dense::resolvent(&e, z).unwrap();
        let lin = dense::linearization(&e).map(|x| Complex64::new(x, 0.0));
        let ident = DMatrix::<Complex64>::identity(8, 8);
        let op = |m: &DMatrix<Complex64>| m.clone().svd(false, false).singular_values.max();
        let norms = resolvent_norms(&spec, z).unwrap();
        assert!((norms.g - op(&g)).abs() < 1e-10);
        let first = &g - &ident / z;
        assert!((norms.first_order - op(&first)).abs() < 1e-10);
        let second = &first - &lin / (z * z);
        assert!((norms.second_order - op(&second)).abs() < 1e-10);
    }
}
