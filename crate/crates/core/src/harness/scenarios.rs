use std::cell::OnceCell;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use super::config::{
    BoundsSettings, ExperimentConfig, GAUSSIAN_FAMILIES, GmmSettings, KMeansSettings, NoiseModel, ResolventSettings, SubmatrixSettings,
};
use crate::bounds::{
    self, cross_term_direct_sum, cross_term_sum, empirical_quantity, BoundReport, EmpiricalQuantity as Q,
    EntrywiseForm, GaussianBoundParams, GeneralNoiseParams, IncoherenceStats, LeadingConstant, PreconditionFlags,
    SimplifiedVariant, SubspaceVariant, WeightedForm,
};
use crate::clustering::{
    embedding_gap, gmm_conditions, recovery, spectral_gmm, spectral_submatrix, submatrix_conditions, KMeansConfig,
};
use crate::error::{Error, Result};
use crate::matrix::{self, two_inf_norm, DenseMatrix, NormSpec};
use crate::models::{
    gen_gaussian, gen_low_rank, haar_orthonormal, plant_submatrices, random_unit_vector, rng_from_seed, sample_gmm,
    substream, PerturbationInstance,
};
use crate::resolvent::{self, LinearizationSpectrum};

/// Stream tags within one trial seed.
pub(crate) const SIGNAL: u64 = 1;
pub(crate) const NOISE: u64 = 2;
pub(crate) const PROBES: u64 = 3;
pub(crate) const ALGORITHM: u64 = 4;
pub(crate) const SCALE: u64 = 5;


fn tolerance_report(id: impl Into<String>, tol: f64, deviation: f64) -> BoundReport {
    BoundReport::new(id, Some(tol), 1.0, PreconditionFlags::ALL).with_empirical(deviation)
}

/// Per-trial quantities of a bounds instance, computed on first use.
struct BoundsTrial<'a> {
    set: &'a BoundsSettings,
    inst: PerturbationInstance,
    noise_singulars: OnceCell<Vec<f64>>,
    seed: u64,
}

impl BoundsTrial<'_> {
    fn noise_singulars(&self) -> Result<&[f64]> {
        if self.noise_singulars.get().is_none() {
            let values = matrix::singular_values(&self.inst.e)?;
            let _ = self.noise_singulars.set(values);
        }
        Ok(self.noise_singulars.get().expect("initialized above"))
    }

    fn noise_norm(&self) -> Result<f64> {
        Ok(self.noise_singulars()?.first().copied().unwrap_or(0.0))
    }

    fn params(&self, k: usize, s: usize) -> Result<GaussianBoundParams> {
        let spec = &self.set.signal;
        Ok(GaussianBoundParams {
            big_n: spec.rows,
            n: spec.cols,
            k,
            s,
            b: self.set.b,
            big_k: self.set.big_k,
            sigma: spec.singulars.clone(),
            noise_norm: Some(self.noise_norm()?),
        })
    }

    fn q(&self, which: Q) -> Result<f64> {
        empirical_quantity(&self.inst, &which)
    }

    fn signal_left(&self, k: usize, s: usize) -> Result<DenseMatrix> {
        self.inst.svd_a.left_range(k, s)
    }

    fn incoherence(&self) -> Result<IncoherenceStats> {
        let r = self.set.signal.rank();
        IncoherenceStats::new(two_inf_norm(&self.signal_left(1, r)?), two_inf_norm(&self.inst.svd_a.right_range(1, r)?))
    }

    fn invariant_norms(&self) -> impl Iterator<Item = NormSpec> + '_ {
        self.set.norms.iter().copied().filter(NormSpec::is_unitarily_invariant)
    }
}

/// The perturbation instance of one bounds trial. With `leading = None`
/// the full SVD of `Ã` is computed.
pub fn bounds_instance(set: &BoundsSettings, seed: u64, leading: Option<usize>) -> Result<PerturbationInstance> {
    let spec = &set.signal;
    let r = spec.rank();
    let signal = gen_low_rank(spec, substream(seed, SIGNAL))?;
    let mut e = gen_gaussian(spec.rows, spec.cols, substream(seed, NOISE));
    if let NoiseModel::SpectralRange { low, high } = set.noise {
        let (lo, hi) = (low * spec.singulars[r - 1], high * spec.singulars[0]);
        let u: f64 = rng_from_seed(substream(seed, SCALE)).random();
        let target = (lo.ln() + u * (hi.ln() - lo.ln())).exp();
        e *= target / matrix::operator_norm(&e)?;
    }
    PerturbationInstance::from_signal(signal, e, seed, leading)
}

pub(crate) fn bounds_trial(cfg: &ExperimentConfig, set: &BoundsSettings, seed: u64) -> Result<Vec<BoundReport>> {
    let spec = &set.signal;
    let r = spec.rank();
    let (k, s) = set.window();
    let leading = match (cfg.wants("mirsky"), cfg.wants("wedin")) {
        (true, _) => None,
        (false, true) => Some((r + 1).min(spec.rows.min(spec.cols))),
        (false, false) => Some(r),
    };
    let inst = bounds_instance(set, seed, leading)?;
    let t = BoundsTrial { set, inst, noise_singulars: OnceCell::new(), seed };
    let gaussian = set.noise == NoiseModel::Standard;

    let mut out = Vec::new();
    for family in cfg.families() {
        if !gaussian && GAUSSIAN_FAMILIES.contains(&family) {
            continue;
        }
        match family {
            "mirsky" => {
                for norm in t.invariant_norms() {
                    out.push(bounds::mirsky_check(&t.inst, norm)?);
                }
            }
            "wedin" => {
                for kk in 1..=r {
                    for norm in t.invariant_norms() {
                        out.push(bounds::wedin_check(&t.inst, kk, norm)?);
                    }
                }
            }
            "gauss_sin_theta" | "gauss_sin_theta_proof" => {
                let constant =
                    if family == "gauss_sin_theta" { LeadingConstant::Statement } else { LeadingConstant::Proof };
                let p = t.params(k, s)?;
                let emp = t.q(Q::SinTheta { k, s, norm: NormSpec::Operator })?;
                out.push(
                    bounds::gauss_subspace_bound_with(&p, SubspaceVariant::Operator, None, constant)?
                        .with_empirical(emp),
                );
                for norm in t.invariant_norms().filter(|n| *n != NormSpec::Operator) {
                    let cross = cross_term_direct_sum(&t.inst, k, s, norm)?;
                    let v = SubspaceVariant::GeneralNorm { norm };
                    let emp = t.q(Q::SinTheta { k, s, norm })?;
                    out.push(bounds::gauss_subspace_bound_with(&p, v, Some(cross), constant)?.with_empirical(emp));
                }
            }
            "simplified_sin_theta" => {
                let p = t.params(k, k)?;
                let emp = t.q(Q::SinTheta { k: 1, s: k, norm: NormSpec::Operator })?;
                out.push(bounds::simplified_subspace_bound(&p, SimplifiedVariant::Operator, None)?.with_empirical(emp));
                for norm in t.invariant_norms() {
                    let emp = t.q(Q::SinTheta { k: 1, s: k, norm })?;
                    let cross = cross_term_sum(&t.inst, 1, k, norm)?;
                    let general = SimplifiedVariant::GeneralNorm { norm };
                    out.push(bounds::simplified_subspace_bound(&p, general, Some(cross))?.with_empirical(emp));
                    let corollary = SimplifiedVariant::Corollary { norm };
                    out.push(bounds::simplified_subspace_bound(&p, corollary, None)?.with_empirical(emp));
                }
            }
            "gauss_sv_location" => {
                let p = t.params(k, s)?;
                let lin = LinearizationSpectrum::from_singular_values(spec.rows, spec.cols, t.noise_singulars()?.to_vec())?;
                for j in k..=s {
                    out.push(bounds::gauss_sv_location_check(&t.inst, &p, j, |x| resolvent::varphi_real(&lin, x))?);
                }
            }
            "general_sv" | "general_sin_theta" => {
                let u = t.signal_left(1, r)?;
                let v = t.inst.svd_a.right_range(1, r)?;
                let core = u.transpose() * &t.inst.e * &v;
                let l = matrix::operator_norm(&core)?;
                let b = t.noise_norm()?;
                for kk in 1..=r {
                    let tk = matrix::operator_norm(&core.view((0, 0), (kk, kk)).into_owned())?;
                    let gp = GeneralNoiseParams::new(l, b, tk, 0.0)?;
                    if family == "general_sv" {
                        let (lo, up) = bounds::general_sv_bounds(&t.inst, kk, &gp)?;
                        out.push(lo);
                        out.push(up);
                        continue;
                    }
                    let (sigma, next) = (spec.singulars[kk - 1], spec.singulars.get(kk).copied().unwrap_or(0.0));
                    for norm in t.invariant_norms() {
                        let emp = t.q(Q::SinTheta { k: 1, s: kk, norm })?;
                        out.push(bounds::general_subspace_bound(kk, r, sigma - next, sigma, &gp, norm)?.with_empirical(emp));
                    }
                }
            }
            "entrywise" => {
                let p = t.params(k, s)?;
                let emp = t.q(Q::TwoInfProj { k, s })?;
                out.push(
                    bounds::entrywise_bound(&p, &t.incoherence()?, EntrywiseForm::InfnormNonasymptotic)?
                        .with_empirical(emp),
                );
            }
            "entrywise_shape" => {
                let p = t.params(k, s)?;
                let inc = t.incoherence()?;
                let top = inc.with_window(two_inf_norm(&t.signal_left(1, k)?));
                let window = inc.with_window(two_inf_norm(&t.signal_left(k, s)?));
                let forms = [
                    (EntrywiseForm::VectorInf, inc, Q::TwoInfProj { k, s: k }),
                    (EntrywiseForm::Matrix2Inf, inc, Q::TwoInfProj { k: 1, s: k }),
                    (EntrywiseForm::CorollaryAligned, top, Q::TwoInfAligned { k: 1, s: k }),
                    (EntrywiseForm::MaxAligned, window, Q::MaxAligned { k, s }),
                ];
                for (form, stats, which) in forms {
                    out.push(bounds::entrywise_bound(&p, &stats, form)?.with_empirical(t.q(which)?));
                }
            }
            "linear_bilinear" => {
                let p = t.params(k, s)?;
                let mut rng = rng_from_seed(substream(t.seed, PROBES));
                let x = random_unit_vector(spec.rows, &mut rng);
                let y = random_unit_vector(s - k + 1, &mut rng);
                let xu = (t.signal_left(1, r)?.transpose() * &x).norm();
                let (lin, bil) = bounds::linear_bilinear_bound(&p, xu.min(1.0), y.as_slice())?;
                let (xv, yv) = (x.as_slice().to_vec(), y.as_slice().to_vec());
                out.push(lin.with_empirical(t.q(Q::Linear { x: xv.clone(), k, s })?));
                out.push(bil.with_empirical(t.q(Q::Bilinear { x: xv, y: yv, k, s })?));
            }
            "weighted" => {
                let p = t.params(k, s)?;
                let emp = t.q(Q::Weighted2Inf { k, s })?;
                out.push(bounds::weighted_bound(&p, &t.incoherence()?, WeightedForm::Theorem)?.with_empirical(emp));
            }
            "weighted_corollary" => {
                let p = t.params(1, r)?;
                let emp = t.q(Q::WeightedAligned)?;
                out.push(bounds::weighted_bound(&p, &t.incoherence()?, WeightedForm::CorollaryFull)?.with_empirical(emp));
            }
            "spectral_norm_event" => {
                out.push(bounds::noise_norm_event(spec.rows, spec.cols, t.noise_norm()?));
            }
            other => unreachable!("unhandled bounds family {other}"),
        }
    }
    Ok(out)
}

/// Probe points with `|z| ≥ M`: real, imaginary and diagonal.
pub(crate) fn probe_grid(m: f64) -> Vec<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re * m, im * m);
    vec![
        c(1.0, 0.0),
        c(1.5, 0.0),
        c(2.0, 0.0),
        c(3.0, 0.0),
        c(-1.0, 0.0),
        c(-2.5, 0.0),
        c(0.0, 1.0),
        c(0.0, -2.0),
        c(1.0, 1.0),
        c(-1.0, 0.5),
        c(0.8, -0.8),
    ]
}

/// Number of grid points of `[M, 3M]` where `φ` fails to increase or leaves
/// `(0, x²)`.
pub(crate) fn phi_monotone_failures(lin: &LinearizationSpectrum, m: f64, points: usize) -> Result<usize> {
    let mut failures = 0;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..points {
        let x = m * (1.0 + 2.0 * i as f64 / (points - 1) as f64);
        let phi = resolvent::varphi_real(lin, x)?;
        if !(phi > prev && phi > 0.0 && phi < x * x) {
            failures += 1;
        }
        prev = phi;
    }
    Ok(failures)
}

pub(crate) fn phi_identity_deviation(lin: &LinearizationSpectrum, zs: &[Complex64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in zs {
        let probe = resolvent::phi_values(lin, z)?;
        worst = worst.max(probe.identity_residual(lin.rows(), lin.cols()).norm() / z.norm());
    }
    Ok(worst)
}

fn relative_gap(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

const IDENTITY_TOL: f64 = 1e-8;

pub(crate) fn resolvent_trial(
    cfg: &ExperimentConfig,
    set: &ResolventSettings,
    trial: usize,
    seed: u64,
) -> Result<Vec<BoundReport>> {
    let (rows, cols) = set.shapes[trial % set.shapes.len()];
    let e = gen_gaussian(rows, cols, substream(seed, NOISE));
    let tag = format!("N={rows},n={cols}");
    let lin = OnceCell::new();
    let spectrum = || -> Result<&LinearizationSpectrum> {
        if lin.get().is_none() {
            let _ = lin.set(LinearizationSpectrum::from_noise(&e)?);
        }
        Ok(lin.get().expect("initialized above"))
    };
    let root = (rows as f64).sqrt() + (cols as f64).sqrt();
    let m = 2.0 * set.b * root;
    let grid = probe_grid(m);
    let mut out = Vec::new();
    for family in cfg.families() {
        if family == "spectral_norm_event" {
            let norm = match lin.get() {
                Some(l) => l.norm(),
                None => matrix::operator_norm(&e)?,
            };
            out.push(bounds::noise_norm_event(rows, cols, norm));
            continue;
        }
        let lin = spectrum()?;
        let event = lin.norm() < m;
        let no_claim = |id: String| {
            BoundReport::new(id, None, 1.0, PreconditionFlags { snr_ok: false, ..PreconditionFlags::ALL })
        };
        match family {
            "phi_identity" => out.push(if event {
                tolerance_report(format!("phi_identity[{tag}]"), IDENTITY_TOL, phi_identity_deviation(lin, &grid)?)
            } else {
                no_claim(format!("phi_identity[{tag}]"))
            }),
            "phi_monotone" => out.push(if event {
                let failures = phi_monotone_failures(lin, m, set.grid)?;
                tolerance_report(format!("phi_monotone[{tag}]"), 0.0, failures as f64)
            } else {
                no_claim(format!("phi_monotone[{tag}]"))
            }),
            "uphiu_block" => {
                let id = format!("uphiu_block[{tag}]");
                if !event {
                    out.push(no_claim(id));
                    continue;
                }
                let mut rng = rng_from_seed(substream(seed, PROBES));
                let u = haar_orthonormal(rows, set.rank, &mut rng);
                let v = haar_orthonormal(cols, set.rank, &mut rng);
                let basis = resolvent::linearized_basis(&u, &v)?;
                let mut worst: f64 = 0.0;
                for &z in &grid {
                    worst = worst.max(resolvent::uphiu_deviation(lin, &basis, z)?);
                }
                out.push(tolerance_report(id, IDENTITY_TOL, worst));
            }
            "resolvent_lemmas" => {
                let id = format!("resolvent_lemmas[{tag}]");
                if !event {
                    out.push(no_claim(id));
                    continue;
                }
                let mut failures = 0usize;
                for &z in &grid {
                    if !resolvent::check_resolvent_lemmas(lin, z, set.b, 1e-9)?.consistent() {
                        failures += 1;
                    }
                }
                let pre = PreconditionFlags { snr_ok: lin.norm() <= 2.0 * root, ..PreconditionFlags::ALL };
                out.push(BoundReport::new(id, Some(0.0), 1.0, pre).with_empirical(failures as f64));
            }
            "dense_oracle" => {
                if rows > 40 || cols > 40 || !event {
                    continue;
                }
                let mut rng = rng_from_seed(substream(seed, ALGORITHM));
                let mut worst: f64 = 0.0;
                for &z in &grid {
                    let x = random_unit_vector(rows + cols, &mut rng);
                    let y = random_unit_vector(rows + cols, &mut rng);
                    let probe = resolvent::phi_values(lin, z)?;
                    let (d1, d2) = resolvent::dense::phi_values(&e, z)?;
                    let fast = resolvent::resolvent_bilinear(lin, z, &x, &y)?;
                    let dense = resolvent::dense::bilinear(&e, z, &x, &y)?;
                    let scale = 1.0 / z.norm();
                    worst = worst
                        .max(relative_gap(probe.phi1, d1))
                        .max(relative_gap(probe.phi2, d2))
                        .max((fast - dense).norm() / scale);
                }
                out.push(tolerance_report(format!("dense_oracle[{tag}]"), IDENTITY_TOL, worst));
            }
            "local_law" => {
                let mut rng = rng_from_seed(substream(seed, SCALE));
                let dim_ok = root * root >= 32.0 * (set.big_k + 1.0) * ((rows + cols) as f64).ln();
                let prob = resolvent::local_law_probability(rows, cols, set.big_k);
                for _ in 0..set.probes {
                    let x: DVector<f64> = random_unit_vector(rows + cols, &mut rng);
                    let y: DVector<f64> = random_unit_vector(rows + cols, &mut rng);
                    let radius = m * (1.0 + 2.0 * rng.random::<f64>());
                    let z = Complex64::from_polar(radius, 2.0 * PI * rng.random::<f64>());
                    let id = format!("local_law[{tag}]");
                    let pre = PreconditionFlags { dim_ok, snr_ok: true, gap_ok: true };
                    let threshold = resolvent::local_law_threshold(rows, cols, set.b, set.big_k, z);
                    match resolvent::local_law_gap(lin, z, &x, &y) {
                        Ok(gap) => out.push(BoundReport::new(id, Some(threshold), prob, pre).with_empirical(gap)),
                        Err(Error::Domain(_)) => {
                            out.push(BoundReport::new(id, None, prob, PreconditionFlags { snr_ok: false, ..pre }))
                        }
                        Err(err) => return Err(err),
                    }
                }
            }
            other => unreachable!("unhandled resolvent family {other}"),
        }
    }
    Ok(out)
}

fn kmeans_config(k: usize, set: &KMeansSettings, seed: u64) -> KMeansConfig {
    KMeansConfig { k, restarts: set.restarts, max_iter: set.max_iter, tol: set.tol, seed: substream(seed, ALGORITHM) }
}

pub(crate) fn gmm_trial(cfg: &ExperimentConfig, set: &GmmSettings, seed: u64) -> Result<Vec<BoundReport>> {
    let spec = &set.model;
    let sample = sample_gmm(spec, substream(seed, SIGNAL))?;
    let cond = gmm_conditions(spec.p, spec.n, spec.k, sample.c_min, sample.delta, sample.sigma_min, set.l);
    let pre = PreconditionFlags { dim_ok: cond.dim_ok, snr_ok: cond.sigma_ok, gap_ok: cond.separation_ok };
    let mut out = Vec::new();
    for family in cfg.families() {
        match family {
            "gmm_recovery" => {
                let found = spectral_gmm(&sample.x, spec.k, &kmeans_config(spec.k, &set.kmeans, seed))?;
                let rec = recovery(&sample.truth, &found)?;
                // Expected misclassification ≤ 40(n+p)^{−L}, and a nonzero
                // rate is at least 1/n, so P(error) ≤ 40n(n+p)^{−L}.
                let fail = 40.0 * spec.n as f64 * ((spec.n + spec.p) as f64).powf(-set.l);
                let id = format!("gmm_recovery[k={}]", spec.k);
                out.push(BoundReport::new(id, Some(0.0), 1.0 - fail.min(1.0), pre).with_empirical(rec.misclassification));
            }
            "gmm_embedding_gap" => {
                let gap = embedding_gap(&sample.x, spec.k, &sample.truth_embedding()?)?;
                let id = format!("gmm_embedding_gap[k={}]", spec.k);
                out.push(BoundReport::shape_only(id, sample.delta / 5.0, pre).with_empirical(gap));
            }
            other => unreachable!("unhandled gmm family {other}"),
        }
    }
    Ok(out)
}

pub(crate) fn submatrix_trial(cfg: &ExperimentConfig, set: &SubmatrixSettings, seed: u64) -> Result<Vec<BoundReport>> {
    let spec = &set.model;
    let sample = plant_submatrices(spec, substream(seed, SIGNAL))?;
    let cond = submatrix_conditions(
        spec.m,
        spec.n,
        spec.k,
        sample.r_min,
        sample.c_min,
        sample.delta_r,
        sample.delta_c,
        sample.sigma_min,
        set.l,
    );
    let pre = PreconditionFlags { dim_ok: cond.dim_ok, snr_ok: cond.sigma_ok, gap_ok: cond.separation_ok };
    let mut out = Vec::new();
    if cfg.wants("submatrix_recovery") {
        let found = spectral_submatrix(&sample.x, spec.k, &kmeans_config(spec.k + 1, &set.kmeans, seed))?;
        let rows = recovery(&sample.row_truth, &found.row_groups)?;
        let cols = recovery(&sample.col_truth, &found.col_groups)?;
        let prob = 1.0 - 40.0 * ((spec.m + spec.n) as f64).powf(-set.l);
        let id = format!("submatrix_recovery[k={}]", spec.k);
        let emp = rows.misclassification.max(cols.misclassification);
        out.push(BoundReport::new(id, Some(0.0), prob, pre).with_empirical(emp));
    }
    Ok(out)
}
