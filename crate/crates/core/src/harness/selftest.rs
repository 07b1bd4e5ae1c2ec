use rand::Rng;

use super::config::{ExperimentConfig, SelftestSettings};
use super::scenarios::{phi_identity_deviation, phi_monotone_failures, probe_grid, NOISE, PROBES, SIGNAL};
use crate::bounds::{self, BoundReport, PreconditionFlags};
use crate::error::Result;
use crate::matrix::{self, NormSpec};
use crate::models::{
    gen_gaussian, gen_low_rank, haar_orthonormal, random_unit_vector, rng_from_seed, substream, FactorMode,
    LowRankSpec, PerturbationInstance,
};
use crate::resolvent::LinearizationSpectrum;
use crate::subspace::{alignment_inequalities, principal_angles, procrustes_align, OrthonormalBasis};

const IDENTITY_TOL: f64 = 1e-9;
const NORMS: [NormSpec; 4] = [NormSpec::Operator, NormSpec::Frobenius, NormSpec::Nuclear, NormSpec::KyFan { k: 3 }];

fn check(id: &str, tol: f64, deviation: f64) -> BoundReport {
    BoundReport::new(format!("selftest_{id}"), Some(tol), 1.0, PreconditionFlags::ALL).with_empirical(deviation)
}

/// A random low-rank signal plus noise of random relative size.
fn random_instance(set: &SelftestSettings, seed: u64) -> Result<PerturbationInstance> {
    let mut rng = rng_from_seed(substream(seed, SIGNAL));
    let mut singulars: Vec<f64> = (0..set.rank).map(|_| rng.random_range(1.0..10.0)).collect();
    singulars.sort_by(|a, b| b.total_cmp(a));
    let spec = LowRankSpec { rows: set.size, cols: set.size + 3, singulars, factor_mode: FactorMode::Haar };
    let signal = gen_low_rank(&spec, substream(seed, SIGNAL))?;
    let mut e = gen_gaussian(spec.rows, spec.cols, substream(seed, NOISE));
    let level = rng.random_range(0.01..1.0) * spec.singulars[0];
    e *= level / matrix::operator_norm(&e)?;
    PerturbationInstance::from_signal(signal, e, seed, None)
}

/// A pair of random subspaces of equal dimension.
fn random_pair<R: Rng>(set: &SelftestSettings, rng: &mut R) -> Result<(OrthonormalBasis, OrthonormalBasis)> {
    let ambient = rng.random_range(2..=set.max_ambient.max(2));
    let dim = rng.random_range(1..=set.max_dim.min(ambient - 1).max(1));
    let u = OrthonormalBasis::new(haar_orthonormal(ambient, dim, rng))?;
    // Mix V toward U so that small angles are exercised too.
    let t: f64 = rng.random_range(0.0..1.0);
    let w = haar_orthonormal(ambient, dim, rng);
    let v = OrthonormalBasis::from_span(&(u.basis() * (1.0 - t) + w * t))?;
    Ok((u, v))
}

pub(crate) fn selftest_trial(cfg: &ExperimentConfig, set: &SelftestSettings, seed: u64) -> Result<Vec<BoundReport>> {
    let mut rng = rng_from_seed(substream(seed, PROBES));
    let inst = if cfg.wants("mirsky") || cfg.wants("wedin") { Some(random_instance(set, seed)?) } else { None };
    let mut out = Vec::new();
    for family in cfg.families() {
        match family {
            "mirsky" => {
                for norm in NORMS {
                    out.push(bounds::mirsky_check(inst.as_ref().expect("built above"), norm)?);
                }
            }
            "wedin" => {
                for k in 1..=set.rank {
                    for norm in NORMS {
                        out.push(bounds::wedin_check(inst.as_ref().expect("built above"), k, norm)?);
                    }
                }
            }
            "principal_cosines" => {
                let (u, v) = random_pair(set, &mut rng)?;
                let cosines = principal_angles(&u, &v)?.cosines();
                let product = u.projector() * v.projector();
                let sv = matrix::singular_values(&product)?;
                let dev = cosines.iter().zip(&sv).map(|(c, s)| (c - s).abs()).fold(0.0, f64::max);
                out.push(check(family, IDENTITY_TOL, dev));
            }
            "procrustes_spectrum" => {
                let (u, v) = random_pair(set, &mut rng)?;
                let o = procrustes_align(&u, &v)?;
                let residual = matrix::singular_values(&(u.basis() * &o - v.basis()))?;
                let mut expected: Vec<f64> =
                    principal_angles(&u, &v)?.angles().iter().map(|t| 2.0 * (t / 2.0).sin()).collect();
                expected.sort_by(|a, b| b.total_cmp(a));
                let dev = residual.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                out.push(check(family, IDENTITY_TOL, dev.max(matrix::orthonormality_defect(&o))));
            }
            "frobenius_sandwich" => {
                let (u, v) = random_pair(set, &mut rng)?;
                let o = procrustes_align(&u, &v)?;
                let diff = u.basis() * &o - v.basis();
                let sines = principal_angles(&u, &v)?.sines();
                let mut excess: f64 = 0.0;
                for norm in [NormSpec::Operator, NormSpec::Frobenius] {
                    let lo = norm.gauge(&sines)?;
                    let mid = matrix::apply_norm(&diff, norm)?;
                    excess = excess.max(lo - mid).max(mid - std::f64::consts::SQRT_2 * lo);
                }
                out.push(check(family, IDENTITY_TOL, excess.max(0.0)));
            }
            "alignment_inequalities" => {
                let (u, v) = random_pair(set, &mut rng)?;
                let x = random_unit_vector(u.ambient_dim(), &mut rng);
                let y = random_unit_vector(u.dim(), &mut rng);
                let ineq = alignment_inequalities(&u, &v, &x, &y)?;
                let excess = [ineq.row, ineq.bilinear, ineq.two_inf].iter().map(|i| -i.slack()).fold(0.0, f64::max);
                out.push(check(family, IDENTITY_TOL, excess));
            }
            "phi_identity" | "phi_monotone" => {
                let rows = rng.random_range(2..=set.max_ambient.max(2));
                let cols = rng.random_range(2..=set.max_ambient.max(2));
                let e = gen_gaussian(rows, cols, substream(seed, NOISE + 16));
                let lin = LinearizationSpectrum::from_noise(&e)?;
                let m = lin.regime_radius(2.0);
                if lin.norm() >= m {
                    continue;
                }
                let dev = if family == "phi_identity" {
                    phi_identity_deviation(&lin, &probe_grid(m))?
                } else {
                    phi_monotone_failures(&lin, m, 50)? as f64
                };
                let tol = if family == "phi_identity" { 1e-12 } else { 0.0 };
                out.push(check(family, tol, dev));
            }
            other => unreachable!("unhandled selftest family {other}"),
        }
    }
    Ok(out)
}
