use proptest::prelude::*;

use perturbkit::bounds::{
    fbounded_probability, gauss_subspace_bound, gaussian_tail, general_subspace_bound, mirsky_check, wedin_check,
    GaussianBoundParams, GeneralNoiseParams, SubspaceVariant,
};
use perturbkit::harness::{failure_budget, nearest_rank};
use perturbkit::models::{gen_gaussian, gen_low_rank, perturb, FactorMode, LowRankSpec, PerturbationInstance};
use perturbkit::resolvent::local_law_probability;
use perturbkit::subspace::{principal_angles, sin_theta_norm, OrthonormalBasis};
use perturbkit::NormSpec;

const NORMS: [NormSpec; 4] = [NormSpec::Operator, NormSpec::Frobenius, NormSpec::Nuclear, NormSpec::KyFan { k: 2 }];

fn instance(rows: usize, cols: usize, singulars: Vec<f64>, scale: f64, seed: u64) -> PerturbationInstance {
    let spec = LowRankSpec { rows, cols, singulars, factor_mode: FactorMode::Haar };
    let signal = gen_low_rank(&spec, seed).unwrap();
    perturb(&signal.matrix, &(gen_gaussian(rows, cols, seed + 1) * scale)).unwrap()
}

fn spectrum(max_rank: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..100.0, 1..=max_rank).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    })
}

fn params() -> impl Strategy<Value = GaussianBoundParams> {
    (50usize..2000, 50usize..2000, spectrum(4), 2.0f64..6.0, 0.5f64..3.0).prop_map(|(big_n, n, sigma, b, big_k)| {
        let sigma = sigma.iter().enumerate().map(|(i, s)| 1e4 * s + 1e3 * (10 - i) as f64).collect();
        GaussianBoundParams::new(big_n, n, sigma, 1, 1, b, big_k).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mirsky_and_wedin_are_never_violated(
        rows in 3usize..14,
        cols in 3usize..14,
        singulars in spectrum(3),
        scale in 0.001f64..20.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(singulars.len() < rows.min(cols));
        let r = singulars.len();
        let inst = instance(rows, cols, singulars, scale, seed);
        for norm in NORMS {
            let m = mirsky_check(&inst, norm).unwrap();
            prop_assert_eq!(m.violated, Some(false), "{:?}", m);
            for k in 1..=r {
                let w = wedin_check(&inst, k, norm).unwrap();
                prop_assert_ne!(w.violated, Some(true), "{:?}", w);
            }
        }
    }

    #[test]
    fn sin_theta_is_symmetric_and_bounded(
        ambient in 3usize..20,
        seed in any::<u64>(),
        t in 0.0f64..1.0,
    ) {
        let dim = 1 + (seed as usize) % (ambient - 1);
        let a = gen_gaussian(ambient, dim, seed);
        let b = &a * (1.0 - t) + gen_gaussian(ambient, dim, seed ^ 1) * t;
        let u = OrthonormalBasis::from_span(&a).unwrap();
        let v = OrthonormalBasis::from_span(&b).unwrap();
        let uv = sin_theta_norm(&u, &v, NormSpec::Operator).unwrap();
        let vu = sin_theta_norm(&v, &u, NormSpec::Operator).unwrap();
        prop_assert!((uv - vu).abs() < 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&uv));
        let angles = principal_angles(&u, &v).unwrap();
        prop_assert!(angles.angles().iter().all(|x| (0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(x)));
    }

    #[test]
    fn gaussian_bound_grows_with_noise(p in params(), e1 in 0.0f64..500.0, extra in 0.0f64..500.0) {
        let at = |e: f64| {
            gauss_subspace_bound(&p.clone().with_noise_norm(e), SubspaceVariant::Operator, None).unwrap().bound.unwrap()
        };
        prop_assert!(at(e1) <= at(e1 + extra));
    }

    #[test]
    fn gaussian_bound_shrinks_with_signal(p in params(), c in 1.0f64..10.0) {
        let e = p.noise_norm_or_default();
        let scaled = GaussianBoundParams { sigma: p.sigma.iter().map(|s| s * c).collect(), ..p.clone() };
        let bound = |q: &GaussianBoundParams| {
            gauss_subspace_bound(&q.clone().with_noise_norm(e), SubspaceVariant::Operator, None).unwrap().bound.unwrap()
        };
        prop_assert!(bound(&scaled) <= bound(&p) * (1.0 + 1e-12));
    }

    #[test]
    fn probabilities_lie_in_the_unit_interval(
        p in params(),
        c in 0.0f64..1e6,
        t in 0.0f64..1e3,
        r in 1usize..6,
        delta in 0.0f64..1e4,
        rows in 1usize..5000,
        cols in 1usize..5000,
        big_k in 0.1f64..4.0,
    ) {
        for q in [p.probability(c), fbounded_probability(gaussian_tail, t, r, r.min(3), delta), local_law_probability(rows, cols, big_k)] {
            prop_assert!((0.0..=1.0).contains(&q), "{}", q);
        }
    }

    #[test]
    fn general_bound_grows_with_noise_magnitudes(
        l in 0.0f64..10.0,
        b in 0.0f64..50.0,
        dl in 0.0f64..10.0,
        db in 0.0f64..50.0,
        k in 1usize..4,
        sigma_k in 10.0f64..1e4,
        delta_k in 0.1f64..1e3,
    ) {
        let r = 4;
        for norm in [NormSpec::Operator, NormSpec::Frobenius] {
            let at = |l: f64, b: f64| {
                let gp = GeneralNoiseParams::new(l, b, 0.0, 0.0).unwrap();
                general_subspace_bound(k, r, delta_k, sigma_k, &gp, norm).unwrap().bound.unwrap()
            };
            prop_assert!(at(l, b) <= at(l + dl, b + db));
        }
    }

    #[test]
    fn budget_and_quantiles_are_consistent(
        p in 0.0f64..1.0,
        valid in 1usize..100_000,
        mut v in prop::collection::vec(-1e3f64..1e3, 1..200),
        q in 0.0f64..1.0,
    ) {
        prop_assert!(failure_budget(p, valid) >= p);
        v.sort_by(f64::total_cmp);
        let x = nearest_rank(&v, q).unwrap();
        prop_assert!(v.contains(&x));
        prop_assert!(nearest_rank(&v, q).unwrap() <= nearest_rank(&v, (q + 0.1).min(1.0)).unwrap());
    }
}
