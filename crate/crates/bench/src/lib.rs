//! Benchmark fixtures.

use perturbkit::models::{gen_gaussian, gen_low_rank, perturb, FactorMode, LowRankSpec, PerturbationInstance};

/// Square signal of the given spectrum plus standard Gaussian noise.
pub fn gaussian_instance(n: usize, singulars: &[f64], seed: u64) -> PerturbationInstance {
    let spec = LowRankSpec { rows: n, cols: n, singulars: singulars.to_vec(), factor_mode: FactorMode::Haar };
    let signal = gen_low_rank(&spec, seed).expect("valid spec");
    perturb(&signal.matrix, &gen_gaussian(n, n, seed ^ 0x5eed)).expect("finite instance")
}
