//! Seeded generators: Gaussian noise, low-rank signals, Gaussian mixtures
//! and planted submatrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::Labeling;
use crate::error::{ensure, Result};
use crate::matrix::{self, Coverage, DenseMatrix, SvdFactors};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of trial `trial` in a run started from `base_seed`.
pub fn derive_seed(base_seed: u64, trial: u64) -> u64 {
    base_seed ^ trial.wrapping_mul(GOLDEN_GAMMA)
}

/// Independent stream `tag` of an instance seed (splitmix64 finalizer), so
/// the signal, the noise and the probes of one trial never share a stream.
pub fn substream(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(GOLDEN_GAMMA).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `rows × cols` matrix of iid standard normal entries, filled column by
/// column from a ChaCha8 stream seeded with `seed`.
pub fn gen_gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    gaussian_matrix(rows, cols, &mut rng_from_seed(seed))
}

/// Unit vector drawn uniformly from the sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g: DVector<f64> = DVector::from_fn(len, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// Haar-distributed `rows × cols` matrix with orthonormal columns: QR of a
/// Gaussian block with the signs of `diag(R)` moved into `Q`.
pub fn haar_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    assert!(cols <= rows, "cannot fit {cols} orthonormal columns in dimension {rows}");
    let qr = gaussian_matrix(rows, cols, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorMode {
    /// Haar-distributed left and right factors.
    Haar,
    /// First left singular vector is the standard basis vector `e_row`, so
    /// `‖U‖_{2,∞} = 1`; the remaining factors are Haar.
    Coherent { row: usize },
}

/// Shape and spectrum of a low-rank signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankSpec {
    pub rows: usize,
    pub cols: usize,
    pub singulars: Vec<f64>,
    #[serde(default = "default_factor_mode")]
    pub factor_mode: FactorMode,
}

fn default_factor_mode() -> FactorMode {
    FactorMode::Haar
}

impl LowRankSpec {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.rows >= 1 && self.cols >= 1, InvalidParameter, "signal shape must be positive");
        let r = self.rank();
        ensure!(r >= 1, InvalidParameter, "signal needs at least one singular value");
        ensure!(
            r <= self.rows.min(self.cols),
            InvalidParameter,
            "rank {r} exceeds min({}, {})",
            self.rows,
            self.cols
        );
        ensure!(
            self.singulars.iter().all(|s| s.is_finite() && *s > 0.0),
            InvalidParameter,
            "singular values must be finite and positive"
        );
        ensure!(
            self.singulars.windows(2).all(|w| w[0] >= w[1]),
            InvalidParameter,
            "singular values must be descending"
        );
        if let FactorMode::Coherent { row } = self.factor_mode {
            ensure!(row < self.rows, InvalidParameter, "coherent row {row} outside {} rows", self.rows);
        }
        Ok(())
    }
}

/// A generated signal together with its exact thin SVD.
#[derive(Debug, Clone)]
pub struct LowRank {
    pub matrix: DenseMatrix,
    pub factors: SvdFactors,
}

pub fn gen_low_rank(spec: &LowRankSpec, seed: u64) -> Result<LowRank> {
    spec.validate()?;
    let r = spec.rank();
    let mut rng = rng_from_seed(seed);
    let mut left = match spec.factor_mode {
        FactorMode::Haar => haar_orthonormal(spec.rows, r, &mut rng),
        FactorMode::Coherent { row } => {
            let mut u = DMatrix::zeros(spec.rows, r);
            u[(row, 0)] = 1.0;
            if r > 1 {
                let mut g = gaussian_matrix(spec.rows, r - 1, &mut rng);
                g.row_mut(row).fill(0.0);
                u.columns_mut(1, r - 1).copy_from(&matrix::orthonormalize(&g));
            }
            u
        }
    };
    let mut right = haar_orthonormal(spec.cols, r, &mut rng);
    matrix::canonicalize_signs(&mut left, &mut right);
    let factors = SvdFactors {
        left,
        singulars: DVector::from_column_slice(&spec.singulars),
        right,
        coverage: Coverage::Exact,
    };
    Ok(LowRank { matrix: factors.reconstruct(), factors })
}

/// A signal `A`, noise `E`, the observation `Ã = A + E` and cached SVDs.
#[derive(Debug, Clone)]
pub struct PerturbationInstance {
    pub a: DenseMatrix,
    pub e: DenseMatrix,
    pub sum: DenseMatrix,
    pub svd_a: SvdFactors,
    pub svd_sum: SvdFactors,
    pub seed: u64,
}

impl PerturbationInstance {
    pub fn shape(&self) -> (usize, usize) {
        self.a.shape()
    }

    /// Rank of the signal as recorded by its factorization.
    pub fn signal_rank(&self) -> usize {
        match self.svd_a.coverage {
            Coverage::Exact => self.svd_a.len(),
            _ => matrix::effective_rank(&self.svd_a, 1e-12),
        }
    }

    /// Builds an instance from a generated signal, reusing its exact
    /// factors. With `leading = Some(t)` only the top `t` singular triplets
    /// of `Ã` are computed.
    pub fn from_signal(signal: LowRank, e: DenseMatrix, seed: u64, leading: Option<usize>) -> Result<Self> {
        check_same_shape(&signal.matrix, &e)?;
        matrix::check_finite(&e)?;
        let sum = &signal.matrix + &e;
        let svd_sum = match leading {
            Some(t) => matrix::truncated_svd(&sum, t)?,
            None => matrix::svd(&sum)?,
        };
        Ok(Self { a: signal.matrix, e, sum, svd_a: signal.factors, svd_sum, seed })
    }
}

fn check_same_shape(a: &DenseMatrix, e: &DenseMatrix) -> Result<()> {
    ensure!(
        a.shape() == e.shape(),
        DimensionMismatch,
        "signal is {:?} but noise is {:?}",
        a.shape(),
        e.shape()
    );
    Ok(())
}

/// `Ã = A + E` with full SVDs of `A` and `Ã`.
pub fn perturb(a: &DenseMatrix, e: &DenseMatrix) -> Result<PerturbationInstance> {
    check_same_shape(a, e)?;
    let sum = a + e;
    Ok(PerturbationInstance {
        svd_a: matrix::svd(a)?,
        svd_sum: matrix::svd(&sum)?,
        a: a.clone(),
        e: e.clone(),
        sum,
        seed: 0,
    })
}

/// How cluster labels are assigned to observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "labels", rename_all = "snake_case")]
pub enum LabelRule {
    /// Contiguous blocks whose sizes differ by at most one.
    Balanced,
    /// One 0-based cluster index per observation.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    /// Ambient dimension.
    pub p: usize,
    /// Number of observations.
    pub n: usize,
    pub k: usize,
    /// One center of length `p` per cluster.
    pub centers: Vec<Vec<f64>>,
    #[serde(default = "balanced")]
    pub labels: LabelRule,
    /// Emit the centers without noise.
    #[serde(default)]
    pub noiseless: bool,
}

fn balanced() -> LabelRule {
    LabelRule::Balanced
}

impl GmmSpec {
    /// Centers `scale·e_1, …, scale·e_k` with balanced labels.
    pub fn axis_centers(p: usize, n: usize, k: usize, scale: f64) -> Self {
        assert!(k <= p, "{k} axis centers need dimension at least {k}");
        let centers = (0..k)
            .map(|j| {
                let mut c = vec![0.0; p];
                c[j] = scale;
                c
            })
            .collect();
        Self { p, n, k, centers, labels: LabelRule::Balanced, noiseless: false }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.p >= 1 && self.n >= 1 && self.k >= 1, InvalidParameter, "p, n, k must be positive");
        ensure!(self.k <= self.n, InvalidParameter, "k = {} exceeds n = {}", self.k, self.n);
        ensure!(self.centers.len() == self.k, InvalidParameter, "need {} centers", self.k);
        for c in &self.centers {
            ensure!(c.len() == self.p, InvalidParameter, "center length {} != p = {}", c.len(), self.p);
            ensure!(c.iter().all(|x| x.is_finite()), InvalidParameter, "centers must be finite");
        }
        ensure!(self.min_center_distance() > 0.0, InvalidParameter, "centers must be pairwise distinct");
        if let LabelRule::Explicit(labels) = &self.labels {
            ensure!(labels.len() == self.n, InvalidParameter, "need {} labels", self.n);
            ensure!(labels.iter().all(|&l| l < self.k), InvalidParameter, "labels must lie in 0..{}", self.k);
        }
        Ok(())
    }

    /// `Δ`, the smallest distance between two centers.
    pub fn min_center_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                let d: f64 = self.centers[i]
                    .iter()
                    .zip(&self.centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                best = best.min(d);
            }
        }
        best
    }

    pub fn labeling(&self) -> Result<Labeling> {
        let labels = match &self.labels {
            LabelRule::Balanced => (0..self.n).map(|i| i * self.k / self.n).collect(),
            LabelRule::Explicit(l) => l.clone(),
        };
        Labeling::new(labels, self.k)
    }
}

#[derive(Debug, Clone)]
pub struct GmmSample {
    /// `p × n` observations, one per column.
    pub x: DenseMatrix,
    /// `𝔼(X)`, the center of each observation.
    pub mean: DenseMatrix,
    pub truth: Labeling,
    pub delta: f64,
    pub c_min: usize,
    /// Smallest nonzero singular value of `𝔼(X)` (the `k`-th one).
    pub sigma_min: f64,
}

impl GmmSample {
    /// `Uᵀ𝔼(X)` with `U` the top-`k` left singular vectors of `𝔼(X)`.
    pub fn truth_embedding(&self) -> Result<DenseMatrix> {
        let f = matrix::svd(&self.mean)?;
        let k = self.truth.k().min(f.len());
        Ok(f.left.columns(0, k).transpose() * &self.mean)
    }
}

pub fn sample_gmm(spec: &GmmSpec, seed: u64) -> Result<GmmSample> {
    spec.validate()?;
    let truth = spec.labeling()?;
    let mean = DMatrix::from_fn(spec.p, spec.n, |i, j| spec.centers[truth.labels()[j]][i]);
    let x = if spec.noiseless { mean.clone() } else { &mean + gen_gaussian(spec.p, spec.n, seed) };
    let sv = matrix::singular_values(&mean)?;
    let sigma_min = sv.get(spec.k - 1).copied().unwrap_or(0.0);
    let c_min = truth.sizes().into_iter().min().unwrap_or(0);
    Ok(GmmSample { x, mean, delta: spec.min_center_distance(), c_min, sigma_min, truth })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmatrixSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// 0-based row indices of each block.
    pub row_sets: Vec<Vec<usize>>,
    /// 0-based column indices of each block.
    pub col_sets: Vec<Vec<usize>>,
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub noiseless: bool,
}

impl SubmatrixSpec {
    /// Blocks of the given `(rows, cols)` sizes laid out along the diagonal
    /// starting at index 0.
    pub fn diagonal_blocks(m: usize, n: usize, sizes: &[(usize, usize)], amplitudes: &[f64]) -> Self {
        let (mut r0, mut c0) = (0, 0);
        let mut row_sets = Vec::new();
        let mut col_sets = Vec::new();
        for &(r, c) in sizes {
            row_sets.push((r0..r0 + r).collect());
            col_sets.push((c0..c0 + c).collect());
            r0 += r;
            c0 += c;
        }
        Self { m, n, k: sizes.len(), row_sets, col_sets, amplitudes: amplitudes.to_vec(), noiseless: false }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.m >= 1 && self.n >= 1 && self.k >= 1, InvalidParameter, "m, n, k must be positive");
        ensure!(
            self.row_sets.len() == self.k && self.col_sets.len() == self.k && self.amplitudes.len() == self.k,
            InvalidParameter,
            "need {} row sets, column sets and amplitudes",
            self.k
        );
        ensure!(
            self.amplitudes.iter().all(|l| l.is_finite() && *l != 0.0),
            InvalidParameter,
            "amplitudes must be finite and nonzero"
        );
        check_disjoint(&self.row_sets, self.m, "row")?;
        check_disjoint(&self.col_sets, self.n, "column")?;
        Ok(())
    }

    /// Group of each index: `i + 1` for block `i`, `0` for isolated indices.
    fn membership(sets: &[Vec<usize>], len: usize, k: usize) -> Result<Labeling> {
        let mut labels = vec![0; len];
        for (i, set) in sets.iter().enumerate() {
            for &j in set {
                labels[j] = i + 1;
            }
        }
        Labeling::new(labels, k + 1)
    }
}

fn check_disjoint(sets: &[Vec<usize>], len: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; len];
    for set in sets {
        ensure!(!set.is_empty(), InvalidParameter, "{what} sets must be nonempty");
        for &j in set {
            ensure!(j < len, InvalidParameter, "{what} index {j} outside 0..{len}");
            ensure!(!seen[j], InvalidParameter, "{what} index {j} appears in two blocks");
            seen[j] = true;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SubmatrixSample {
    pub x: DenseMatrix,
    pub signal: DenseMatrix,
    /// `k + 1` row groups; group 0 holds the rows outside every block.
    pub row_truth: Labeling,
    /// `k + 1` column groups; group 0 holds the columns outside every block.
    pub col_truth: Labeling,
    pub delta_r: f64,
    pub delta_c: f64,
    pub sigma_min: f64,
    pub r_min: usize,
    pub c_min: usize,
}

pub fn plant_submatrices(spec: &SubmatrixSpec, seed: u64) -> Result<SubmatrixSample> {
    spec.validate()?;
    let mut signal = DMatrix::zeros(spec.m, spec.n);
    for ((rows, cols), &lambda) in spec.row_sets.iter().zip(&spec.col_sets).zip(&spec.amplitudes) {
        for &i in rows {
            for &j in cols {
                signal[(i, j)] = lambda;
            }
        }
    }
    let x = if spec.noiseless { signal.clone() } else { &signal + gen_gaussian(spec.m, spec.n, seed) };
    let blocks = || spec.row_sets.iter().zip(&spec.col_sets).zip(&spec.amplitudes);
    let fold_min = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    let delta_r = fold_min(&mut blocks().map(|((r, _), l)| l.abs() * (r.len() as f64).sqrt()));
    let delta_c = fold_min(&mut blocks().map(|((_, c), l)| l.abs() * (c.len() as f64).sqrt()));
    let sigma_min = fold_min(&mut blocks().map(|((r, c), l)| l.abs() * ((r.len() * c.len()) as f64).sqrt()));
    Ok(SubmatrixSample {
        x,
        signal,
        row_truth: SubmatrixSpec::membership(&spec.row_sets, spec.m, spec.k)?,
        col_truth: SubmatrixSpec::membership(&spec.col_sets, spec.n, spec.k)?,
        delta_r,
        delta_c,
        sigma_min,
        r_min: spec.row_sets.iter().map(Vec::len).min().unwrap_or(0),
        c_min: spec.col_sets.iter().map(Vec::len).min().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{effective_rank, orthonormality_defect, two_inf_norm};

    #[test]
    fn gaussian_is_reproducible() {
        assert_eq!(gen_gaussian(4, 3, 17), gen_gaussian(4, 3, 17));
        assert_ne!(gen_gaussian(4, 3, 17), gen_gaussian(4, 3, 18));
    }

    #[test]
    fn gaussian_sample_mean_is_near_zero() {
        let g = gen_gaussian(1000, 1000, 1);
        let mean = g.sum() / 1e6;
        // Three standard errors of a mean of 10⁶ unit-variance draws.
        assert!(mean.abs() < 3e-3, "{mean}");
    }

    #[test]
    fn derived_seeds_follow_the_golden_ratio_rule() {
        assert_eq!(derive_seed(7, 0), 7);
        assert_eq!(derive_seed(7, 1), 7 ^ 0x9E37_79B9_7F4A_7C15);
        assert_ne!(substream(7, 0), substream(7, 1));
    }

    #[test]
    fn haar_columns_are_orthonormal() {
        let q = haar_orthonormal(30, 5, &mut rng_from_seed(2));
        assert!(orthonormality_defect(&q) < 1e-12);
    }

    #[test]
    fn low_rank_examples() {
        let spec = LowRankSpec { rows: 4, cols: 4, singulars: vec![5.0], factor_mode: FactorMode::Haar };
        let lr = gen_low_rank(&spec, 3).unwrap();
        let sv = matrix::singular_values(&lr.matrix).unwrap();
        assert!((sv[0] - 5.0).abs() < 5e-10);
        assert!(sv[1] < 1e-12);

        let spec = LowRankSpec {
            rows: 6,
            cols: 5,
            singulars: vec![3.0, 2.0, 1.0],
            factor_mode: FactorMode::Coherent { row: 0 },
        };
        let lr = gen_low_rank(&spec, 4).unwrap();
        assert!((two_inf_norm(&lr.factors.left) - 1.0).abs() < 1e-15);
        assert!(orthonormality_defect(&lr.factors.left) < 1e-12);
        assert_eq!(effective_rank(&matrix::svd(&lr.matrix).unwrap(), 1e-8), 3);
    }

    #[test]
    fn low_rank_rejects_excess_rank() {
        let spec = LowRankSpec { rows: 2, cols: 3, singulars: vec![3.0, 2.0, 1.0], factor_mode: FactorMode::Haar };
        assert!(gen_low_rank(&spec, 0).is_err());
    }

    #[test]
    fn perturb_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[3.0, 1.0]));
        let e = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0]));
        let inst = perturb(&a, &e).unwrap();
        assert_eq!(inst.svd_sum.singulars.as_slice(), &[4.0, 0.0]);

        let zero = DMatrix::zeros(2, 2);
        assert_eq!(perturb(&a, &zero).unwrap().svd_sum.singulars, perturb(&a, &zero).unwrap().svd_a.singulars);
        let inst = perturb(&zero, &e).unwrap();
        assert_eq!(inst.svd_sum.singulars.as_slice(), &[1.0, 1.0]);
        assert!(perturb(&a, &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn gmm_examples() {
        let spec = GmmSpec {
            p: 2,
            n: 6,
            k: 3,
            centers: vec![vec![0.0, 0.0], vec![5.0, 0.0], vec![9.0, 0.0]],
            labels: LabelRule::Balanced,
            noiseless: true,
        };
        let s = sample_gmm(&spec, 1).unwrap();
        assert_eq!(s.delta, 4.0);
        assert_eq!(s.truth.sizes(), vec![2, 2, 2]);
        assert_eq!(s.x, s.mean);
        for j in 0..6 {
            assert_eq!(s.x[(0, j)], spec.centers[s.truth.labels()[j]][0]);
        }
    }

    #[test]
    fn gmm_embedding_preserves_center_distances() {
        let mut spec = GmmSpec::axis_centers(5, 12, 3, 4.0);
        spec.centers[2] = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        spec.noiseless = true;
        let s = sample_gmm(&spec, 0).unwrap();
        let emb = s.truth_embedding().unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let d_emb = (emb.column(i) - emb.column(j)).norm();
                let d_raw = (s.mean.column(i) - s.mean.column(j)).norm();
                assert!((d_emb - d_raw).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn submatrix_examples() {
        let mut spec = SubmatrixSpec::diagonal_blocks(4, 4, &[(2, 2)], &[3.0]);
        spec.noiseless = true;
        let s = plant_submatrices(&spec, 0).unwrap();
        let sv = matrix::singular_values(&s.x).unwrap();
        assert!((sv[0] - 6.0).abs() < 1e-12);
        assert_eq!(s.sigma_min, 6.0);
        assert_eq!(s.col_truth.labels(), &[1, 1, 0, 0]);

        let spec = SubmatrixSpec::diagonal_blocks(10, 10, &[(4, 1), (1, 1)], &[2.0, -3.0]);
        let s = plant_submatrices(&spec, 0).unwrap();
        assert_eq!(s.delta_r, 3.0);

        let mut bad = SubmatrixSpec::diagonal_blocks(6, 6, &[(2, 2), (2, 2)], &[1.0, 1.0]);
        bad.row_sets[1][0] = 1;
        assert!(plant_submatrices(&bad, 0).is_err());
    }
}
