//! k-means, the spectral clustering algorithms for Gaussian mixtures and
//! planted submatrices, and label matching.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::matrix::{self, DenseMatrix};
use crate::models::{rng_from_seed, substream};
use crate::subspace::polar_factor;

/// Cluster assignments with 0-based labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    labels: Vec<usize>,
    k: usize,
}

impl Labeling {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        ensure!(k >= 1, InvalidParameter, "a labeling needs at least one cluster");
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(crate::Error::InvalidInput(format!("label {bad} outside 0..{k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of points carrying each label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Indices carrying label `group`, ascending.
    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == group).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_restarts() -> usize {
    10
}
fn default_max_iter() -> usize {
    100
}
fn default_tol() -> f64 {
    1e-8
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, restarts: default_restarts(), max_iter: default_max_iter(), tol: default_tol(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.k >= 1, InvalidParameter, "k must be positive");
        ensure!(self.restarts >= 1, InvalidParameter, "restarts must be positive");
        ensure!(self.max_iter >= 1, InvalidParameter, "max_iter must be positive");
        ensure!(self.tol >= 0.0, InvalidParameter, "tol must be nonnegative");
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labeling: Labeling,
    /// One center per column.
    pub centers: DenseMatrix,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub history: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Lloyd's algorithm with k-means++ seeding on the columns of `points`.
///
/// Each restart uses its own substream of `cfg.seed`; the result with the
/// smallest inertia wins, ties going to the earliest restart.
pub fn kmeans(points: &DenseMatrix, cfg: &KMeansConfig) -> Result<KMeansResult> {
    kmeans_anchored(points, cfg, &DMatrix::zeros(points.nrows(), 0))
}

/// k-means where the columns of `anchors` are centers that never move.
///
/// Anchors take the first labels; `cfg.k` counts anchors and free centers
/// together. An anchor may end up with no points.
pub fn kmeans_anchored(points: &DenseMatrix, cfg: &KMeansConfig, anchors: &DenseMatrix) -> Result<KMeansResult> {
    cfg.validate()?;
    matrix::check_finite(points)?;
    let n = points.ncols();
    ensure!(n >= cfg.k, InvalidParameter, "cannot form {} clusters from {n} points", cfg.k);
    ensure!(anchors.nrows() == points.nrows(), DimensionMismatch, "anchor dimension differs from points");
    ensure!(anchors.ncols() <= cfg.k, InvalidParameter, "more anchors than clusters");

    let mut best: Option<KMeansResult> = None;
    for restart in 0..cfg.restarts {
        let run = lloyd(points, cfg, anchors, restart)?;
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(points: &DenseMatrix, i: usize, centers: &DenseMatrix, j: usize) -> f64 {
    points.column(i).iter().zip(centers.column(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn nearest(points: &DenseMatrix, i: usize, centers: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centers.ncols() {
        let d = sq_dist(points, i, centers, j);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn seed_centers<R: Rng>(points: &DenseMatrix, k: usize, anchors: &DenseMatrix, rng: &mut R) -> DenseMatrix {
    let n = points.ncols();
    let mut centers = DMatrix::zeros(points.nrows(), k);
    let fixed = anchors.ncols();
    centers.columns_mut(0, fixed).copy_from(anchors);
    let mut chosen = fixed;
    if chosen == 0 {
        centers.set_column(0, &points.column(rng.random_range(0..n)));
        chosen = 1;
    }
    let mut d2: Vec<f64> = (0..n).map(|i| nearest(points, i, &centers.columns(0, chosen).into_owned()).1).collect();
    while chosen < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.set_column(chosen, &points.column(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centers, chosen));
        }
        chosen += 1;
    }
    centers
}

fn lloyd(points: &DenseMatrix, cfg: &KMeansConfig, anchors: &DenseMatrix, restart: usize) -> Result<KMeansResult> {
    let (dim, n, k) = (points.nrows(), points.ncols(), cfg.k);
    let fixed = anchors.ncols();
    let mut rng = rng_from_seed(substream(cfg.seed, restart as u64));
    let mut centers = seed_centers(points, k, anchors, &mut rng);
    let mut labels = vec![0usize; n];
    let mut dist = vec![0.0; n];
    let mut history = Vec::new();

    for iter in 0..cfg.max_iter {
        for i in 0..n {
            let (j, d) = nearest(points, i, &centers);
            labels[i] = j;
            dist[i] = d;
        }
        // Empty free clusters take the point farthest from its center.
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for j in fixed..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    counts[labels[i]] -= 1;
                    counts[j] = 1;
                    labels[i] = j;
                    dist[i] = 0.0;
                    centers.set_column(j, &points.column(i));
                }
            }
        }
        let inertia: f64 = dist.iter().sum();
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| prev - inertia <= cfg.tol * prev.max(f64::MIN_POSITIVE));
        history.push(inertia);
        if converged || iter + 1 == cfg.max_iter {
            break;
        }
        let mut sums = DMatrix::zeros(dim, k);
        for (i, &l) in labels.iter().enumerate() {
            let mut col = sums.column_mut(l);
            col += points.column(i);
        }
        for j in fixed..k {
            if counts[j] > 0 {
                centers.set_column(j, &(sums.column(j) / counts[j] as f64));
            }
        }
    }
    Ok(KMeansResult {
        labeling: Labeling::new(labels, k)?,
        centers,
        inertia: *history.last().expect("at least one iteration"),
        history,
        restart,
    })
}

/// Connected components of the graph joining columns at distance `≤ threshold`.
pub fn single_linkage(points: &DenseMatrix, threshold: f64) -> Result<Labeling> {
    matrix::check_finite(points)?;
    let n = points.ncols();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let t2 = threshold * threshold;
    for i in 0..n {
        for j in i + 1..n {
            if sq_dist(points, i, points, j) <= t2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut next = 0;
    for i in 0..n {
        let root = find(&mut parent, i);
        if ids[root] == usize::MAX {
            ids[root] = next;
            next += 1;
        }
        labels.push(ids[root]);
    }
    Labeling::new(labels, next.max(1))
}

/// Columns of `Ũ_kᵀX` for the top-`k` left singular vectors of `X`.
pub fn spectral_embedding(x: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    ensure!(
        k >= 1 && k <= x.nrows().min(x.ncols()),
        InvalidParameter,
        "embedding dimension {k} outside 1..={}",
        x.nrows().min(x.ncols())
    );
    let f = matrix::truncated_svd(x, k)?;
    Ok(f.left.transpose() * x)
}

/// Spectral clustering of the columns of a `p × n` data matrix.
pub fn spectral_gmm(x: &DenseMatrix, k: usize, cfg: &KMeansConfig) -> Result<Labeling> {
    let emb = spectral_embedding(x, k)?;
    let cfg = KMeansConfig { k, ..cfg.clone() };
    Ok(kmeans(&emb, &cfg)?.labeling)
}

/// Row and column groups found by [`spectral_submatrix`]. Group 0 collects
/// the indices outside every block and may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmatrixRecovery {
    pub row_groups: Labeling,
    pub col_groups: Labeling,
}

/// Locates `k` planted blocks with `(k+1)`-means on the columns of `Ũ_kᵀX`
/// and on the rows of `XṼ_k`. One of the `k+1` centers is pinned at the
/// origin, where the embedding of every index outside the blocks sits.
pub fn spectral_submatrix(x: &DenseMatrix, k: usize, cfg: &KMeansConfig) -> Result<SubmatrixRecovery> {
    let m = x.nrows().min(x.ncols());
    ensure!(k >= 1 && k <= m, InvalidParameter, "block count {k} outside 1..={m}");
    let f = matrix::truncated_svd(x, k)?;
    let col_emb = f.left.transpose() * x;
    let row_emb = (x * &f.right).transpose();
    let cfg = KMeansConfig { k: k + 1, ..cfg.clone() };
    let origin = DMatrix::zeros(k, 1);
    let cols = kmeans_anchored(&col_emb, &cfg, &origin)?.labeling;
    let rows = kmeans_anchored(&row_emb, &KMeansConfig { seed: substream(cfg.seed, 1), ..cfg.clone() }, &origin)?
        .labeling;
    Ok(SubmatrixRecovery { row_groups: rows, col_groups: cols })
}

/// `confusion[a][b]` counts points with truth `a` and found label `b`.
pub fn confusion(truth: &Labeling, found: &Labeling) -> Result<Vec<Vec<usize>>> {
    ensure!(
        truth.len() == found.len(),
        DimensionMismatch,
        "labelings have lengths {} and {}",
        truth.len(),
        found.len()
    );
    ensure!(truth.k() == found.k(), InvalidInput, "labelings use {} and {} clusters", truth.k(), found.k());
    let mut c = vec![vec![0usize; truth.k()]; truth.k()];
    for (&a, &b) in truth.labels().iter().zip(found.labels()) {
        c[a][b] += 1;
    }
    Ok(c)
}

/// Permutation `π` maximizing `Σ_b confusion[π(b)][b]`, by enumerating all
/// permutations. Returns `(matched count, π)`.
pub fn best_matching_enumerate(confusion: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let k = confusion.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let score = |p: &[usize]| (0..k).map(|b| confusion[p[b]][b]).sum::<usize>();
    let mut best = (score(&perm), perm.clone());
    // Heap's algorithm.
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let s = score(&perm);
            if s > best.0 {
                best = (s, perm.clone());
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Same objective as [`best_matching_enumerate`], solved as an assignment
/// problem with the Hungarian method in `O(k³)`.
pub fn best_matching_assignment(confusion: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let k = confusion.len();
    if k == 0 {
        return (0, Vec::new());
    }
    let top = confusion.iter().flatten().copied().max().unwrap_or(0) as i64;
    // Rows are found labels, columns truth labels; minimize top − count.
    let cost = |row: usize, col: usize| top - confusion[col][row] as i64;
    let inf = i64::MAX / 4;
    let (mut u, mut v) = (vec![0i64; k + 1], vec![0i64; k + 1]);
    let mut owner = vec![0usize; k + 1]; // owner[col] = row (1-based), 0 = free
    let mut way = vec![0usize; k + 1];
    for row in 1..=k {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = inf;
            let mut col1 = 0;
            for col in 1..=k {
                if !used[col] {
                    let cur = cost(r - 1, col - 1) - u[r] - v[col];
                    if cur < minv[col] {
                        minv[col] = cur;
                        way[col] = col0;
                    }
                    if minv[col] < delta {
                        delta = minv[col];
                        col1 = col;
                    }
                }
            }
            for col in 0..=k {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; k];
    for col in 1..=k {
        perm[owner[col] - 1] = col - 1;
    }
    let matched = (0..k).map(|b| confusion[perm[b]][b]).sum();
    (matched, perm)
}

const ENUMERATION_LIMIT: usize = 8;

fn best_matching(confusion: &[Vec<usize>]) -> (usize, Vec<usize>) {
    if confusion.len() <= ENUMERATION_LIMIT {
        best_matching_enumerate(confusion)
    } else {
        best_matching_assignment(confusion)
    }
}

/// Fraction of points misassigned under the best relabeling of `found`.
pub fn misclassification(truth: &Labeling, found: &Labeling) -> Result<f64> {
    Ok(recovery(truth, found)?.misclassification)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub found_labels: Labeling,
    pub misclassification: f64,
    pub exact: bool,
    /// `permutation[b]` is the truth label matched to found label `b`.
    pub permutation: Option<Vec<usize>>,
}

pub fn recovery(truth: &Labeling, found: &Labeling) -> Result<RecoveryResult> {
    let c = confusion(truth, found)?;
    let (matched, perm) = best_matching(&c);
    let n = truth.len();
    let wrong = n - matched;
    Ok(RecoveryResult {
        found_labels: found.clone(),
        misclassification: if n == 0 { 0.0 } else { wrong as f64 / n as f64 },
        exact: wrong == 0,
        permutation: Some(perm),
    })
}

/// `max_j ‖(Ũ_kᵀX)_j − Q·T_j‖` where `T` is the `k × n` truth embedding and
/// `Q` the orthogonal matrix that best aligns `T` with the empirical
/// embedding in Frobenius norm.
pub fn embedding_gap(x: &DenseMatrix, k: usize, truth_embedding: &DenseMatrix) -> Result<f64> {
    let emb = spectral_embedding(x, k)?;
    ensure!(
        truth_embedding.shape() == emb.shape(),
        DimensionMismatch,
        "truth embedding is {:?}, expected {:?}",
        truth_embedding.shape(),
        emb.shape()
    );
    let q = polar_factor(&(&emb * truth_embedding.transpose()))?;
    let diff = emb - q * truth_embedding;
    Ok(diff.column_iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Hypotheses of the spectral recovery theorems for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConditions {
    pub dim_ok: bool,
    pub separation_ok: bool,
    pub sigma_ok: bool,
    pub separation_threshold: f64,
    pub sigma_threshold: f64,
}

impl RecoveryConditions {
    pub fn all(&self) -> bool {
        self.dim_ok && self.separation_ok && self.sigma_ok
    }
}

fn dimension_condition(a: usize, b: usize, k: usize, l: f64) -> bool {
    let root = (a as f64).sqrt() + (b as f64).sqrt();
    root * root >= 32.0 * (l + 7.0) * ((a + b) as f64).ln() + 64.0 * 9f64.ln() * k as f64
}

fn separation_threshold(a: usize, b: usize, k: usize, smallest: usize, l: f64) -> f64 {
    let root = (a as f64).sqrt() + (b as f64).sqrt();
    let ln = ((a + b) as f64).ln();
    (40.0 * root / (smallest as f64).sqrt()).max(1800.0 * k as f64 * ((l + 7.0) * ln).sqrt())
}

fn sigma_threshold(a: usize, b: usize, k: usize, l: f64) -> f64 {
    let root = (a as f64).sqrt() + (b as f64).sqrt();
    let ln = ((a + b) as f64).ln();
    40.0 * root + 3.8e4 * k as f64 * (2.0 * 9f64.ln() * k as f64 + (l + 7.0) * ln).sqrt()
}

/// Hypotheses of the Gaussian mixture recovery theorem for `n` points in
/// dimension `p`, with failure exponent `l`.
pub fn gmm_conditions(p: usize, n: usize, k: usize, c_min: usize, delta: f64, sigma_min: f64, l: f64) -> RecoveryConditions {
    let sep = separation_threshold(n, p, k, c_min, l);
    let sig = sigma_threshold(n, p, k, l);
    RecoveryConditions {
        dim_ok: dimension_condition(n, p, k, l),
        separation_ok: delta >= sep,
        sigma_ok: sigma_min >= sig,
        separation_threshold: sep,
        sigma_threshold: sig,
    }
}

/// Hypotheses of the submatrix localization theorem. The separation check
/// covers both `Δ_R` (against `r_min`) and `Δ_C` (against `c_min`); the
/// reported threshold is the larger of the two.
#[allow(clippy::too_many_arguments)]
pub fn submatrix_conditions(
    m: usize,
    n: usize,
    k: usize,
    r_min: usize,
    c_min: usize,
    delta_r: f64,
    delta_c: f64,
    sigma_min: f64,
    l: f64,
) -> RecoveryConditions {
    let sep_r = separation_threshold(m, n, k, r_min, l);
    let sep_c = separation_threshold(m, n, k, c_min, l);
    let sig = sigma_threshold(m, n, k, l);
    RecoveryConditions {
        dim_ok: dimension_condition(m, n, k, l),
        separation_ok: delta_r >= sep_r && delta_c >= sep_c,
        sigma_ok: sigma_min >= sig,
        separation_threshold: sep_r.max(sep_c),
        sigma_threshold: sig,
    }
}

/// Copy of `points` with its columns repeated `times` times in a row.
#[cfg(test)]
fn repeat_columns(points: &DenseMatrix, times: usize) -> DenseMatrix {
    DMatrix::from_fn(points.nrows(), points.ncols() * times, |i, j| points[(i, j % points.ncols())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gen_gaussian, haar_orthonormal, plant_submatrices, sample_gmm, GmmSpec, SubmatrixSpec};

    fn line(values: &[f64]) -> DenseMatrix {
        DMatrix::from_row_slice(1, values.len(), values)
    }

    fn lab(labels: &[usize], k: usize) -> Labeling {
        Labeling::new(labels.to_vec(), k).unwrap()
    }

    #[test]
    fn kmeans_examples() {
        let r = kmeans(&line(&[0.0, 0.0, 10.0, 10.0]), &KMeansConfig::new(2, 1)).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_eq!(misclassification(&lab(&[0, 0, 1, 1], 2), &r.labeling).unwrap(), 0.0);

        let pts = line(&[1.0, 4.0, 9.0, -3.0]);
        assert_eq!(kmeans(&pts, &KMeansConfig::new(4, 0)).unwrap().inertia, 0.0);
        assert!(kmeans(&pts, &KMeansConfig::new(5, 0)).is_err());
    }

    #[test]
    fn kmeans_history_is_nonincreasing_and_restarts_help() {
        let pts = gen_gaussian(3, 200, 4);
        let cfg = KMeansConfig::new(5, 9);
        let best = kmeans(&pts, &cfg).unwrap();
        assert!(best.history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0]));
        for r in 0..cfg.restarts {
            let single = lloyd(&pts, &cfg, &DMatrix::zeros(3, 0), r).unwrap();
            assert!(best.inertia <= single.inertia);
        }
    }

    #[test]
    fn kmeans_on_duplicated_data_keeps_partition() {
        let mut pts = gen_gaussian(2, 30, 1);
        for j in 0..30 {
            pts[(0, j)] += 20.0 * (j % 3) as f64;
        }
        let once = kmeans(&pts, &KMeansConfig::new(3, 2)).unwrap().labeling;
        let twice = kmeans(&repeat_columns(&pts, 2), &KMeansConfig::new(3, 2)).unwrap().labeling;
        let first_half = lab(&twice.labels()[..30], 3);
        let second_half = lab(&twice.labels()[30..], 3);
        assert_eq!(misclassification(&once, &first_half).unwrap(), 0.0);
        assert_eq!(first_half, second_half);
    }

    #[test]
    fn anchored_center_can_stay_empty() {
        let pts = line(&[10.0, 10.5, 20.0, 20.5]);
        let r = kmeans_anchored(&pts, &KMeansConfig::new(3, 0), &DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(r.labeling.sizes()[0], 0);
        assert_eq!(r.centers[(0, 0)], 0.0);
    }

    #[test]
    fn single_linkage_examples() {
        let l = single_linkage(&line(&[0.0, 1.0, 10.0, 11.0, 30.0]), 2.0).unwrap();
        assert_eq!(l.labels(), &[0, 0, 1, 1, 2]);
    }

    #[test]
    fn misclassification_examples() {
        let z = lab(&[0, 0, 1, 1], 2);
        assert_eq!(misclassification(&z, &lab(&[1, 1, 0, 0], 2)).unwrap(), 0.0);
        assert_eq!(misclassification(&z, &lab(&[0, 1, 0, 1], 2)).unwrap(), 0.5);
        assert_eq!(misclassification(&z, &z).unwrap(), 0.0);
        assert!(misclassification(&z, &lab(&[0, 1], 2)).is_err());
    }

    #[test]
    fn matching_methods_agree_on_fixed_case() {
        let c = vec![vec![3, 0, 5], vec![1, 7, 0], vec![4, 2, 2]];
        let (a, _) = best_matching_enumerate(&c);
        let (b, perm) = best_matching_assignment(&c);
        assert_eq!(a, 16);
        assert_eq!(a, b);
        assert_eq!((0..3).map(|j| c[perm[j]][j]).sum::<usize>(), b);
    }

    #[test]
    fn spectral_gmm_noiseless_and_trivial() {
        let mut spec = GmmSpec::axis_centers(4, 20, 2, 50.0);
        spec.noiseless = true;
        let s = sample_gmm(&spec, 0).unwrap();
        let found = spectral_gmm(&s.x, 2, &KMeansConfig::new(2, 0)).unwrap();
        assert_eq!(misclassification(&s.truth, &found).unwrap(), 0.0);
        let one = spectral_gmm(&s.x, 1, &KMeansConfig::new(1, 0)).unwrap();
        assert!(one.labels().iter().all(|&l| l == 0));
        assert!(embedding_gap(&s.x, 2, &s.truth_embedding().unwrap()).unwrap() < 1e-9);
    }

    #[test]
    fn spectral_gmm_is_rotation_invariant() {
        let s = sample_gmm(&GmmSpec::axis_centers(6, 60, 3, 12.0), 3).unwrap();
        let q = haar_orthonormal(6, 6, &mut rng_from_seed(5));
        let a = spectral_gmm(&s.x, 3, &KMeansConfig::new(3, 0)).unwrap();
        let b = spectral_gmm(&(&q * &s.x), 3, &KMeansConfig::new(3, 0)).unwrap();
        assert_eq!(misclassification(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn spectral_submatrix_noiseless_block() {
        let mut spec = SubmatrixSpec::diagonal_blocks(8, 10, &[(3, 4)], &[5.0]);
        spec.noiseless = true;
        let s = plant_submatrices(&spec, 0).unwrap();
        let r = spectral_submatrix(&s.x, 1, &KMeansConfig::new(2, 0)).unwrap();
        assert!(recovery(&s.row_truth, &r.row_groups).unwrap().exact);
        assert!(recovery(&s.col_truth, &r.col_groups).unwrap().exact);
    }

    #[test]
    fn spectral_submatrix_without_isolated_columns() {
        let mut spec = SubmatrixSpec::diagonal_blocks(6, 6, &[(3, 3), (3, 3)], &[4.0, 9.0]);
        spec.noiseless = true;
        let s = plant_submatrices(&spec, 0).unwrap();
        let r = spectral_submatrix(&s.x, 2, &KMeansConfig::new(3, 0)).unwrap();
        assert_eq!(r.col_groups.sizes()[0], 0);
        assert!(recovery(&s.col_truth, &r.col_groups).unwrap().exact);
    }

    #[test]
    fn theorem_thresholds() {
        let c = gmm_conditions(50, 300, 3, 100, 1e5 * 2f64.sqrt(), 1e6, 1.0);
        assert!(c.separation_ok && c.sigma_ok);
        let expected = 1800.0 * 3.0 * (8.0 * 350f64.ln()).sqrt();
        assert!((c.separation_threshold - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn embedding_shape_and_range() {
        let x = DMatrix::from_fn(3, 4, |i, j| (i + 2 * j) as f64);
        let emb = spectral_embedding(&x, 2).unwrap();
        assert_eq!(emb.shape(), (2, 4));
        assert!(spectral_embedding(&x, 4).is_err());
    }
}
