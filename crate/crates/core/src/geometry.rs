//! Constructive linear algebra used to audit overcrowding events: distances
//! to column spans, coordinate restriction, compressibility, Cauchy–Binet
//! minor selection, restricted invertibility subset selection and
//! length-squared column sampling.
//!
//! All index sets are 0-based.

use itertools::Itertools;
use nalgebra::DVector;
use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::RealMatrix;

/// Relative rank tolerance for orthonormalization.
pub const RANK_TOL: f64 = 1e-10;
/// Largest number of candidate subsets any exhaustive search may visit.
pub const SUBSET_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressParams {
    /// Sparsity fraction: sparse vectors have at most `floor(c0 n)` nonzeros.
    pub c0: f64,
    /// Distance threshold to the sparse set.
    pub c1: f64,
}

impl Default for CompressParams {
    fn default() -> Self {
        Self { c0: 0.1, c1: 0.1 }
    }
}

impl CompressParams {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0 < 1.0 && c1 > 0.0 && c1 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "compressibility constants must lie in (0, 1), got c0={c0}, c1={c1}"
            )));
        }
        Ok(Self { c0, c1 })
    }
}

/// Orthonormal basis (as columns) of the span of `cols`, by modified
/// Gram–Schmidt with one reorthogonalization pass. Columns whose residual
/// falls below `RANK_TOL` times the largest column norm are dropped.
pub fn orthonormal_basis(cols: &RealMatrix) -> RealMatrix {
    let n = cols.nrows();
    let scale = (0..cols.ncols()).map(|j| cols.column(j).norm()).fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    if scale == 0.0 {
        return RealMatrix::zeros(n, 0);
    }
    for j in 0..cols.ncols() {
        let mut v = cols.column(j).into_owned();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > RANK_TOL * scale {
            basis.push(v / norm);
        }
    }
    if basis.is_empty() {
        return RealMatrix::zeros(n, 0);
    }
    RealMatrix::from_columns(&basis)
}

fn residual_against(c: &DVector<f64>, q: &RealMatrix) -> DVector<f64> {
    let mut r = c.clone();
    for _ in 0..2 {
        if q.ncols() > 0 {
            let coeff = q.tr_mul(&r);
            r -= q * coeff;
        }
    }
    r
}

/// Euclidean distance from `c` to the span of the columns of `h`.
pub fn dist_to_colspan(c: &DVector<f64>, h: &RealMatrix) -> Result<f64> {
    if c.len() != h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "vector has {} coordinates, span lives in R^{}",
            c.len(),
            h.nrows()
        )));
    }
    if h.ncols() == 0 {
        return Ok(c.norm());
    }
    let q = orthonormal_basis(h);
    Ok(residual_against(c, &q).norm())
}

fn sorted_index_set(idx: &[usize], dim: usize) -> Result<Vec<usize>> {
    if idx.is_empty() {
        return Err(Error::InvalidArgument("index set must be nonempty".into()));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= dim) {
        return Err(Error::IndexOutOfRange { index: bad, dim });
    }
    let mut s = idx.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// `v_I`: the coordinates of `v` indexed by `idx`, in increasing index order.
pub fn restrict_coords(v: &DVector<f64>, idx: &[usize]) -> Result<DVector<f64>> {
    let s = sorted_index_set(idx, v.len())?;
    Ok(DVector::from_iterator(s.len(), s.iter().map(|&i| v[i])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestrictionCheck {
    pub full: f64,
    pub restricted: f64,
    pub holds: bool,
}

/// Compares `dist(c, H)` with `dist(c_I, H_I)`, where `H_I` restricts every
/// spanning column to the coordinates in `idx`.
pub fn check_restriction_monotonicity(
    c: &DVector<f64>,
    h: &RealMatrix,
    idx: &[usize],
) -> Result<RestrictionCheck> {
    let full = dist_to_colspan(c, h)?;
    let s = sorted_index_set(idx, c.len())?;
    let c_i = restrict_coords(c, &s)?;
    let h_i = h.select_rows(s.iter());
    let restricted = dist_to_colspan(&c_i, &h_i)?;
    Ok(RestrictionCheck { full, restricted, holds: full >= restricted - 1e-9 })
}

/// Distance from a unit vector to the `floor(c0 n)`-sparse vectors, and
/// whether that distance is within `c1`.
pub fn is_compressible(x: &DVector<f64>, params: &CompressParams) -> Result<(bool, f64)> {
    let norm = x.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit(norm));
    }
    let n = x.len();
    let keep = ((params.c0 * n as f64).floor() as usize).min(n);
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    // The nearest s-sparse vector copies the s largest coordinates.
    let tail: f64 = sq[keep..].iter().rev().sum();
    let dist = tail.sqrt();
    Ok((dist <= params.c1, dist))
}

fn det_of_columns(z: &RealMatrix, cols: &[usize]) -> f64 {
    z.select_columns(cols.iter()).determinant()
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `|det(Z_J Z_J^T) - sum_{S subset J, |S| = k} det(Z_S)^2|` for a `k x m`
/// matrix `Z`.
pub fn cauchy_binet_residual(z: &RealMatrix, j: &[usize]) -> Result<f64> {
    let k = z.nrows();
    let s = sorted_index_set(j, z.ncols())?;
    if s.len() < k {
        return Err(Error::SubsetTooSmall { size: s.len(), k });
    }
    let candidates = binomial(s.len(), k);
    if candidates > SUBSET_BUDGET {
        return Err(Error::TooLarge { candidates, budget: SUBSET_BUDGET });
    }
    let zj = z.select_columns(s.iter());
    let gram = (&zj * zj.transpose()).determinant();
    let sum: f64 = s
        .iter()
        .copied()
        .combinations(k)
        .map(|sub| det_of_columns(z, &sub).powi(2))
        .sum();
    Ok((gram - sum).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minor {
    pub indices: Vec<usize>,
    pub det_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinorSearch {
    /// Columns that passed the large-norm filter.
    pub good_columns: Vec<usize>,
    /// Qualifying k-subsets of good columns, in lexicographic order.
    pub tuples: Vec<Minor>,
    pub candidates: u64,
    /// `tuples.len() / candidates`.
    pub fraction: f64,
}

/// Enumerates `k`-subsets of columns of the `k x n` matrix `Z` whose
/// squared determinant is at least `theta * n^-k`.
///
/// With `bad_column_c0 = Some(c0)`, columns with
/// `||y_i|| >= c0^{-1/2} sqrt(k/n)` are discarded first.
pub fn select_minors_by_determinant(
    z: &RealMatrix,
    theta: f64,
    bad_column_c0: Option<f64>,
) -> Result<MinorSearch> {
    let (k, n) = z.shape();
    if k == 0 || k > n {
        return Err(Error::BadK { k, min: 1, max: n });
    }
    let good_columns: Vec<usize> = match bad_column_c0 {
        Some(c0) => {
            let limit = (k as f64 / n as f64).sqrt() / c0.sqrt();
            (0..n).filter(|&i| z.column(i).norm() < limit).collect()
        }
        None => (0..n).collect(),
    };
    let candidates = binomial(good_columns.len(), k);
    if candidates > SUBSET_BUDGET {
        return Err(Error::TooLarge { candidates, budget: SUBSET_BUDGET });
    }
    let cutoff = theta * (n as f64).powi(-(k as i32));
    let tuples: Vec<Minor> = good_columns
        .iter()
        .copied()
        .combinations(k)
        .filter_map(|idx| {
            let det_sq = det_of_columns(z, &idx).powi(2);
            (det_sq >= cutoff).then_some(Minor { indices: idx, det_sq })
        })
        .collect();
    let fraction = if candidates == 0 { 0.0 } else { tuples.len() as f64 / candidates as f64 };
    Ok(MinorSearch { good_columns, tuples, candidates: candidates as u64, fraction })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionMethod {
    BruteForce,
    Greedy,
    LengthSquaredSampling { seed: u64 },
}

/// Result of a restricted invertibility search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSelection {
    pub indices: Vec<usize>,
    /// Whether `indices` are pairwise distinct (always true for `ny_select`).
    pub distinct: bool,
    /// Smallest singular value of the selected `k x l` submatrix.
    pub sigma_min_restricted: f64,
    /// `min_r sqrt(d r / ((r - l) sum_{i >= r} sigma_i(Z)^2))`.
    pub certified_bound: f64,
    pub best_r: usize,
    /// The same expression at `r = ceil((k + l) / 2)`.
    pub bound_at_mid_r: f64,
    /// Smallest constant with `1 / sigma_min_restricted <= K0 * certified_bound`.
    pub k0_used: f64,
    pub method: SelectionMethod,
}

/// Restricted invertibility bound for a `k x d` matrix with singular values
/// `sv` (descending) and target size `l`. Returns `(min bound, argmin r,
/// bound at r = ceil((k+l)/2))`, with `r` 1-based.
pub fn ny_bound(sv: &[f64], d: usize, l: usize) -> (f64, usize, f64) {
    let k = sv.len();
    let at = |r: usize| -> f64 {
        let tail: f64 = sv[r - 1..].iter().map(|s| s * s).sum();
        ((d * r) as f64 / ((r - l) as f64 * tail)).sqrt()
    };
    let (mut best, mut best_r) = (f64::INFINITY, l + 1);
    for r in (l + 1)..=k {
        let b = at(r);
        if b < best {
            best = b;
            best_r = r;
        }
    }
    let mid = (k + l).div_ceil(2).max(l + 1);
    (best, best_r, at(mid))
}

fn restricted_sigma(z: &RealMatrix, idx: &[usize]) -> f64 {
    z.select_columns(idx.iter())
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn greedy_subset(z: &RealMatrix, l: usize) -> Vec<usize> {
    let d = z.ncols();
    let mut chosen: Vec<usize> = Vec::with_capacity(l);
    while chosen.len() < l {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..d).filter(|c| !chosen.contains(c)) {
            let mut trial = chosen.clone();
            trial.push(c);
            let s = restricted_sigma(z, &trial);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        chosen.push(best.expect("l < d").0);
    }
    // Exchange pass: swap a chosen column for an outside one while it helps.
    let mut current = restricted_sigma(z, &chosen);
    for _ in 0..(100 * l) {
        let mut improved = false;
        'search: for pos in 0..l {
            for c in (0..d).filter(|c| !chosen.contains(c)) {
                let mut trial = chosen.clone();
                trial[pos] = c;
                let s = restricted_sigma(z, &trial);
                if s > current * (1.0 + 1e-12) {
                    chosen = trial;
                    current = s;
                    improved = true;
                    break 'search;
                }
            }
        }
        if !improved {
            break;
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Selects `l` distinct columns of a full-rank `k x d` matrix with a large
/// restricted smallest singular value, and reports the restricted
/// invertibility bound together with the constant this instance needs.
pub fn ny_select(z: &RealMatrix, l: usize, method: SelectionMethod) -> Result<SubsetSelection> {
    let (k, d) = z.shape();
    if k > d {
        return Err(Error::DimensionMismatch(format!("need k <= d, got {k}x{d}")));
    }
    if l == 0 || l >= k {
        return Err(Error::BadK { k: l, min: 1, max: k.saturating_sub(1) });
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let mut sv: Vec<f64> = z.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[k - 1] <= RANK_TOL * sv[0] {
        return Err(Error::RankDeficient(format!("sigma_k / sigma_1 = {:e}", sv[k - 1] / sv[0])));
    }
    let indices = match method {
        SelectionMethod::BruteForce => {
            let candidates = binomial(d, l);
            if candidates > SUBSET_BUDGET {
                return Err(Error::TooLarge { candidates, budget: SUBSET_BUDGET });
            }
            let mut best: Option<(Vec<usize>, f64)> = None;
            for idx in (0..d).combinations(l) {
                let s = restricted_sigma(z, &idx);
                if best.as_ref().map_or(true, |(_, b)| s > *b) {
                    best = Some((idx, s));
                }
            }
            best.expect("at least one subset").0
        }
        SelectionMethod::Greedy => greedy_subset(z, l),
        SelectionMethod::LengthSquaredSampling { seed } => {
            let weights: Vec<f64> = (0..d).map(|j| z.column(j).norm_squared()).collect();
            let dist = WeightedIndex::new(&weights)
                .map_err(|e| Error::Numeric(format!("column weights: {e}")))?;
            let mut rng = RngStream::new(seed, 0).rng();
            let mut picked: Vec<usize> = Vec::with_capacity(l);
            for _ in 0..(10_000 * l) {
                let j = dist.sample(&mut rng);
                if !picked.contains(&j) {
                    picked.push(j);
                    if picked.len() == l {
                        break;
                    }
                }
            }
            if picked.len() < l {
                return Err(Error::Numeric("sampling found too few distinct columns".into()));
            }
            picked.sort_unstable();
            picked
        }
    };
    let sigma = restricted_sigma(z, &indices);
    let (certified_bound, best_r, bound_at_mid_r) = ny_bound(&sv, d, l);
    Ok(SubsetSelection {
        indices,
        distinct: true,
        sigma_min_restricted: sigma,
        certified_bound,
        best_r,
        bound_at_mid_r,
        k0_used: 1.0 / (sigma * certified_bound),
        method,
    })
}

/// Column sampling probabilities proportional to squared column lengths.
pub fn length_squared_probabilities(x: &RealMatrix) -> Result<Vec<f64>> {
    let weights: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).norm_squared()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone)]
pub struct LengthSquaredSample {
    pub indices: Vec<usize>,
    /// `k x d` matrix of unit-normalized sampled columns.
    pub normalized: RealMatrix,
    /// `||X||_HS^2 / d`.
    pub scale: f64,
    /// `||X X^T - scale * Xs Xs^T||_2`.
    pub approx_error: f64,
    pub spectral_norm: f64,
}

impl LengthSquaredSample {
    pub fn sketch_gram(&self) -> RealMatrix {
        &self.normalized * self.normalized.transpose() * self.scale
    }
}

/// Draws `d` columns of `x` with replacement, with probability proportional
/// to their squared length, and normalizes each to unit length.
pub fn rv_length_squared_sample(x: &RealMatrix, d: usize, stream: &RngStream) -> Result<LengthSquaredSample> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let probs = length_squared_probabilities(x)?;
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::Numeric(format!("weights: {e}")))?;
    let mut rng = stream.rng();
    let indices: Vec<usize> = (0..d).map(|_| dist.sample(&mut rng)).collect();
    let cols: Vec<DVector<f64>> = indices.iter().map(|&j| x.column(j).normalize()).collect();
    let normalized = RealMatrix::from_columns(&cols);
    let hs = x.norm_squared();
    let scale = hs / d as f64;
    let diff = x * x.transpose() - &normalized * normalized.transpose() * scale;
    let approx_error = diff
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let spectral_norm = x.singular_values().iter().copied().fold(0.0, f64::max);
    Ok(LengthSquaredSample { indices, normalized, scale, approx_error, spectral_norm })
}

/// Stacks `k` orthonormal `n`-vectors as the rows of a `k x n` matrix `Z`,
/// whose columns `y_i` then satisfy `sum ||y_i||^2 = k`.
pub fn stacked_eigvec_matrix(vectors: &[DVector<f64>]) -> Result<RealMatrix> {
    let k = vectors.len();
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one vector".into()));
    }
    let n = vectors[0].len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch("vectors differ in length".into()));
    }
    let mut dev = 0.0f64;
    for i in 0..k {
        for j in i..k {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((vectors[i].dot(&vectors[j]) - target).abs());
        }
    }
    if dev > 1e-9 {
        return Err(Error::NotOrthonormal(dev));
    }
    let z = RealMatrix::from_fn(k, n, |i, j| vectors[i][j]);
    let total: f64 = (0..n).map(|j| z.column(j).norm_squared()).sum();
    assert!((total - k as f64).abs() <= 1e-9, "column mass {total} != {k}");
    Ok(z)
}
