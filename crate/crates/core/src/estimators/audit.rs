//! Trial-by-trial audit of the column-distance implication.
//!
//! If `sigma_{n-k+1}(M) <= eps / sqrt(n)`, let `Z` stack the bottom `k`
//! right singular vectors as rows, so `B = M Z^T` has columns of norm at
//! most `eps / sqrt(n)`. For a column set `J` with `A = Z_J^T` of full row
//! rank and right inverse `Abar = A^T (A A^T)^{-1}`,
//!
//! ```text
//! C_J + C_rest A' Abar = B Abar,      A' = Z_rest^T,
//! ```
//!
//! and projecting onto the complement of `H = span(C_rest)` gives
//! `sum_{j in J} dist(c_j, H)^2 <= |B Abar|_HS^2 <= |Abar|^2 k eps^2 / n`.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleSpec, Symmetry};
use crate::error::{Error, Result};
use crate::geometry::{dist_to_colspan, ny_select, select_minors_by_determinant, stacked_eigvec_matrix, SelectionMethod};
use crate::par::map_indexed;
use crate::rng::RngStream;
use crate::spectra::svd_sorted;
use crate::RealMatrix;

/// Relative tolerance of the distance inequality.
pub const AUDIT_REL_TOL: f64 = 1e-8;

/// How the column set `J` is chosen from `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MinorStrategy {
    /// Largest `|det Z_J|` among `k`-subsets of the columns that pass the
    /// norm filter with constant `c0`.
    Determinant { c0: f64 },
    /// `l < k` columns picked by exhaustive restricted invertibility search.
    NaorYoussef { l: usize },
}

impl Default for MinorStrategy {
    fn default() -> Self {
        MinorStrategy::Determinant { c0: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub sigma: f64,
    pub indices: Vec<usize>,
    pub dists: Vec<f64>,
    pub sum_dist_sq: f64,
    /// `|B Abar|_HS^2`.
    pub bound: f64,
    /// `bound / sum_dist_sq`; at least 1 when the inequality holds.
    pub slack: f64,
    pub holds: bool,
    /// Relative residual of the column identity.
    pub identity_residual: f64,
    pub abar_norm: f64,
    /// `|Abar|^2 k eps^2 / n`.
    pub chain_bound: f64,
    pub chain_holds: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub trials: u64,
    pub qualifying: u64,
    pub violations: u64,
    pub chain_violations: u64,
    pub min_slack: f64,
    pub max_identity_residual: f64,
}

impl AuditSummary {
    fn absorb(&mut self, r: &AuditRecord) {
        if self.qualifying == 0 {
            self.min_slack = f64::INFINITY;
        }
        self.qualifying += 1;
        self.violations += u64::from(!r.holds);
        self.chain_violations += u64::from(!r.chain_holds);
        self.min_slack = self.min_slack.min(r.slack);
        self.max_identity_residual = self.max_identity_residual.max(r.identity_residual);
    }
}

fn choose_columns(z: &RealMatrix, strategy: MinorStrategy) -> Result<Vec<usize>> {
    match strategy {
        MinorStrategy::Determinant { c0 } => {
            let k = z.nrows();
            let mut search = select_minors_by_determinant(z, 0.0, Some(c0))?;
            if search.good_columns.len() < k {
                search = select_minors_by_determinant(z, 0.0, None)?;
            }
            search
                .tuples
                .into_iter()
                .max_by(|a, b| a.det_sq.total_cmp(&b.det_sq))
                .map(|m| m.indices)
                .ok_or_else(|| Error::RankDeficient("no k-subset of columns".into()))
        }
        MinorStrategy::NaorYoussef { l } => Ok(ny_select(z, l, SelectionMethod::BruteForce)?.indices),
    }
}

/// Audits one matrix at level `eps`. Returns `None` when the event
/// `sigma_{n-k+1} <= eps / sqrt(n)` does not occur.
pub fn audit_instance(m: &RealMatrix, k: usize, eps: f64, strategy: MinorStrategy) -> Result<Option<AuditRecord>> {
    let n = m.ncols();
    if !m.is_square() {
        return Err(Error::InvalidMatrix("audit needs a square matrix".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::BadK { k, min: 1, max: n.saturating_sub(1) });
    }
    let threshold = eps / (n as f64).sqrt();
    let (sv, v) = svd_sorted(m, true)?;
    let sigma = sv[n - k];
    if sigma > threshold {
        return Ok(None);
    }
    let v = v.expect("requested right vectors");
    let bottom: Vec<DVector<f64>> = (n - k..n).map(|i| v.column(i).into_owned()).collect();
    let z = stacked_eigvec_matrix(&bottom)?;

    let j = choose_columns(&z, strategy)?;
    let rest: Vec<usize> = (0..n).filter(|i| !j.contains(i)).collect();
    let a = z.select_columns(j.iter()).transpose();
    let gram = &a * a.transpose();
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("selected minor is singular".into()))?;
    let abar = a.transpose() * gram_inv;
    let a_rest = z.select_columns(rest.iter()).transpose();
    let b = m * z.transpose();
    let b_abar = &b * &abar;
    let c_j = m.select_columns(j.iter());
    let c_rest = m.select_columns(rest.iter());

    let lhs = &c_j + &c_rest * &a_rest * &abar;
    let identity_residual = (&lhs - &b_abar).norm() / (c_j.norm() + b_abar.norm()).max(f64::MIN_POSITIVE);

    let dists = c_j
        .column_iter()
        .map(|c| dist_to_colspan(&c.into_owned(), &c_rest))
        .collect::<Result<Vec<f64>>>()?;
    let sum_dist_sq: f64 = dists.iter().map(|d| d * d).sum();
    let bound = b_abar.norm_squared();
    let holds = sum_dist_sq <= bound * (1.0 + AUDIT_REL_TOL);
    let abar_norm = abar.singular_values().iter().copied().fold(0.0, f64::max);
    let chain_bound = abar_norm * abar_norm * k as f64 * threshold * threshold;
    let chain_holds = bound <= chain_bound * (1.0 + AUDIT_REL_TOL);
    Ok(Some(AuditRecord {
        sigma,
        indices: j,
        dists,
        sum_dist_sq,
        bound,
        slack: bound / sum_dist_sq,
        holds,
        identity_residual,
        abar_norm,
        chain_bound,
        chain_holds,
    }))
}

fn haar_orthogonal(n: usize, rng: &mut impl rand::Rng) -> RealMatrix {
    let g = RealMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// `U diag(eps/(2 sqrt n) x k, 1 x (n-k)) V^T` with random orthogonal
/// `U, V`, so `sigma_{n-k+1} = eps / (2 sqrt n)` exactly.
pub fn planted_instance(n: usize, k: usize, eps: f64, stream: &RngStream) -> RealMatrix {
    let mut rng = stream.rng();
    let u = haar_orthogonal(n, &mut rng);
    let v = haar_orthogonal(n, &mut rng);
    let small = eps / (2.0 * (n as f64).sqrt());
    let d = DVector::from_fn(n, |i, _| if i >= n - k { small } else { 1.0 });
    u * RealMatrix::from_diagonal(&d) * v.transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceAuditReport {
    pub eps: f64,
    pub k: usize,
    pub strategy: MinorStrategy,
    pub summary: AuditSummary,
    /// Up to the first few qualifying records, for inspection.
    pub examples: Vec<AuditRecord>,
}

const KEPT_EXAMPLES: usize = 5;

fn summarize(eps: f64, k: usize, strategy: MinorStrategy, trials: u64, records: Vec<Option<AuditRecord>>) -> DistanceAuditReport {
    let mut summary = AuditSummary { trials, ..Default::default() };
    let mut examples = Vec::new();
    for r in records.into_iter().flatten() {
        summary.absorb(&r);
        if examples.len() < KEPT_EXAMPLES {
            examples.push(r);
        }
    }
    DistanceAuditReport { eps, k, strategy, summary, examples }
}

/// Samples `trials` matrices from `spec` and audits every one on which
/// the event occurs. Zero qualifying trials is reported as
/// [`Error::NoEvents`].
pub fn distance_event_experiment(
    spec: &EnsembleSpec,
    k: usize,
    eps: f64,
    strategy: MinorStrategy,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<DistanceAuditReport> {
    spec.validate()?;
    if spec.symmetry != Symmetry::Iid {
        return Err(Error::SpecMismatch("the audit runs on iid ensembles".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let n = spec.n;
    if k == 0 || k >= n {
        return Err(Error::BadK { k, min: 1, max: n.saturating_sub(1) });
    }
    let threshold = eps / (n as f64).sqrt();
    let records = map_indexed(trials, workers, |t| -> Result<Option<AuditRecord>> {
        let m = spec.sample(&RngStream::new(seed, t))?;
        // Cheap singular-values-only screen before the full audit.
        let (sv, _) = svd_sorted(&m, false)?;
        if sv[n - k] > threshold {
            return Ok(None);
        }
        audit_instance(&m, k, eps, strategy)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let report = summarize(eps, k, strategy, trials, records);
    if report.summary.qualifying == 0 {
        return Err(Error::NoEvents { trials });
    }
    Ok(report)
}

/// Audits `count` planted near-singular instances; every one qualifies.
pub fn planted_audit(
    n: usize,
    k: usize,
    eps: f64,
    strategy: MinorStrategy,
    count: u64,
    seed: u64,
    workers: usize,
) -> Result<DistanceAuditReport> {
    if k == 0 || k >= n {
        return Err(Error::BadK { k, min: 1, max: n.saturating_sub(1) });
    }
    let records = map_indexed(count, workers, |t| {
        audit_instance(&planted_instance(n, k, eps, &RngStream::new(seed, t)), k, eps, strategy)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(summarize(eps, k, strategy, count, records))
}
