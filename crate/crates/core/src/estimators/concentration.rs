use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fit::weighted_line;
use super::tail::TailEstimate;
use crate::ensembles::EntryDistribution;
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::rng::RngStream;
use crate::RealMatrix;

/// Stream tag for the fixed subspace, disjoint from per-trial streams.
const SUBSPACE_TAG: u64 = 0x5355_4253_5041_4345;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationParams {
    pub n: usize,
    pub k: usize,
    pub entry: EntryDistribution,
    /// Shift `u`; empty means the zero vector.
    #[serde(default)]
    pub u: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Deviation levels `t` for `P(|X - median| >= t sqrt(k))`.
    pub t_grid: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_level() -> f64 {
    0.95
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub estimate: TailEstimate,
    pub log_p: f64,
    /// Delta-method standard error of `log_p`; infinite without hits.
    pub log_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Slope of `log P` against `t^2`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub points_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub median: f64,
    /// Distribution-free order-statistic interval for the median.
    pub median_ci: (f64, f64),
    pub median_stderr: f64,
    /// `sqrt(k + |u|^2)`.
    pub predicted_median: f64,
    pub gap: f64,
    pub bound: Option<f64>,
    pub tail: Vec<TailPoint>,
    pub tail_fit: Option<TailFit>,
}

impl ConcentrationReport {
    /// Log tail strictly decreasing, with consecutive points separated by
    /// more than their combined standard errors.
    pub fn tail_separated(&self) -> bool {
        self.tail.windows(2).all(|w| {
            let gap = w[0].log_p - w[1].log_p;
            let se = w[0].log_stderr.hypot(w[1].log_stderr);
            gap.is_finite() && gap > se
        })
    }
}

/// Orthonormal basis of a uniformly random `k`-dimensional subspace of R^n.
pub fn random_subspace(n: usize, k: usize, stream: &RngStream) -> RealMatrix {
    let mut rng = stream.rng();
    let g = RealMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    g.qr().q()
}

/// Samples `X = |P c - u|` with `P` the projection onto a fixed random
/// `k`-dimensional subspace and `c` a vector of iid entries, then reports
/// the median against `sqrt(k + |u|^2)` and the deviation tail.
pub fn concentration_experiment(p: &ConcentrationParams) -> Result<ConcentrationReport> {
    let (n, k) = (p.n, p.k);
    if k == 0 || k > n {
        return Err(Error::BadK { k, min: 1, max: n });
    }
    if p.trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let u = if p.u.is_empty() { DVector::zeros(n) } else { DVector::from_vec(p.u.clone()) };
    if u.len() != n {
        return Err(Error::DimensionMismatch(format!("u has length {}, expected {n}", u.len())));
    }
    if p.t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("t values must be positive".into()));
    }
    let q = (k < n).then(|| random_subspace(n, k, &RngStream::new(p.seed, 0).derive(SUBSPACE_TAG)));

    let mut xs: Vec<f64> = map_indexed(p.trials, p.workers, |t| {
        let mut rng = RngStream::new(p.seed, t).rng();
        let c = DVector::from_fn(n, |_, _| p.entry.sample(&mut rng));
        let pc = match &q {
            Some(q) => q * (q.transpose() * &c),
            None => c,
        };
        (pc - &u).norm()
    });
    xs.sort_by(f64::total_cmp);

    let m = xs.len();
    let median = if m % 2 == 1 { xs[m / 2] } else { 0.5 * (xs[m / 2 - 1] + xs[m / 2]) };
    let z = 1.959_963_984_540_054;
    let half = z * (m as f64).sqrt() / 2.0;
    let lo_i = ((m as f64 / 2.0 - half).floor().max(0.0)) as usize;
    let hi_i = ((m as f64 / 2.0 + half).ceil() as usize).min(m - 1);
    let median_ci = (xs[lo_i], xs[hi_i]);
    let median_stderr = (median_ci.1 - median_ci.0) / (2.0 * z);
    let predicted_median = (k as f64 + u.norm_squared()).sqrt();

    let root_k = (k as f64).sqrt();
    let tail: Vec<TailPoint> = p
        .t_grid
        .iter()
        .map(|&t| {
            let hits = xs.iter().filter(|x| (*x - median).abs() >= t * root_k).count() as u64;
            let estimate = TailEstimate::from_counts(hits, p.trials, p.level, p.seed);
            let log_stderr = if hits == 0 {
                f64::INFINITY
            } else {
                ((1.0 - estimate.p_hat).max(1.0 / p.trials as f64) / hits as f64).sqrt()
            };
            TailPoint { t, log_p: estimate.p_hat.ln(), log_stderr, estimate }
        })
        .collect();

    let used: Vec<&TailPoint> = tail.iter().filter(|pt| pt.estimate.hits > 0).collect();
    let tail_fit = (used.len() >= 2).then(|| {
        let x: Vec<f64> = used.iter().map(|pt| pt.t * pt.t).collect();
        let y: Vec<f64> = used.iter().map(|pt| pt.log_p).collect();
        let w: Vec<f64> = used.iter().map(|pt| pt.log_stderr.powi(-2)).collect();
        let (slope, intercept, slope_stderr) = weighted_line(&x, &y, &w);
        TailFit { slope, slope_stderr, intercept, points_used: used.len() }
    });

    Ok(ConcentrationReport {
        n,
        k,
        trials: p.trials,
        median,
        median_ci,
        median_stderr,
        predicted_median,
        gap: median - predicted_median,
        bound: p.entry.bound,
        tail,
        tail_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma_lr;

    fn params(n: usize, k: usize, entry: EntryDistribution, trials: u64) -> ConcentrationParams {
        ConcentrationParams {
            n,
            k,
            entry,
            u: vec![],
            trials,
            seed: 17,
            t_grid: vec![0.2, 0.3, 0.4],
            level: 0.95,
            workers: 1,
        }
    }

    /// Median of the chi law with `k` degrees of freedom, by bisection on
    /// the chi-square CDF `P(k/2, x/2)`.
    fn chi_median(k: usize) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 10.0 * k as f64 + 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gamma_lr(k as f64 / 2.0, mid / 2.0) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).sqrt()
    }

    #[test]
    fn chi_oracle_sanity() {
        // Chi with 2 degrees of freedom is Rayleigh: median sqrt(2 ln 2).
        assert!((chi_median(2) - (2.0 * std::f64::consts::LN_2).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn gaussian_median_matches_chi() {
        let r = concentration_experiment(&params(60, 12, EntryDistribution::gaussian(), 20_000)).unwrap();
        let oracle = chi_median(12);
        assert!((r.median - oracle).abs() <= 3.0 * r.median_stderr, "{} vs {oracle} (se {})", r.median, r.median_stderr);
        assert!(r.median_ci.0 <= r.median && r.median <= r.median_ci.1);
    }

    #[test]
    fn full_space_is_plain_norm() {
        let mut p = params(5, 5, EntryDistribution::rademacher(), 50);
        p.u = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let r = concentration_experiment(&p).unwrap();
        // |c - e_1|^2 = (c_1 - 1)^2 + 4 takes the values 4 and 8 only.
        let ok = |x: f64| (x - 2.0).abs() < 1e-12 || (x - 8f64.sqrt()).abs() < 1e-12;
        assert!(ok(r.median_ci.0) && ok(r.median_ci.1));
        assert_eq!(r.predicted_median, 6f64.sqrt());
    }

    #[test]
    fn rejects_bad_k_and_shift() {
        assert!(matches!(
            concentration_experiment(&params(5, 6, EntryDistribution::gaussian(), 10)),
            Err(Error::BadK { .. })
        ));
        let mut p = params(5, 2, EntryDistribution::gaussian(), 10);
        p.u = vec![1.0];
        assert!(concentration_experiment(&p).is_err());
    }

    #[test]
    fn subspace_is_orthonormal() {
        let q = random_subspace(30, 7, &RngStream::new(1, 2));
        let g = q.transpose() * &q;
        assert!((g - RealMatrix::identity(7, 7)).amax() < 1e-12);
    }

    #[test]
    fn workers_do_not_change_report() {
        let mut p = params(40, 8, EntryDistribution::rademacher(), 3000);
        let a = concentration_experiment(&p).unwrap();
        p.workers = 4;
        assert_eq!(a, concentration_experiment(&p).unwrap());
    }
}
