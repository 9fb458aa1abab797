use serde::{Deserialize, Serialize};

use super::tail::TailEstimate;
use crate::error::{Error, Result};

/// Default rare-event guard: points with fewer hits stay out of fits.
pub const DEFAULT_MIN_HITS: u64 = 10;

/// The rate a curve is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionTag {
    /// `k^2`: iid hard edge.
    IidK2 { k: usize },
    /// `k(k-1)/2`: symmetric k-gap upper bound.
    SymGap { k: usize },
    /// `k(k+1)/2`: optimal symmetric rate.
    SmoothOptimal { k: usize },
    /// `(1 - gamma) k^2`: perturbed iid.
    Perturbed { k: usize, gamma: f64 },
    Custom { exponent: f64 },
}

impl PredictionTag {
    pub fn exponent(&self) -> f64 {
        match *self {
            PredictionTag::IidK2 { k } => (k * k) as f64,
            PredictionTag::SymGap { k } => (k * (k - 1)) as f64 / 2.0,
            PredictionTag::SmoothOptimal { k } => (k * (k + 1)) as f64 / 2.0,
            PredictionTag::Perturbed { k, gamma } => (1.0 - gamma) * (k * k) as f64,
            PredictionTag::Custom { exponent } => exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub slope_stderr: f64,
    /// Natural log of the fitted constant.
    pub intercept: f64,
    pub points_used: usize,
    /// Grid values that entered the fit.
    pub eps_used: Vec<f64>,
    pub predicted_exponent: f64,
    pub prediction_tag: PredictionTag,
}

impl ExponentFit {
    /// `(slope - predicted) / stderr`.
    pub fn z_score(&self) -> f64 {
        (self.slope - self.predicted_exponent) / self.slope_stderr
    }
}

/// Weighted least squares on `(x, y)` with weights `w`.
/// Returns `(slope, intercept, slope_stderr)`.
pub fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, (1.0 / sxx).sqrt())
}

/// Fits `log p_hat = intercept + slope log eps` over points with
/// `hits >= min_hits`.
///
/// Weights are inverse delta-method variances,
/// `Var(log p_hat) ~ (1 - p) / hits`, floored at `1 / trials` so saturated
/// points keep a finite weight. With fewer than three usable points the
/// result is [`Error::Underpowered`], carrying an estimate of the per-point
/// budget that would lift a third point over the threshold.
pub fn fit_exponent(curve: &[(f64, TailEstimate)], tag: PredictionTag, min_hits: u64) -> Result<ExponentFit> {
    if curve.len() < 3 {
        return Err(Error::InvalidArgument(format!("a fit needs at least 3 grid points, got {}", curve.len())));
    }
    let usable: Vec<&(f64, TailEstimate)> = curve.iter().filter(|(_, t)| t.hits >= min_hits.max(1)).collect();
    if usable.len() < 3 {
        let mut rates: Vec<f64> = curve.iter().map(|(_, t)| (t.hits as f64 + 0.5) / t.trials as f64).collect();
        rates.sort_by(|a, b| b.total_cmp(a));
        let suggested = (min_hits.max(1) as f64 / rates[2]).ceil() as u64;
        return Err(Error::Underpowered { usable: usable.len(), suggested_trials: suggested });
    }
    let x: Vec<f64> = usable.iter().map(|(e, _)| e.ln()).collect();
    let y: Vec<f64> = usable.iter().map(|(_, t)| t.p_hat.ln()).collect();
    let w: Vec<f64> = usable
        .iter()
        .map(|(_, t)| {
            let q = (1.0 - t.p_hat).max(1.0 / t.trials as f64);
            t.hits as f64 / q
        })
        .collect();
    let (slope, intercept, slope_stderr) = weighted_line(&x, &y, &w);
    if !slope.is_finite() || !slope_stderr.is_finite() {
        return Err(Error::Numeric("degenerate exponent fit".into()));
    }
    Ok(ExponentFit {
        slope,
        slope_stderr,
        intercept,
        points_used: usable.len(),
        eps_used: usable.iter().map(|(e, _)| *e).collect(),
        predicted_exponent: tag.exponent(),
        prediction_tag: tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Binomial, Distribution};

    fn exact_curve(f: impl Fn(f64) -> f64, grid: &[f64], trials: u64) -> Vec<(f64, TailEstimate)> {
        grid.iter()
            .map(|&e| {
                let p = f(e);
                let est = TailEstimate {
                    hits: (p * trials as f64).round() as u64,
                    trials,
                    p_hat: p,
                    ci_low: p,
                    ci_high: p,
                    level: 0.95,
                    seed: 0,
                };
                (e, est)
            })
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let grid = [0.1, 0.2, 0.3, 0.5, 0.8];
        let fit = fit_exponent(&exact_curve(|e| e * e, &grid, 1_000_000), PredictionTag::Custom { exponent: 2.0 }, 10).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        let fit = fit_exponent(&exact_curve(|e| 3.0 * e.powi(4), &grid, 1_000_000), PredictionTag::IidK2 { k: 2 }, 10).unwrap();
        assert!((fit.slope - 4.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert_eq!(fit.predicted_exponent, 4.0);
    }

    #[test]
    fn binomial_noise_recovers_slope() {
        let grid = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let trials = 100_000u64;
        let mut within = 0;
        for rep in 0..50 {
            let mut rng = RngStream::new(31, rep).rng();
            let curve: Vec<(f64, TailEstimate)> = grid
                .iter()
                .map(|&e| {
                    let p: f64 = e * e * e;
                    let hits = Binomial::new(trials, p).unwrap().sample(&mut rng);
                    (e, TailEstimate::from_counts(hits, trials, 0.95, 0))
                })
                .collect();
            let fit = fit_exponent(&curve, PredictionTag::Custom { exponent: 3.0 }, 10).unwrap();
            if fit.z_score().abs() <= 3.0 {
                within += 1;
            }
        }
        assert!(within >= 48, "{within}/50 fits within 3 stderr");
    }

    #[test]
    fn rare_points_are_dropped() {
        let grid = [0.01, 0.2, 0.4, 0.6, 0.8];
        let curve = exact_curve(|e| e * e, &grid, 1000);
        let fit = fit_exponent(&curve, PredictionTag::Custom { exponent: 2.0 }, 10).unwrap();
        assert_eq!(fit.points_used, 4);
        assert_eq!(fit.eps_used[0], 0.2);
    }

    #[test]
    fn underpowered_reports_budget() {
        let grid = [0.1, 0.2, 0.3];
        let curve = exact_curve(|e| e.powi(4), &grid, 1000);
        match fit_exponent(&curve, PredictionTag::IidK2 { k: 2 }, 10) {
            Err(Error::Underpowered { usable, suggested_trials }) => {
                assert_eq!(usable, 0);
                // Third-best point is eps = 0.1 with 0 hits: 10 / (0.5 / 1000).
                assert_eq!(suggested_trials, 20_000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn predicted_exponents() {
        assert_eq!(PredictionTag::IidK2 { k: 3 }.exponent(), 9.0);
        assert_eq!(PredictionTag::SymGap { k: 2 }.exponent(), 1.0);
        assert_eq!(PredictionTag::SmoothOptimal { k: 2 }.exponent(), 3.0);
        assert_eq!(PredictionTag::Perturbed { k: 2, gamma: 0.25 }.exponent(), 3.0);
    }
}
