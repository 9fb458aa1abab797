use serde::{Deserialize, Serialize};

use super::binomial::clopper_pearson;
use crate::ensembles::{EnsembleSpec, Symmetry};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::rng::{derive_seed, RngStream};
use crate::spectra::{self, IntervalSpec, IntervalStyle, Spectrum};

/// Trials evaluated per scheduling unit.
const BLOCK: u64 = 256;

fn default_true() -> bool {
    true
}

/// A spectral event whose probability is estimated by Monte Carlo.
///
/// All thresholds are on the `1/sqrt(n)` scale of the ensemble dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventSpec {
    /// `sigma_{n-k+1} <= eps / sqrt(n)` (iid ensembles).
    KthSmallestSv { k: usize, eps: f64 },
    /// `N_I >= k`. The half-width is `k eps / sqrt(n)` when `scale_by_k`,
    /// else `eps / sqrt(n)`. Centered windows use the ensemble's `center_z`.
    IntervalCount {
        k: usize,
        eps: f64,
        style: IntervalStyle,
        #[serde(default = "default_true")]
        scale_by_k: bool,
    },
    /// `min_i (lambda_{i+k-1} - lambda_i) <= 2 eps / sqrt(n)` (symmetric
    /// ensembles).
    KGap { k: usize, eps: f64 },
}

impl EventSpec {
    pub fn eps(&self) -> f64 {
        match *self {
            EventSpec::KthSmallestSv { eps, .. }
            | EventSpec::IntervalCount { eps, .. }
            | EventSpec::KGap { eps, .. } => eps,
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            EventSpec::KthSmallestSv { k, .. }
            | EventSpec::IntervalCount { k, .. }
            | EventSpec::KGap { k, .. } => k,
        }
    }

    pub fn with_eps(mut self, new_eps: f64) -> Self {
        match &mut self {
            EventSpec::KthSmallestSv { eps, .. }
            | EventSpec::IntervalCount { eps, .. }
            | EventSpec::KGap { eps, .. } => *eps = new_eps,
        }
        self
    }

    pub fn validate(&self, spec: &EnsembleSpec) -> Result<()> {
        let n = spec.n;
        let eps = self.eps();
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::InvalidEvent(format!("eps must be >= 0, got {eps}")));
        }
        let k = self.k();
        match self {
            EventSpec::KthSmallestSv { .. } => {
                if spec.symmetry != Symmetry::Iid {
                    return Err(Error::InvalidEvent("kth_smallest_sv needs an iid ensemble".into()));
                }
                if k == 0 || k > n {
                    return Err(Error::InvalidEvent(format!("k = {k} outside [1, {n}]")));
                }
            }
            EventSpec::IntervalCount { style, .. } => {
                if *style == IntervalStyle::HardEdge && spec.symmetry != Symmetry::Iid {
                    return Err(Error::InvalidEvent("hard-edge counts need an iid ensemble".into()));
                }
                if k == 0 || k > n {
                    return Err(Error::InvalidEvent(format!("k = {k} outside [1, {n}]")));
                }
            }
            EventSpec::KGap { .. } => {
                if spec.symmetry != Symmetry::SymmetricWigner {
                    return Err(Error::InvalidEvent("k-gaps need a symmetric ensemble".into()));
                }
                if k < 2 || k > n {
                    return Err(Error::InvalidEvent(format!("k = {k} outside [2, {n}]")));
                }
            }
        }
        Ok(())
    }

    /// Evaluates the event on a spectrum of the ensemble `spec`.
    pub fn occurs(&self, s: &Spectrum, spec: &EnsembleSpec) -> Result<bool> {
        let root_n = (spec.n as f64).sqrt();
        match *self {
            EventSpec::KthSmallestSv { k, eps } => Ok(spectra::kth_smallest_sv(s, k)? <= eps / root_n),
            EventSpec::IntervalCount { k, eps, style, scale_by_k } => {
                let width = if scale_by_k { k as f64 * eps / root_n } else { eps / root_n };
                let interval = match style {
                    IntervalStyle::HardEdge => IntervalSpec::hard_edge(width),
                    IntervalStyle::Centered => IntervalSpec::centered(spec.center_z, width),
                };
                Ok(spectra::count_in_interval(s, &interval) >= k)
            }
            EventSpec::KGap { k, eps } => Ok(spectra::min_k_gap(s, k)? <= 2.0 * eps / root_n),
        }
    }
}

/// The spectrum an ensemble's events are read from: singular values for
/// iid matrices, eigenvalues for symmetric ones.
pub fn ensemble_spectrum(spec: &EnsembleSpec, stream: &RngStream) -> Result<Spectrum> {
    let m = spec.sample(stream)?;
    match spec.symmetry {
        Symmetry::Iid => spectra::singular_values(&m),
        Symmetry::SymmetricWigner => spectra::eigenvalues_sym(&m),
    }
}

/// Monte Carlo estimate of one tail event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub seed: u64,
}

impl TailEstimate {
    pub fn from_counts(hits: u64, trials: u64, level: f64, seed: u64) -> Self {
        let (ci_low, ci_high) = clopper_pearson(hits, trials, level);
        Self { hits, trials, p_hat: hits as f64 / trials as f64, ci_low, ci_high, level, seed }
    }

    /// Binomial standard error at the point estimate.
    pub fn stderr(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub workers: usize,
    /// Two-sided confidence level of the attached intervals.
    pub level: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { workers: 1, level: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Every grid point reuses the same matrix samples; nested events then
    /// give exactly monotone hit counts.
    #[default]
    Shared,
    /// Grid point `i` draws its own samples from seed `derive_seed(seed, i)`.
    Independent,
}

/// Counts, for each event, the trials in `0..trials` of stream `seed`
/// on which it occurs.
pub fn count_hits(
    spec: &EnsembleSpec,
    events: &[EventSpec],
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<u64>> {
    let blocks = trials.div_ceil(BLOCK);
    let partial = map_indexed(blocks, workers, |b| -> Result<Vec<u64>> {
        let mut counts = vec![0u64; events.len()];
        let end = ((b + 1) * BLOCK).min(trials);
        for t in (b * BLOCK)..end {
            let s = ensemble_spectrum(spec, &RngStream::new(seed, t))?;
            for (c, e) in counts.iter_mut().zip(events) {
                if e.occurs(&s, spec)? {
                    *c += 1;
                }
            }
        }
        Ok(counts)
    });
    let mut total = vec![0u64; events.len()];
    for block in partial {
        for (t, c) in total.iter_mut().zip(block?) {
            *t += c;
        }
    }
    Ok(total)
}

pub fn mc_tail(
    spec: &EnsembleSpec,
    event: &EventSpec,
    trials: u64,
    seed: u64,
    opts: &McOptions,
) -> Result<TailEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    spec.validate()?;
    event.validate(spec)?;
    let hits = count_hits(spec, std::slice::from_ref(event), trials, seed, opts.workers)?[0];
    Ok(TailEstimate::from_counts(hits, trials, opts.level, seed))
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("grid values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// One tail estimate per grid value; `family` supplies everything but eps.
pub fn sweep_tail(
    spec: &EnsembleSpec,
    family: &EventSpec,
    grid: &[f64],
    trials: u64,
    seed: u64,
    mode: SweepMode,
    opts: &McOptions,
) -> Result<Vec<(f64, TailEstimate)>> {
    validate_grid(grid)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    spec.validate()?;
    let events: Vec<EventSpec> = grid.iter().map(|&e| family.with_eps(e)).collect();
    for e in &events {
        e.validate(spec)?;
    }
    match mode {
        SweepMode::Shared => {
            let hits = count_hits(spec, &events, trials, seed, opts.workers)?;
            Ok(grid
                .iter()
                .zip(hits)
                .map(|(&eps, h)| (eps, TailEstimate::from_counts(h, trials, opts.level, seed)))
                .collect())
        }
        SweepMode::Independent => grid
            .iter()
            .zip(&events)
            .enumerate()
            .map(|(i, (&eps, e))| {
                let point_seed = derive_seed(seed, i as u64);
                mc_tail(spec, e, trials, point_seed, opts).map(|t| (eps, t))
            })
            .collect(),
    }
}
