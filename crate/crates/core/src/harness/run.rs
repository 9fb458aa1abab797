use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind};
use super::io::{atomic_write, curve_csv, CurveRow};
use crate::ensembles::Family;
use crate::error::{Error, Result};
use crate::estimators::audit::{distance_event_experiment, planted_audit, AuditSummary};
use crate::estimators::concentration::{concentration_experiment, ConcentrationParams};
use crate::estimators::fit::{fit_exponent, ExponentFit, PredictionTag};
use crate::estimators::tail::{sweep_tail, McOptions, TailEstimate};
use crate::geometry::{cauchy_binet_residual, check_restriction_monotonicity, ny_select, rv_length_squared_sample, SelectionMethod};
use crate::par::map_indexed;
use crate::rng::{derive_seed, RngStream};
use crate::spectra::edelman_cdf;
use crate::RealMatrix;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT_FAIL: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_UNDERPOWERED: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Underpowered,
    NoEvents,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotEvaluated,
}

/// One acceptance check: `pass` iff `value` is on the right side of
/// `threshold` (the direction is part of the check's definition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass: value <= threshold, value, threshold, detail: detail.into() }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass: value >= threshold, value, threshold, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub experiment: ExperimentKind,
    pub status: RunStatus,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub fit: Option<ExponentFit>,
    pub fit_error: Option<String>,
    /// Experiment-specific details.
    pub report: serde_json::Value,
    pub config: ExperimentConfig,
}

impl Summary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn exit_code(&self) -> i32 {
        match (self.status, self.verdict) {
            (RunStatus::Underpowered | RunStatus::NoEvents, _) => EXIT_UNDERPOWERED,
            (RunStatus::Ok, Verdict::Fail) => EXIT_VERDICT_FAIL,
            _ => EXIT_OK,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub curve: Vec<CurveRow>,
    pub summary: Summary,
    pub stages: Vec<(String, Duration)>,
}

/// Exit code for a run that failed before producing artifacts.
pub fn exit_code_for_error(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig { .. }
        | Error::Parse { .. }
        | Error::InvalidEvent(_)
        | Error::EmptyGrid
        | Error::InvalidArgument(_)
        | Error::BadK { .. }
        | Error::SpecMismatch(_) => EXIT_INVALID_CONFIG,
        Error::Underpowered { .. } | Error::NoEvents { .. } => EXIT_UNDERPOWERED,
        _ => EXIT_NUMERIC,
    }
}

struct Partial {
    curve: Vec<CurveRow>,
    status: RunStatus,
    checks: Vec<Check>,
    fit: Option<ExponentFit>,
    fit_error: Option<String>,
    report: serde_json::Value,
}

impl Partial {
    fn new(curve: Vec<CurveRow>, report: serde_json::Value) -> Self {
        Self { curve, status: RunStatus::Ok, checks: Vec::new(), fit: None, fit_error: None, report }
    }
}

struct Stages(Vec<(String, Duration)>, Instant);

impl Stages {
    fn new() -> Self {
        Self(Vec::new(), Instant::now())
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.0.push((name.to_string(), now - self.1));
        self.1 = now;
    }
}

/// Runs the experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut stages = Stages::new();
    let partial = match cfg.experiment {
        ExperimentKind::Concentration => run_concentration(cfg, &mut stages)?,
        ExperimentKind::ImplicationAudit => run_audit(cfg, &mut stages)?,
        ExperimentKind::ToolkitBench => run_toolkit(cfg, &mut stages)?,
        _ => run_sweep(cfg, &mut stages)?,
    };
    let verdict = if partial.checks.is_empty() {
        Verdict::NotEvaluated
    } else if partial.checks.iter().all(|c| c.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let summary = Summary {
        version: crate::VERSION.to_string(),
        experiment: cfg.experiment,
        status: partial.status,
        verdict,
        checks: partial.checks,
        fit: partial.fit,
        fit_error: partial.fit_error,
        report: partial.report,
        config: cfg.clone(),
    };
    Ok(RunOutcome { curve: partial.curve, summary, stages: stages.0 })
}

/// Runs the experiment and writes `curve.csv`, `summary.json` and
/// `run.log` into `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut outcome = execute(cfg)?;
    let write_start = Instant::now();
    let dir = &cfg.output_dir;
    atomic_write(&dir.join("curve.csv"), &curve_csv(&outcome.curve)?)?;
    let mut json = serde_json::to_vec_pretty(&outcome.summary).map_err(|e| Error::Numeric(e.to_string()))?;
    json.push(b'\n');
    atomic_write(&dir.join("summary.json"), &json)?;
    outcome.stages.push(("write".into(), write_start.elapsed()));

    let s = &outcome.summary;
    let mut log = format!("overcrowd {}\nexperiment: {}\n", crate::VERSION, cfg.experiment.name());
    for (name, d) in &outcome.stages {
        log += &format!("stage {name}: {:.3} s\n", d.as_secs_f64());
    }
    log += &format!("wall: {:.3} s\n", start.elapsed().as_secs_f64());
    log += &format!("status: {}\nverdict: {}\n", json_name(&s.status), json_name(&s.verdict));
    for c in &s.checks {
        log += &format!("check {}: {} (value {}, threshold {}) {}\n", c.name, if c.pass { "pass" } else { "fail" }, c.value, c.threshold, c.detail);
    }
    if let Some(e) = &s.fit_error {
        log += &format!("fit: {e}\n");
    }
    atomic_write(&dir.join("run.log"), log.as_bytes())?;
    Ok(outcome)
}

fn json_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn tail_row(eps: f64, t: &TailEstimate) -> CurveRow {
    CurveRow::new(eps, t)
}

fn run_sweep(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Partial> {
    let family = cfg.event_family()?;
    let opts = McOptions { workers: cfg.workers, level: cfg.sweep.level };
    let points = sweep_tail(&cfg.ensemble, &family, &cfg.eps_grid, cfg.trials, cfg.seed, cfg.sweep.mode, &opts)?;
    stages.lap("sample");
    let curve: Vec<CurveRow> = points.iter().map(|(e, t)| tail_row(*e, t)).collect();
    let tag = cfg.prediction_tag();
    let k = cfg.k;
    let mut report = json!({
        "event": family,
        "prediction": tag,
        "reference_exponents": {
            "iid_k2": PredictionTag::IidK2 { k }.exponent(),
            "sym_gap": PredictionTag::SymGap { k }.exponent(),
            "smooth_optimal": PredictionTag::SmoothOptimal { k }.exponent(),
        },
    });
    let mut p = Partial::new(curve, serde_json::Value::Null);

    if points.len() >= 3 {
        match fit_exponent(&points, tag, cfg.sweep.min_hits) {
            Ok(f) => p.fit = Some(f),
            Err(e @ Error::Underpowered { .. }) => {
                p.fit_error = Some(e.to_string());
                if cfg.experiment.requires_fit() {
                    p.status = RunStatus::Underpowered;
                }
            }
            Err(e) => return Err(e),
        }
    }
    stages.lap("fit");

    let tol = &cfg.tolerance;
    if cfg.experiment == ExperimentKind::Edelman && (tol.oracle_sigmas.is_some() || tol.oracle_absolute.is_some()) {
        let sigmas = tol.oracle_sigmas.unwrap_or(0.0);
        let absolute = tol.oracle_absolute.unwrap_or(0.0);
        let mut oracle = Vec::new();
        for (eps, t) in &points {
            let o = edelman_cdf(*eps);
            let allowed = (sigmas * t.stderr()).max(absolute);
            oracle.push(json!({"eps": eps, "oracle": o, "p_hat": t.p_hat, "allowed": allowed}));
            p.checks.push(Check::at_most(
                format!("oracle@{eps}"),
                (t.p_hat - o).abs(),
                allowed,
                format!("|p_hat - edelman_cdf| with p_hat = {}, oracle = {o}", t.p_hat),
            ));
        }
        report["oracle"] = json!(oracle);
    }
    let fit_check = |name: &str, f: &dyn Fn(&ExponentFit) -> Check| -> Check {
        match &p.fit {
            Some(fit) => f(fit),
            None => Check {
                name: name.into(),
                pass: false,
                value: f64::NAN,
                threshold: f64::NAN,
                detail: "no exponent fit".into(),
            },
        }
    };
    let mut fit_checks = Vec::new();
    if let Some(t) = tol.slope_tolerance {
        fit_checks.push(fit_check("slope_tolerance", &|f| {
            Check::at_most(
                "slope_tolerance",
                (f.slope - f.predicted_exponent).abs(),
                t,
                format!("slope {} +- {} vs predicted {}", f.slope, f.slope_stderr, f.predicted_exponent),
            )
        }));
    }
    if let Some(m) = tol.slope_min {
        fit_checks.push(fit_check("slope_min", &|f| {
            Check::at_least("slope_min", f.slope, m, format!("slope {} +- {}", f.slope, f.slope_stderr))
        }));
    }
    p.checks.extend(fit_checks);
    if let Some(a) = tol.bound_exponent {
        let (e_last, t_last) = points.last().expect("nonempty grid");
        let c = t_last.p_hat / e_last.powf(a);
        let worst = points
            .iter()
            .map(|(e, t)| t.ci_low / (c * e.powf(a)))
            .fold(0.0f64, |m, r| if r.is_nan() { m } else { m.max(r) });
        report["bound_constant"] = json!(c);
        p.checks.push(Check::at_most(
            "bound",
            worst,
            1.0,
            format!("max ci_low / (C eps^{a}) with C = {c} anchored at eps = {e_last}"),
        ));
    }
    if let Some(m) = tol.max_ci_high {
        let worst = points.iter().map(|(_, t)| t.ci_high).fold(0.0, f64::max);
        p.checks.push(Check::at_most("max_ci_high", worst, m, "largest upper confidence limit"));
    }
    if let Some(m) = tol.max_hits {
        let worst = points.iter().map(|(_, t)| t.hits).max().unwrap_or(0);
        p.checks.push(Check::at_most("max_hits", worst as f64, m as f64, "largest hit count"));
    }
    if let Some(f) = &p.fit {
        report["slope_vs_references"] = json!({
            "sym_gap": f.slope - PredictionTag::SymGap { k }.exponent(),
            "smooth_optimal": f.slope - PredictionTag::SmoothOptimal { k }.exponent(),
            "iid_k2": f.slope - PredictionTag::IidK2 { k }.exponent(),
        });
    }
    p.report = report;
    Ok(p)
}

/// Median of the chi law with `k` degrees of freedom.
pub fn chi_median(k: usize) -> f64 {
    use statrs::function::gamma::gamma_lr;
    let a = k as f64 / 2.0;
    let (mut lo, mut hi) = (0.0f64, 4.0 * k as f64 + 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_lr(a, mid / 2.0) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).sqrt()
}

fn run_concentration(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Partial> {
    let u = cfg.concentration.as_ref().map(|c| c.u.clone()).unwrap_or_default();
    let params = ConcentrationParams {
        n: cfg.ensemble.n,
        k: cfg.k,
        entry: cfg.ensemble.entry.clone(),
        u: u.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        t_grid: cfg.eps_grid.clone(),
        level: cfg.sweep.level,
        workers: cfg.workers,
    };
    let r = concentration_experiment(&params)?;
    stages.lap("sample");
    let curve = r.tail.iter().map(|pt| tail_row(pt.t, &pt.estimate)).collect();
    let mut p = Partial::new(curve, serde_json::Value::Null);
    let tol = &cfg.tolerance;
    if let Some(m) = tol.median_tolerance {
        p.checks.push(Check::at_most(
            "median",
            r.gap.abs(),
            m,
            format!("median {} vs sqrt(k + |u|^2) = {}", r.median, r.predicted_median),
        ));
    }
    let mut chi = None;
    if let Some(s) = tol.chi_median_sigmas {
        let applicable = *cfg.ensemble.entry.family() == Family::StandardGaussian && u.iter().all(|x| *x == 0.0);
        if applicable {
            let m = chi_median(cfg.k);
            chi = Some(m);
            p.checks.push(Check::at_most(
                "chi_median",
                (r.median - m).abs() / r.median_stderr,
                s,
                format!("median {} vs chi median {m}, stderr {}", r.median, r.median_stderr),
            ));
        } else {
            p.checks.push(Check {
                name: "chi_median".into(),
                pass: false,
                value: f64::NAN,
                threshold: s,
                detail: "needs gaussian entries and u = 0".into(),
            });
        }
    }
    if tol.tail_decreasing == Some(true) {
        let slope = r.tail_fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
        let separated = r.tail_separated();
        p.checks.push(Check {
            name: "tail_decreasing".into(),
            pass: separated && slope < 0.0,
            value: slope,
            threshold: 0.0,
            detail: format!("log tail separated by stderr: {separated}; slope in t^2: {slope}"),
        });
    }
    p.report = json!({ "concentration": r, "chi_median": chi });
    Ok(p)
}

fn run_audit(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Partial> {
    let section = cfg.audit.clone().unwrap_or_default();
    let k = cfg.k;
    let mut curve = Vec::new();
    let mut points = Vec::new();
    let mut sampled = AuditSummary::default();
    let mut planted_total = AuditSummary::default();
    for (i, &eps) in cfg.eps_grid.iter().enumerate() {
        let report = match distance_event_experiment(&cfg.ensemble, k, eps, section.strategy, cfg.trials, cfg.seed, cfg.workers) {
            Ok(r) => Some(r),
            Err(Error::NoEvents { .. }) => None,
            Err(e) => return Err(e),
        };
        let qualifying = report.as_ref().map_or(0, |r| r.summary.qualifying);
        curve.push(tail_row(eps, &TailEstimate::from_counts(qualifying, cfg.trials, cfg.sweep.level, cfg.seed)));
        if let Some(r) = &report {
            merge(&mut sampled, &r.summary);
        }
        let planted = if section.planted > 0 {
            let r = planted_audit(cfg.ensemble.n, k, eps, section.strategy, section.planted, derive_seed(cfg.seed, i as u64), cfg.workers)?;
            merge(&mut planted_total, &r.summary);
            Some(r)
        } else {
            None
        };
        points.push(json!({ "eps": eps, "sampled": report, "planted": planted }));
    }
    stages.lap("audit");
    let mut p = Partial::new(curve, json!({ "points": points, "sampled": sampled, "planted": planted_total }));
    if sampled.qualifying == 0 {
        p.status = RunStatus::NoEvents;
    }
    if let Some(m) = cfg.tolerance.max_violations {
        let total = sampled.violations + planted_total.violations;
        p.checks.push(Check::at_most(
            "violations",
            total as f64,
            m as f64,
            format!(
                "{} sampled and {} planted qualifying instances",
                sampled.qualifying, planted_total.qualifying
            ),
        ));
        let chain = sampled.chain_violations + planted_total.chain_violations;
        p.checks.push(Check::at_most("chain_violations", chain as f64, m as f64, "|B Abar|^2 <= |Abar|^2 k eps^2 / n"));
        p.checks.push(Check::at_least(
            "qualifying",
            (sampled.qualifying + planted_total.qualifying) as f64,
            1.0,
            "at least one audited instance",
        ));
    }
    Ok(p)
}

fn merge(total: &mut AuditSummary, s: &AuditSummary) {
    if s.qualifying == 0 {
        total.trials += s.trials;
        return;
    }
    if total.qualifying == 0 {
        total.min_slack = f64::INFINITY;
    }
    total.trials += s.trials;
    total.qualifying += s.qualifying;
    total.violations += s.violations;
    total.chain_violations += s.chain_violations;
    total.min_slack = total.min_slack.min(s.min_slack);
    total.max_identity_residual = total.max_identity_residual.max(s.max_identity_residual);
}

const NY_TAG: u64 = 1;
const CB_TAG: u64 = 2;
const MONO_TAG: u64 = 3;
const RV_TAG: u64 = 4;
const RV_MATRIX_TAG: u64 = 5;

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_subset(n: usize, min: usize, rng: &mut impl Rng) -> Vec<usize> {
    let size = rng.gen_range(min..=n);
    rand::seq::index::sample(rng, n, size).into_vec()
}

fn run_toolkit(cfg: &ExperimentConfig, stages: &mut Stages) -> Result<Partial> {
    let t = cfg.toolkit.clone().unwrap_or_default();
    let (k, d) = (cfg.k, cfg.ensemble.n);
    let entry = &cfg.ensemble.entry;
    let tol = &cfg.tolerance;

    // Restricted invertibility: every l in 1..k on each k x d instance.
    let ny_seed = derive_seed(cfg.seed, NY_TAG);
    let k0: Vec<Vec<f64>> = map_indexed(t.instances, cfg.workers, |i| -> Result<Vec<f64>> {
        let mut rng = RngStream::new(ny_seed, i).rng();
        let z = RealMatrix::from_fn(k, d, |_, _| entry.sample(&mut rng));
        (1..k).map(|l| ny_select(&z, l, SelectionMethod::BruteForce).map(|s| s.k0_used)).collect()
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let k0: Vec<f64> = k0.into_iter().flatten().collect();
    let selections = k0.len() as u64;
    let k0_max = k0.iter().copied().fold(0.0, f64::max);
    let curve = cfg
        .eps_grid
        .iter()
        .map(|&e| {
            let hits = k0.iter().filter(|&&v| v <= e).count() as u64;
            tail_row(e, &TailEstimate::from_counts(hits, selections, cfg.sweep.level, cfg.seed))
        })
        .collect();
    stages.lap("restricted_invertibility");

    let cb_seed = derive_seed(cfg.seed, CB_TAG);
    let cb_max = map_indexed(t.cauchy_binet_instances, cfg.workers, |i| -> Result<f64> {
        let mut rng = RngStream::new(cb_seed, i).rng();
        let kk = rng.gen_range(1..=3usize);
        let m = rng.gen_range(kk..=8usize);
        let z = gaussian_matrix(kk, m, &mut rng);
        let j = random_subset(m, kk, &mut rng);
        cauchy_binet_residual(&z, &j)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?
    .into_iter()
    .fold(0.0, f64::max);
    stages.lap("cauchy_binet");

    let mono_seed = derive_seed(cfg.seed, MONO_TAG);
    let mono_failures = map_indexed(t.monotonicity_instances, cfg.workers, |i| -> Result<bool> {
        let mut rng = RngStream::new(mono_seed, i).rng();
        let n = rng.gen_range(2..=10usize);
        let m = rng.gen_range(1..n);
        let c = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let h = gaussian_matrix(n, m, &mut rng);
        let idx = random_subset(n, 1, &mut rng);
        Ok(check_restriction_monotonicity(&c, &h, &idx)?.holds)
    })
    .into_iter()
    .collect::<Result<Vec<bool>>>()?
    .into_iter()
    .filter(|ok| !ok)
    .count();
    stages.lap("monotonicity");

    let x = gaussian_matrix(t.rv_rows, t.rv_cols, &mut RngStream::new(derive_seed(cfg.seed, RV_MATRIX_TAG), 0).rng());
    let rv_seed = derive_seed(cfg.seed, RV_TAG);
    let grams = map_indexed(t.rv_draws, cfg.workers, |i| {
        rv_length_squared_sample(&x, t.rv_d, &RngStream::new(rv_seed, i)).map(|s| s.sketch_gram())
    })
    .into_iter()
    .collect::<Result<Vec<RealMatrix>>>()?;
    let target = &x * x.transpose();
    let draws = grams.len() as f64;
    let mean = grams.iter().fold(RealMatrix::zeros(t.rv_rows, t.rv_rows), |a, g| a + g) / draws;
    let var = grams.iter().fold(RealMatrix::zeros(t.rv_rows, t.rv_rows), |a, g| {
        a + (g - &mean).component_mul(&(g - &mean))
    }) / (draws - 1.0);
    let mut rv_z = 0.0f64;
    for i in 0..t.rv_rows {
        for j in i..t.rv_rows {
            let se = (var[(i, j)] / draws).sqrt();
            let diff = (mean[(i, j)] - target[(i, j)]).abs();
            let z = if se > 0.0 { diff / se } else if diff <= 1e-12 * target.amax() { 0.0 } else { f64::INFINITY };
            rv_z = rv_z.max(z);
        }
    }
    stages.lap("length_squared");

    let mut p = Partial::new(
        curve,
        json!({
            "selections": selections,
            "k0_max": k0_max,
            "cauchy_binet_max_residual": cb_max,
            "monotonicity_failures": mono_failures,
            "rv_max_abs_z": rv_z,
        }),
    );
    if let Some(m) = tol.k0_max {
        p.checks.push(Check::at_most("k0", k0_max, m, format!("largest K0 over {selections} selections")));
    }
    if let Some(m) = tol.cauchy_binet_max {
        p.checks.push(Check::at_most("cauchy_binet", cb_max, m, "largest Cauchy-Binet residual"));
    }
    if tol.monotonicity == Some(true) {
        p.checks.push(Check::at_most("monotonicity", mono_failures as f64, 0.0, "restriction monotonicity failures"));
    }
    if let Some(s) = tol.rv_sigmas {
        p.checks.push(Check::at_most("rv_expectation", rv_z, s, "largest entrywise |mean - X X^T| / stderr"));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_median_small_cases() {
        // k = 2 is Rayleigh; k = 1 is half-normal with median 0.6745.
        assert!((chi_median(2) - (2.0 * std::f64::consts::LN_2).sqrt()).abs() < 1e-10);
        assert!((chi_median(1) - 0.674_489_750_196_081_7).abs() < 1e-9);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for_error(&Error::config("trials", "x")), EXIT_INVALID_CONFIG);
        assert_eq!(exit_code_for_error(&Error::NoEvents { trials: 1 }), EXIT_UNDERPOWERED);
        assert_eq!(exit_code_for_error(&Error::Numeric("x".into())), EXIT_NUMERIC);
    }

    fn small(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn underpowered_sweep_keeps_curve() {
        let cfg = small(
            "experiment = \"szarek_k2\"\nk = 2\neps_grid = [0.01, 0.02, 0.03]\ntrials = 20\nseed = 1\n[ensemble]\nn = 6\n",
        );
        let out = execute(&cfg).unwrap();
        assert_eq!(out.summary.status, RunStatus::Underpowered);
        assert_eq!(out.summary.exit_code(), EXIT_UNDERPOWERED);
        assert_eq!(out.curve.len(), 3);
        assert!(out.summary.fit_error.as_deref().unwrap().starts_with("underpowered"));
    }

    #[test]
    fn toolkit_small_run() {
        let cfg = small(
            "experiment = \"toolkit_bench\"\nk = 3\neps_grid = [1.0, 2.0, 4.0]\ntrials = 1\nseed = 2\n\
             [ensemble]\nn = 7\n[toolkit]\ninstances = 20\ncauchy_binet_instances = 20\nmonotonicity_instances = 50\nrv_draws = 500\n\
             [tolerance]\ncauchy_binet_max = 1e-9\nmonotonicity = true\n",
        );
        let out = execute(&cfg).unwrap();
        assert_eq!(out.summary.verdict, Verdict::Pass, "{:?}", out.summary.checks);
        assert!(out.curve.windows(2).all(|w| w[0].hits <= w[1].hits));
    }
}
