use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleSpec, Symmetry};
use crate::error::{Error, Result};
use crate::estimators::audit::MinorStrategy;
use crate::estimators::fit::{PredictionTag, DEFAULT_MIN_HITS};
use crate::estimators::tail::{validate_grid, EventSpec, SweepMode};
use crate::spectra::IntervalStyle;

/// Overrides the output directory of every run.
pub const OUTPUT_DIR_ENV: &str = "OVERCROWD_OUTPUT_DIR";

/// Largest dimension the implication audit accepts.
pub const AUDIT_MAX_N: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Edelman,
    SzarekK2,
    IidOvercrowding,
    PerturbedIid,
    WignerGaps,
    GoeWegner,
    PerturbedWigner,
    Concentration,
    ImplicationAudit,
    ToolkitBench,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Edelman => "edelman",
            ExperimentKind::SzarekK2 => "szarek_k2",
            ExperimentKind::IidOvercrowding => "iid_overcrowding",
            ExperimentKind::PerturbedIid => "perturbed_iid",
            ExperimentKind::WignerGaps => "wigner_gaps",
            ExperimentKind::GoeWegner => "goe_wegner",
            ExperimentKind::PerturbedWigner => "perturbed_wigner",
            ExperimentKind::Concentration => "concentration",
            ExperimentKind::ImplicationAudit => "implication_audit",
            ExperimentKind::ToolkitBench => "toolkit_bench",
        }
    }

    /// Experiments whose headline result is an exponent fit; for these an
    /// underpowered curve is a distinct outcome.
    pub fn requires_fit(self) -> bool {
        matches!(
            self,
            ExperimentKind::SzarekK2
                | ExperimentKind::IidOvercrowding
                | ExperimentKind::WignerGaps
                | ExperimentKind::GoeWegner
                | ExperimentKind::PerturbedWigner
        )
    }

    pub fn is_sweep(self) -> bool {
        !matches!(
            self,
            ExperimentKind::Concentration | ExperimentKind::ImplicationAudit | ExperimentKind::ToolkitBench
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    KthSmallestSv,
    IntervalCount,
    KGap,
}

/// Optional adjustments to the experiment's default event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<EventKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<IntervalStyle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_by_k: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_min_hits")]
    pub min_hits: u64,
}

fn default_level() -> f64 {
    0.95
}

fn default_min_hits() -> u64 {
    DEFAULT_MIN_HITS
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { mode: SweepMode::Shared, level: default_level(), min_hits: default_min_hits() }
    }
}

/// Acceptance tolerances. Only the checks that are set are evaluated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    /// Pointwise oracle check: `|p_hat - oracle| <= max(sigmas * stderr, absolute)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_sigmas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_absolute: Option<f64>,
    /// `|slope - predicted| <= slope_tolerance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tolerance: Option<f64>,
    /// `slope >= slope_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_min: Option<f64>,
    /// Upper-bound shape `p <= C eps^a`, with `C` anchored at the largest eps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ci_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_hits: Option<u64>,
    /// `|median - sqrt(k + |u|^2)| <= median_tolerance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_tolerance: Option<f64>,
    /// Median within this many standard errors of the chi median
    /// (gaussian entries, `u = 0`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_median_sigmas: Option<f64>,
    /// Log tail strictly decreasing with error-separated points and a
    /// negative slope in `t^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_decreasing: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_violations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cauchy_binet_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rv_sigmas: Option<f64>,
    /// Require zero monotonicity failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSection {
    /// Shift vector; empty means zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default)]
    pub strategy: MinorStrategy,
    /// Planted near-singular instances audited per grid point.
    #[serde(default)]
    pub planted: u64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self { strategy: MinorStrategy::default(), planted: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolkitSection {
    /// Restricted invertibility instances (`k x n`).
    #[serde(default = "default_instances")]
    pub instances: u64,
    #[serde(default = "default_instances")]
    pub cauchy_binet_instances: u64,
    #[serde(default = "default_monotonicity")]
    pub monotonicity_instances: u64,
    #[serde(default = "default_rv_draws")]
    pub rv_draws: u64,
    #[serde(default = "default_rv_rows")]
    pub rv_rows: usize,
    #[serde(default = "default_rv_cols")]
    pub rv_cols: usize,
    #[serde(default = "default_rv_d")]
    pub rv_d: usize,
}

fn default_instances() -> u64 {
    1000
}
fn default_monotonicity() -> u64 {
    10_000
}
fn default_rv_draws() -> u64 {
    10_000
}
fn default_rv_rows() -> usize {
    4
}
fn default_rv_cols() -> usize {
    12
}
fn default_rv_d() -> usize {
    6
}

impl Default for ToolkitSection {
    fn default() -> Self {
        Self {
            instances: default_instances(),
            cauchy_binet_instances: default_instances(),
            monotonicity_instances: default_monotonicity(),
            rv_draws: default_rv_draws(),
            rv_rows: default_rv_rows(),
            rv_cols: default_rv_cols(),
            rv_d: default_rv_d(),
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub k: usize,
    pub eps_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub ensemble: EnsembleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictionTag>,
    #[serde(default)]
    pub event: EventSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toolkit: Option<ToolkitSection>,
}

/// The on-disk shape: every top-level field optional so that validation,
/// not the parser, names what is missing.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<ExperimentKind>,
    k: Option<usize>,
    eps_grid: Option<Vec<f64>>,
    trials: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    output_dir: Option<PathBuf>,
    ensemble: Option<EnsembleSpec>,
    prediction: Option<PredictionTag>,
    #[serde(default)]
    event: EventSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    tolerance: Tolerance,
    concentration: Option<ConcentrationSection>,
    audit: Option<AuditSection>,
    toolkit: Option<ToolkitSection>,
}

fn required<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(field, "missing required field"))
}

/// Best-effort field name from a TOML parser message.
fn field_from_message(msg: &str) -> String {
    for marker in ["missing field `", "unknown field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".to_string()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().replace('\n', " ");
            Error::config(field_from_message(&msg), msg)
        })?;
        let experiment = required(raw.experiment, "experiment")?;
        let cfg = ExperimentConfig {
            experiment,
            k: required(raw.k, "k")?,
            eps_grid: required(raw.eps_grid, "eps_grid")?,
            trials: required(raw.trials, "trials")?,
            seed: required(raw.seed, "seed")?,
            workers: raw.workers.unwrap_or(1),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out").join(experiment.name())),
            ensemble: required(raw.ensemble, "ensemble")?,
            prediction: raw.prediction,
            event: raw.event,
            sweep: raw.sweep,
            tolerance: raw.tolerance,
            concentration: raw.concentration,
            audit: raw.audit,
            toolkit: raw.toolkit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Numeric(format!("config serialization: {e}")))
    }

    /// Applies the output directory override from the environment.
    pub fn with_env_overrides(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be positive"));
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be positive"));
        }
        validate_grid(&self.eps_grid).map_err(|e| Error::config("eps_grid", e.to_string()))?;
        if !(self.sweep.level > 0.0 && self.sweep.level < 1.0) {
            return Err(Error::config("sweep.level", "must lie in (0, 1)"));
        }
        self.ensemble.validate()?;
        let spec = &self.ensemble;
        let n = spec.n;
        let need = |cond: bool, field: &str, reason: &str| -> Result<()> {
            if cond {
                Ok(())
            } else {
                Err(Error::config(field, reason))
            }
        };
        use ExperimentKind as E;
        match self.experiment {
            E::Edelman => {
                need(spec.symmetry == Symmetry::Iid, "ensemble.symmetry", "edelman needs an iid ensemble")?;
                need(self.k == 1, "k", "edelman compares the least singular value, k = 1")?;
            }
            E::SzarekK2 | E::IidOvercrowding => {
                need(spec.symmetry == Symmetry::Iid, "ensemble.symmetry", "needs an iid ensemble")?;
            }
            E::PerturbedIid => {
                need(spec.symmetry == Symmetry::Iid, "ensemble.symmetry", "needs an iid ensemble")?;
                need(spec.perturbation.is_some(), "ensemble.perturbation", "perturbed_iid needs a perturbation")?;
            }
            E::WignerGaps => {
                need(spec.symmetry == Symmetry::SymmetricWigner, "ensemble.symmetry", "needs a symmetric ensemble")?;
                need(self.k >= 2, "k", "gaps need k >= 2")?;
            }
            E::GoeWegner => {
                need(spec.symmetry == Symmetry::SymmetricWigner, "ensemble.symmetry", "needs a symmetric ensemble")?;
                need(spec.interpolation_t == 1.0, "ensemble.interpolation_t", "goe_wegner runs on the GOE (t = 1)")?;
            }
            E::PerturbedWigner => {
                need(spec.symmetry == Symmetry::SymmetricWigner, "ensemble.symmetry", "needs a symmetric ensemble")?;
                need(spec.perturbation.is_some(), "ensemble.perturbation", "perturbed_wigner needs a perturbation")?;
            }
            E::Concentration => {
                let u = self.concentration.as_ref().map(|c| c.u.len()).unwrap_or(0);
                need(u == 0 || u == n, "concentration.u", "length must equal ensemble.n")?;
            }
            E::ImplicationAudit => {
                need(spec.symmetry == Symmetry::Iid, "ensemble.symmetry", "the audit runs on iid ensembles")?;
                need(n <= AUDIT_MAX_N, "ensemble.n", "the audit is limited to n <= 60")?;
                need(self.k < n, "k", "must be below ensemble.n")?;
                if let Some(MinorStrategy::NaorYoussef { l }) = self.audit.as_ref().map(|a| a.strategy) {
                    need(l >= 1 && l < self.k, "audit.strategy.l", "must satisfy 1 <= l < k")?;
                }
                if let Some(MinorStrategy::Determinant { c0 }) = self.audit.as_ref().map(|a| a.strategy) {
                    need(c0 > 0.0 && c0 < 1.0, "audit.strategy.c0", "must lie in (0, 1)")?;
                }
            }
            E::ToolkitBench => {
                need(self.k >= 2 && self.k < n, "k", "needs 2 <= k < ensemble.n")?;
                let t = self.toolkit.clone().unwrap_or_default();
                need(t.rv_rows >= 1 && t.rv_cols >= 1 && t.rv_d >= 1, "toolkit", "rv dimensions must be positive")?;
                need(t.rv_draws >= 2, "toolkit.rv_draws", "needs at least 2 draws")?;
            }
        }
        if self.experiment.requires_fit() && self.eps_grid.len() < 3 {
            return Err(Error::config("eps_grid", "an exponent fit needs at least 3 points"));
        }
        if self.experiment.is_sweep() {
            self.event_family()?.validate(spec).map_err(|e| Error::config("event", e.to_string()))?;
        }
        if self.k > n {
            return Err(Error::config("k", "must not exceed ensemble.n"));
        }
        Ok(())
    }

    /// The event swept over `eps_grid` (its own eps is a placeholder).
    pub fn event_family(&self) -> Result<EventSpec> {
        use ExperimentKind as E;
        let k = self.k;
        let (default_kind, default_style, default_scale) = match self.experiment {
            E::Edelman | E::SzarekK2 | E::IidOvercrowding => (EventKind::KthSmallestSv, IntervalStyle::HardEdge, true),
            E::PerturbedIid => (EventKind::IntervalCount, IntervalStyle::HardEdge, true),
            E::WignerGaps => (EventKind::KGap, IntervalStyle::Centered, false),
            E::GoeWegner => (EventKind::IntervalCount, IntervalStyle::Centered, false),
            E::PerturbedWigner => (EventKind::IntervalCount, IntervalStyle::Centered, true),
            E::Concentration | E::ImplicationAudit | E::ToolkitBench => {
                return Err(Error::config("experiment", "has no swept event"))
            }
        };
        let eps = self.eps_grid.first().copied().unwrap_or(1.0);
        Ok(match self.event.kind.unwrap_or(default_kind) {
            EventKind::KthSmallestSv => EventSpec::KthSmallestSv { k, eps },
            EventKind::KGap => EventSpec::KGap { k, eps },
            EventKind::IntervalCount => EventSpec::IntervalCount {
                k,
                eps,
                style: self.event.style.unwrap_or(default_style),
                scale_by_k: self.event.scale_by_k.unwrap_or(default_scale),
            },
        })
    }

    /// The rate the fitted slope is compared against.
    pub fn prediction_tag(&self) -> PredictionTag {
        use ExperimentKind as E;
        let k = self.k;
        self.prediction.unwrap_or(match self.experiment {
            E::Edelman => PredictionTag::Custom { exponent: 1.0 },
            E::SzarekK2 | E::IidOvercrowding => PredictionTag::IidK2 { k },
            E::PerturbedIid => PredictionTag::Perturbed { k, gamma: 0.0 },
            E::WignerGaps | E::GoeWegner | E::PerturbedWigner => PredictionTag::SymGap { k },
            E::Concentration | E::ImplicationAudit | E::ToolkitBench => PredictionTag::Custom { exponent: 0.0 },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "edelman"
k = 1
eps_grid = [0.1, 0.3]
trials = 10
seed = 1
[ensemble]
n = 5
"#;

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::InvalidConfig { field, .. }) => field,
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.workers, 1);
        assert_eq!(cfg.output_dir, PathBuf::from("out/edelman"));
        assert_eq!(cfg.ensemble, EnsembleSpec::ginibre(5));
        assert_eq!(cfg.sweep.mode, SweepMode::Shared);
    }

    #[test]
    fn missing_and_bad_fields_are_named() {
        assert_eq!(field_of(&BASE.replace("eps_grid = [0.1, 0.3]\n", "")), "eps_grid");
        assert_eq!(field_of(&BASE.replace("trials = 10", "trials = 0")), "trials");
        assert_eq!(field_of(&BASE.replace("[0.1, 0.3]", "[0.3, 0.1]")), "eps_grid");
        assert_eq!(field_of(&BASE.replace("k = 1", "k = 2")), "k");
        assert_eq!(field_of(&BASE.replace("seed = 1", "seed = 1\nbogus = 3")), "bogus");
        assert_eq!(field_of(&BASE.replace("n = 5", "n = 0")), "ensemble.n");
    }

    #[test]
    fn toml_round_trip() {
        let text = BASE.replace("experiment = \"edelman\"", "experiment = \"perturbed_iid\"")
            .replace("k = 1", "k = 2")
            + "entry = { family = \"rademacher\" }\nperturbation = { kind = \"all_ones\", scale = 0.5 }\n[tolerance]\nmax_ci_high = 1e-4\n";
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn default_events() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.event_family().unwrap(), EventSpec::KthSmallestSv { k: 1, eps: 0.1 });
        let goe = BASE.replace("\"edelman\"", "\"goe_wegner\"").replace("k = 1", "k = 2").replace("[0.1, 0.3]", "[0.1, 0.2, 0.3]")
            + "symmetry = \"symmetric_wigner\"\ninterpolation_t = 1.0\n";
        let cfg = ExperimentConfig::from_toml_str(&goe).unwrap();
        assert!(matches!(
            cfg.event_family().unwrap(),
            EventSpec::IntervalCount { style: IntervalStyle::Centered, scale_by_k: false, .. }
        ));
        assert_eq!(cfg.prediction_tag().exponent(), 1.0);
    }
}
