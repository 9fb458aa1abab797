//! Monte Carlo estimation: tail probabilities with exact intervals,
//! threshold sweeps, exponent fits, the projection concentration
//! experiment and the column-distance audit.

pub mod audit;
pub mod binomial;
pub mod concentration;
pub mod fit;
pub mod tail;

pub use audit::{distance_event_experiment, planted_audit, DistanceAuditReport, MinorStrategy};
pub use binomial::clopper_pearson;
pub use concentration::{concentration_experiment, ConcentrationParams, ConcentrationReport};
pub use fit::{fit_exponent, ExponentFit, PredictionTag, DEFAULT_MIN_HITS};
pub use tail::{mc_tail, sweep_tail, EventSpec, McOptions, SweepMode, TailEstimate};
