//! Browser bindings for three interactive views: the hard-edge tail of
//! Ginibre matrices against its limiting law, the GOE spectrum against the
//! semicircle, and the Levy concentration function of an entry law.
//!
//! Every export has a plain Rust twin returning `Result<_, String>`, so the
//! logic is tested natively and the wasm wrappers only convert errors.

use overcrowd::estimators::tail::{sweep_tail, EventSpec, McOptions, SweepMode};
use overcrowd::spectra::{self, edelman_cdf, semicircle_density};
use overcrowd::{levy_concentration, EnsembleSpec, EntryDistribution, Family, RngStream};
use wasm_bindgen::prelude::*;

/// Trial cap so a slider cannot freeze the tab.
pub const MAX_TRIALS: u32 = 20_000;
pub const MAX_N: usize = 200;

/// Monte Carlo `P(sigma_{n-k+1} <= eps / sqrt n)` for Ginibre matrices at
/// each grid point, flattened as `[p_hat, ci_low, ci_high]` triples.
pub fn ginibre_tail(n: usize, k: usize, eps_grid: &[f64], trials: u32, seed: u64) -> Result<Vec<f64>, String> {
    if n == 0 || n > MAX_N {
        return Err(format!("n must lie in [1, {MAX_N}]"));
    }
    let trials = trials.clamp(1, MAX_TRIALS) as u64;
    let event = EventSpec::KthSmallestSv { k, eps: 1.0 };
    let curve = sweep_tail(
        &EnsembleSpec::ginibre(n),
        &event,
        eps_grid,
        trials,
        seed,
        SweepMode::Shared,
        &McOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    Ok(curve.iter().flat_map(|(_, t)| [t.p_hat, t.ci_low, t.ci_high]).collect())
}

/// Limiting hard-edge law at each grid point.
pub fn edelman_curve(eps_grid: &[f64]) -> Vec<f64> {
    eps_grid.iter().map(|&e| edelman_cdf(e)).collect()
}

/// Eigenvalues of one GOE sample, divided by `sqrt n` so they fill `[-2, 2]`.
pub fn goe_eigenvalues(n: usize, seed: u64) -> Result<Vec<f64>, String> {
    if n == 0 || n > MAX_N {
        return Err(format!("n must lie in [1, {MAX_N}]"));
    }
    let g = overcrowd::ensembles::goe(n, &RngStream::new(seed, 0));
    let s = spectra::eigenvalues_sym(&g).map_err(|e| e.to_string())?;
    let scale = (n as f64).sqrt();
    Ok(s.values().iter().map(|v| v / scale).collect())
}

pub fn semicircle(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| semicircle_density(x)).collect()
}

fn family_by_name(name: &str, p: f64) -> Result<Family, String> {
    Ok(match name {
        "gaussian" => Family::StandardGaussian,
        "rademacher" => Family::Rademacher,
        "uniform" => Family::UniformSymmetric { halfwidth: 1.0 },
        "bernoulli" => Family::ShiftedBernoulli { p },
        other => return Err(format!("unknown distribution {other:?}")),
    })
}

/// Levy concentration `sup_x P(|xi - x| <= eps)` of the standardized law.
pub fn levy_curve(dist: &str, p: f64, eps_grid: &[f64]) -> Result<Vec<f64>, String> {
    let d = EntryDistribution::new(family_by_name(dist, p)?).map_err(|e| e.to_string())?;
    eps_grid.iter().map(|&e| levy_concentration(&d, e).map_err(|e| e.to_string())).collect()
}

#[wasm_bindgen(js_name = ginibreTail)]
pub fn ginibre_tail_js(n: usize, k: usize, eps_grid: Vec<f64>, trials: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    ginibre_tail(n, k, &eps_grid, trials, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = edelmanCurve)]
pub fn edelman_curve_js(eps_grid: Vec<f64>) -> Vec<f64> {
    edelman_curve(&eps_grid)
}

#[wasm_bindgen(js_name = goeEigenvalues)]
pub fn goe_eigenvalues_js(n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    goe_eigenvalues(n, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = semicircle)]
pub fn semicircle_js(xs: Vec<f64>) -> Vec<f64> {
    semicircle(&xs)
}

#[wasm_bindgen(js_name = levyCurve)]
pub fn levy_curve_js(dist: &str, p: f64, eps_grid: Vec<f64>) -> Result<Vec<f64>, JsError> {
    levy_curve(dist, p, &eps_grid).map_err(|e| JsError::new(&e))
}
