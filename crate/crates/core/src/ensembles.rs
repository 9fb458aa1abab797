//! Entry laws and random matrix ensembles.
//!
//! Every generator is a pure function of `(spec, stream)`. Entries are drawn
//! in row-major order (row `i`, then column `j`), which fixes the meaning of
//! a stream independently of the storage layout of [`RealMatrix`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngStream, GOE_STREAM_TAG};
use crate::RealMatrix;

/// Entry distribution families, as written in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    StandardGaussian,
    Rademacher,
    /// Uniform on `[-halfwidth, halfwidth]`; rescaled to unit variance.
    UniformSymmetric { halfwidth: f64 },
    /// Finitely many atoms `(value, mass)`; standardized on construction.
    LatticeUniform { atoms: Vec<(f64, f64)> },
    /// `Bernoulli(p)` centered and scaled to unit variance.
    ShiftedBernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Gaussian,
    Uniform { halfwidth: f64 },
    Atoms { values: Vec<f64>, masses: Vec<f64>, cumulative: Vec<f64> },
}

/// A standardized (mean zero, variance one) scalar entry law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct EntryDistribution {
    declared: Family,
    law: Law,
    /// Declared subgaussian moment `B` with `P(|x| > t) <= 2 exp(-t^2 / B^2)`.
    pub subgaussian_moment: f64,
    pub mean: f64,
    pub variance: f64,
    /// Almost-sure bound `K` for bounded families.
    pub bound: Option<f64>,
}

impl TryFrom<Family> for EntryDistribution {
    type Error = Error;

    fn try_from(family: Family) -> Result<Self> {
        EntryDistribution::new(family)
    }
}

impl From<EntryDistribution> for Family {
    fn from(d: EntryDistribution) -> Family {
        d.declared
    }
}

impl EntryDistribution {
    pub fn new(family: Family) -> Result<Self> {
        let law = match &family {
            Family::StandardGaussian => Law::Gaussian,
            Family::Rademacher => atoms_law(vec![(-1.0, 0.5), (1.0, 0.5)])?,
            Family::UniformSymmetric { halfwidth } => {
                if !(halfwidth.is_finite() && *halfwidth > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "uniform halfwidth must be positive, got {halfwidth}"
                    )));
                }
                Law::Uniform { halfwidth: 3f64.sqrt() }
            }
            Family::LatticeUniform { atoms } => atoms_law(atoms.clone())?,
            Family::ShiftedBernoulli { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "bernoulli parameter must lie in (0, 1), got {p}"
                    )));
                }
                atoms_law(vec![(0.0, 1.0 - p), (1.0, *p)])?
            }
        };
        let (mean, variance, bound) = match &law {
            Law::Gaussian => (0.0, 1.0, None),
            Law::Uniform { halfwidth } => (0.0, halfwidth * halfwidth / 3.0, Some(*halfwidth)),
            Law::Atoms { values, masses, .. } => {
                let mean: f64 = values.iter().zip(masses).map(|(v, m)| v * m).sum();
                let var: f64 = values
                    .iter()
                    .zip(masses)
                    .map(|(v, m)| m * (v - mean).powi(2))
                    .sum();
                let k = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                (mean, var, Some(k))
            }
        };
        let subgaussian_moment = match bound {
            None => 2f64.sqrt(),
            // P(|x| > t) <= 1 <= 2 exp(-t^2/B^2) for t <= K, and 0 beyond K.
            Some(k) => k / std::f64::consts::LN_2.sqrt(),
        };
        Ok(Self {
            declared: family,
            law,
            subgaussian_moment,
            mean,
            variance,
            bound,
        })
    }

    pub fn gaussian() -> Self {
        Self::new(Family::StandardGaussian).expect("gaussian is always valid")
    }

    pub fn rademacher() -> Self {
        Self::new(Family::Rademacher).expect("rademacher is always valid")
    }

    pub fn family(&self) -> &Family {
        &self.declared
    }

    /// Atoms `(value, mass)` of a discrete law, after standardization.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match &self.law {
            Law::Atoms { values, masses, .. } => {
                Some(values.iter().copied().zip(masses.iter().copied()).collect())
            }
            _ => None,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Gaussian => rng.sample(StandardNormal),
            Law::Uniform { halfwidth } => (2.0 * rng.gen::<f64>() - 1.0) * halfwidth,
            Law::Atoms { values, cumulative, .. } => {
                if values.len() == 2 && cumulative[0] == 0.5 {
                    return if rng.next_u32() & 1 == 0 { values[0] } else { values[1] };
                }
                let u: f64 = rng.gen();
                let idx = cumulative.partition_point(|&c| c <= u).min(values.len() - 1);
                values[idx]
            }
        }
    }
}

fn atoms_law(mut atoms: Vec<(f64, f64)>) -> Result<Law> {
    if atoms.is_empty() {
        return Err(Error::InvalidArgument("lattice law needs at least one atom".into()));
    }
    if atoms.iter().any(|&(v, m)| !v.is_finite() || !m.is_finite() || m < 0.0) {
        return Err(Error::InvalidArgument(
            "atom values must be finite and masses nonnegative".into(),
        ));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("atom masses sum to zero".into()));
    }
    atoms.retain(|a| a.1 > 0.0);
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let masses: Vec<f64> = atoms.iter().map(|a| a.1 / total).collect();
    let mean: f64 = atoms.iter().zip(&masses).map(|(a, m)| a.0 * m).sum();
    let var: f64 = atoms.iter().zip(&masses).map(|(a, m)| m * (a.0 - mean).powi(2)).sum();
    if var <= 0.0 {
        return Err(Error::InvalidArgument("degenerate law: zero variance".into()));
    }
    let sd = var.sqrt();
    let values: Vec<f64> = atoms.iter().map(|a| (a.0 - mean) / sd).collect();
    let mut cumulative = Vec::with_capacity(masses.len());
    let mut acc = 0.0;
    for m in &masses {
        acc += m;
        cumulative.push(acc);
    }
    *cumulative.last_mut().unwrap() = 1.0;
    Ok(Law::Atoms { values, masses, cumulative })
}

/// Lévy concentration function `sup_x P(|x_entry - x| <= eps)`.
pub fn levy_concentration(dist: &EntryDistribution, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
    }
    let p = match &dist.law {
        // Unimodal and symmetric: the best window is centered at the mode.
        Law::Gaussian => statrs::function::erf::erf(eps / std::f64::consts::SQRT_2),
        Law::Uniform { halfwidth } => (eps / halfwidth).min(1.0),
        Law::Atoms { values, masses, .. } => {
            let width = 2.0 * eps;
            let slack = 1e-12 * (1.0 + width);
            let mut best = 0.0f64;
            let mut right = 0;
            let mut mass = 0.0;
            for left in 0..values.len() {
                if right < left {
                    right = left;
                    mass = 0.0;
                }
                while right < values.len() && values[right] - values[left] <= width + slack {
                    mass += masses[right];
                    right += 1;
                }
                best = best.max(mass);
                mass -= masses[left];
            }
            best.min(1.0)
        }
    };
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    #[default]
    Iid,
    SymmetricWigner,
}

/// Deterministic perturbation `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    Identity { scale: f64 },
    /// `scale` times the all-ones matrix (rank one).
    AllOnes { scale: f64 },
    Matrix { rows: Vec<Vec<f64>> },
}

impl Perturbation {
    pub fn materialize(&self, n: usize) -> Result<RealMatrix> {
        match self {
            Perturbation::Identity { scale } => Ok(RealMatrix::identity(n, n) * *scale),
            Perturbation::AllOnes { scale } => Ok(RealMatrix::from_element(n, n, *scale)),
            Perturbation::Matrix { rows } => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::SpecMismatch(format!(
                        "perturbation must be {n}x{n}"
                    )));
                }
                Ok(RealMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

fn default_entry() -> EntryDistribution {
    EntryDistribution::gaussian()
}

/// Full description of a random matrix distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    #[serde(default)]
    pub symmetry: Symmetry,
    #[serde(default = "default_entry")]
    pub entry: EntryDistribution,
    /// Diagonal law for Wigner matrices; defaults to `entry`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<EntryDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    /// Weight of the GOE component: `sqrt(1-t) X + sqrt(t) G`.
    #[serde(default)]
    pub interpolation_t: f64,
    #[serde(default)]
    pub center_z: f64,
}

impl EnsembleSpec {
    pub fn iid(n: usize, entry: EntryDistribution) -> Self {
        Self {
            n,
            symmetry: Symmetry::Iid,
            entry,
            diagonal: None,
            perturbation: None,
            interpolation_t: 0.0,
            center_z: 0.0,
        }
    }

    pub fn ginibre(n: usize) -> Self {
        Self::iid(n, EntryDistribution::gaussian())
    }

    pub fn wigner(n: usize, entry: EntryDistribution) -> Self {
        Self { symmetry: Symmetry::SymmetricWigner, ..Self::iid(n, entry) }
    }

    /// Pure GOE, expressed as a fully interpolated Wigner ensemble.
    pub fn goe(n: usize) -> Self {
        Self { interpolation_t: 1.0, ..Self::wigner(n, EntryDistribution::gaussian()) }
    }

    pub fn with_perturbation(mut self, f: Perturbation) -> Self {
        self.perturbation = Some(f);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("ensemble.n", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.interpolation_t) {
            return Err(Error::config("ensemble.interpolation_t", "must lie in [0, 1]"));
        }
        if self.interpolation_t != 0.0 && self.symmetry != Symmetry::SymmetricWigner {
            return Err(Error::config(
                "ensemble.interpolation_t",
                "interpolation requires symmetry = symmetric_wigner",
            ));
        }
        if !self.center_z.is_finite() {
            return Err(Error::config("ensemble.center_z", "must be finite"));
        }
        if let Some(f) = &self.perturbation {
            let m = f
                .materialize(self.n)
                .map_err(|e| Error::config("ensemble.perturbation", e.to_string()))?;
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("ensemble.perturbation", "entries must be finite"));
            }
            if self.symmetry == Symmetry::SymmetricWigner && m != m.transpose() {
                return Err(Error::config(
                    "ensemble.perturbation",
                    "must be symmetric for a Wigner ensemble",
                ));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &RngStream) -> Result<RealMatrix> {
        match self.symmetry {
            Symmetry::Iid => sample_iid(self, rng),
            Symmetry::SymmetricWigner => sample_wigner(self, rng),
        }
    }
}

/// `n x n` matrix of iid entries, plus `F` when configured.
pub fn sample_iid(spec: &EnsembleSpec, stream: &RngStream) -> Result<RealMatrix> {
    if spec.symmetry != Symmetry::Iid {
        return Err(Error::SpecMismatch("sample_iid needs symmetry = iid".into()));
    }
    let n = spec.n;
    let mut rng = stream.rng();
    let mut m = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = spec.entry.sample(&mut rng);
        }
    }
    if let Some(f) = &spec.perturbation {
        m += f.materialize(n)?;
    }
    Ok(m)
}

/// Symmetric Wigner sample `sqrt(1-t) X + sqrt(t) G + F`.
///
/// The GOE part `G` is drawn from a derived stream, so a sweep over `t`
/// reuses the same `X`.
pub fn sample_wigner(spec: &EnsembleSpec, stream: &RngStream) -> Result<RealMatrix> {
    if spec.symmetry != Symmetry::SymmetricWigner {
        return Err(Error::SpecMismatch(
            "sample_wigner needs symmetry = symmetric_wigner".into(),
        ));
    }
    let n = spec.n;
    let t = spec.interpolation_t;
    let mut out = if t == 1.0 {
        goe(n, &stream.derive(GOE_STREAM_TAG))
    } else {
        let diag = spec.diagonal.as_ref().unwrap_or(&spec.entry);
        let mut rng = stream.rng();
        let mut x = RealMatrix::zeros(n, n);
        for i in 0..n {
            x[(i, i)] = diag.sample(&mut rng);
            for j in (i + 1)..n {
                let v = spec.entry.sample(&mut rng);
                x[(i, j)] = v;
                x[(j, i)] = v;
            }
        }
        if t > 0.0 {
            let g = goe(n, &stream.derive(GOE_STREAM_TAG));
            x *= (1.0 - t).sqrt();
            x += g * t.sqrt();
        }
        x
    };
    if let Some(f) = &spec.perturbation {
        out += f.materialize(n)?;
    }
    Ok(out)
}

/// GOE matrix: off-diagonal variance 1, diagonal variance 2.
pub fn goe(n: usize, stream: &RngStream) -> RealMatrix {
    let mut rng = stream.rng();
    let mut g = RealMatrix::zeros(n, n);
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        g[(i, i)] = std::f64::consts::SQRT_2 * d;
        for j in (i + 1)..n {
            let v: f64 = rng.sample(StandardNormal);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}
