//! Ordered spectra and the statistics built on them: interval counts,
//! k-gaps, min-max certificates, the hard-edge CDF of the least singular
//! value and semicircle quantiles.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::RealMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumOrdering {
    SingularDescending,
    EigenAscending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
    ordering: SpectrumOrdering,
}

impl Spectrum {
    /// Builds a spectrum, checking the ordering invariant.
    pub fn new(values: Vec<f64>, ordering: SpectrumOrdering) -> Result<Self> {
        let ok = match ordering {
            SpectrumOrdering::SingularDescending => {
                values.windows(2).all(|w| w[0] >= w[1]) && values.iter().all(|&v| v >= 0.0)
            }
            SpectrumOrdering::EigenAscending => values.windows(2).all(|w| w[0] <= w[1]),
        };
        if !ok || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "values violate the {ordering:?} ordering"
            )));
        }
        Ok(Self { values, ordering })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ordering(&self) -> SpectrumOrdering {
        self.ordering
    }

    pub fn source_dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalStyle {
    /// `[0, w]`
    HardEdge,
    /// `[z - w, z + w]`
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub center_z: f64,
    pub half_width: f64,
    pub style: IntervalStyle,
}

impl IntervalSpec {
    pub fn hard_edge(width: f64) -> Self {
        Self { center_z: 0.0, half_width: width, style: IntervalStyle::HardEdge }
    }

    pub fn centered(center_z: f64, half_width: f64) -> Self {
        Self { center_z, half_width, style: IntervalStyle::Centered }
    }

    /// Closed endpoints `(lo, hi)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self.style {
            IntervalStyle::HardEdge => (0.0, self.half_width),
            IntervalStyle::Centered => (self.center_z - self.half_width, self.center_z + self.half_width),
        }
    }
}

fn check_finite(m: &RealMatrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    Ok(())
}

/// Singular values in descending order plus, on request, the matching right
/// singular vectors as columns.
pub(crate) fn svd_sorted(m: &RealMatrix, want_v: bool) -> Result<(Vec<f64>, Option<RealMatrix>)> {
    check_finite(m)?;
    if !want_v {
        let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        return Ok((s, None));
    }
    let svd = m.clone().svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD returned no right vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = RealMatrix::zeros(m.ncols(), order.len());
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &vt.row(i).transpose());
    }
    Ok((s, Some(v)))
}

pub fn singular_values(m: &RealMatrix) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::InvalidMatrix(format!("expected square, got {}x{}", m.nrows(), m.ncols())));
    }
    let (s, _) = svd_sorted(m, false)?;
    Ok(Spectrum { values: s, ordering: SpectrumOrdering::SingularDescending })
}

pub fn eigenvalues_sym(x: &RealMatrix) -> Result<Spectrum> {
    check_finite(x)?;
    if !x.is_square() {
        return Err(Error::InvalidMatrix("expected a square matrix".into()));
    }
    let scale = x.amax();
    let n = x.nrows();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((x[(i, j)] - x[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym / scale));
    }
    let mut values: Vec<f64> = x.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(Spectrum { values, ordering: SpectrumOrdering::EigenAscending })
}

/// `N_I`: number of spectral values in the closed interval.
pub fn count_in_interval(s: &Spectrum, interval: &IntervalSpec) -> usize {
    let (lo, hi) = interval.bounds();
    s.values.iter().filter(|&&v| v >= lo && v <= hi).count()
}

/// `sigma_{n-k+1}`, the k-th smallest singular value.
pub fn kth_smallest_sv(s: &Spectrum, k: usize) -> Result<f64> {
    if s.ordering != SpectrumOrdering::SingularDescending {
        return Err(Error::InvalidArgument("kth_smallest_sv needs singular values".into()));
    }
    let n = s.values.len();
    if k == 0 || k > n {
        return Err(Error::BadK { k, min: 1, max: n });
    }
    Ok(s.values[n - k])
}

/// `min_i (lambda_{i+k-1} - lambda_i)`.
pub fn min_k_gap(s: &Spectrum, k: usize) -> Result<f64> {
    if s.ordering != SpectrumOrdering::EigenAscending {
        return Err(Error::InvalidArgument("min_k_gap needs eigenvalues".into()));
    }
    let n = s.values.len();
    if k < 2 || k > n {
        return Err(Error::BadK { k, min: 2, max: n });
    }
    Ok(s.values
        .windows(k)
        .map(|w| w[k - 1] - w[0])
        .fold(f64::INFINITY, f64::min))
}

/// Witness for the min-max characterization of `sigma_{n-k+1}`.
#[derive(Debug, Clone)]
pub struct MinMaxCertificate {
    /// Orthonormal basis (columns) of the bottom-k right singular subspace.
    pub basis: RealMatrix,
    /// `max ||M x||` over unit `x` in the span of `basis`.
    pub achieved_max: f64,
    /// The basis vectors `z_i`, each with `||M z_i|| <= sigma_{n-k+1}`.
    pub witnesses: Vec<DVector<f64>>,
    pub witness_norms: Vec<f64>,
}

pub fn minmax_certificate(m: &RealMatrix, k: usize) -> Result<MinMaxCertificate> {
    let n = m.ncols();
    if k == 0 || k > n {
        return Err(Error::BadK { k, min: 1, max: n });
    }
    let (_, v) = svd_sorted(m, true)?;
    let v = v.expect("requested");
    let basis = v.columns(n - k, k).into_owned();
    let image = m * &basis;
    let achieved_max = image
        .singular_values()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let witnesses: Vec<DVector<f64>> = (0..k).map(|j| basis.column(j).into_owned()).collect();
    let witness_norms = (0..k).map(|j| image.column(j).norm()).collect();
    Ok(MinMaxCertificate { basis, achieved_max, witnesses, witness_norms })
}

/// Limiting `P(sigma_n <= eps / sqrt(n))` for Ginibre matrices,
/// `int_0^{eps^2} (1 + sqrt x) / (2 sqrt x) exp(-(x/2 + sqrt x)) dx`.
///
/// Substituting `x = u^2` removes the endpoint singularity, leaving the
/// smooth integrand `(1 + u) exp(-(u^2/2 + u))` on `[0, eps]`.
pub fn edelman_cdf(eps: f64) -> f64 {
    if !(eps > 0.0) {
        return 0.0;
    }
    // Beyond u = 40 the remaining mass is below exp(-800).
    let upper = eps.min(40.0);
    let v = quadrature::integrate(|u| (1.0 + u) * (-(0.5 * u * u + u)).exp(), 0.0, upper, 1e-13);
    v.clamp(0.0, 1.0)
}

/// CDF of the semicircle law on `[-2, 2]`.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    0.5 + x * (4.0 - x * x).sqrt() / (4.0 * pi) + (x / 2.0).asin() / pi
}

pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

/// Classical location `gamma_i`: the `i/n` quantile of the semicircle law.
pub fn semicircle_location(i: usize, n: usize) -> Result<f64> {
    if n == 0 || i == 0 || i > n {
        return Err(Error::InvalidArgument(format!("need 1 <= i <= n, got i={i}, n={n}")));
    }
    if i == n {
        return Ok(2.0);
    }
    let target = i as f64 / n as f64;
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if semicircle_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleSpec;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn diag(v: &[f64]) -> RealMatrix {
        RealMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn singular_value_examples() {
        assert_eq!(singular_values(&RealMatrix::identity(3, 3)).unwrap().values(), &[1.0, 1.0, 1.0]);
        let s = singular_values(&diag(&[3.0, 2.0, 1.0])).unwrap();
        for (a, b) in s.values().iter().zip([3.0, 2.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let j = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let s = singular_values(&j).unwrap();
        assert_abs_diff_eq!(s.values()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.values()[1], 0.0, epsilon = 1e-14);
        let bad = RealMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(singular_values(&bad), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn singular_vectors_have_small_residual() {
        let m = EnsembleSpec::ginibre(30).sample(&RngStream::new(4, 0)).unwrap();
        let (s, v) = svd_sorted(&m, true).unwrap();
        let v = v.unwrap();
        let mtm = m.transpose() * &m;
        let scale = s[0] * s[0];
        for j in 0..30 {
            let x = v.column(j);
            let r = &mtm * x - x * (s[j] * s[j]);
            assert!(r.norm() <= 1e-8 * scale);
        }
    }

    #[test]
    fn eigen_examples() {
        assert_eq!(eigenvalues_sym(&diag(&[-1.0, 0.0, 2.0])).unwrap().values(), &[-1.0, 0.0, 2.0]);
        let swap = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = eigenvalues_sym(&swap).unwrap();
        assert_abs_diff_eq!(e.values()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values()[1], 1.0, epsilon = 1e-14);
        let asym = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(eigenvalues_sym(&asym), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn trace_is_preserved() {
        let spec = EnsembleSpec::wigner(40, crate::ensembles::EntryDistribution::rademacher());
        let x = spec.sample(&RngStream::new(1, 1)).unwrap();
        let e = eigenvalues_sym(&x).unwrap();
        let sum: f64 = e.values().iter().sum();
        assert!((sum - x.trace()).abs() <= 1e-9 * 40.0 * x.amax());
    }

    #[test]
    fn interval_counting() {
        let s = Spectrum::new(vec![0.5, 0.1], SpectrumOrdering::SingularDescending).unwrap();
        assert_eq!(count_in_interval(&s, &IntervalSpec::hard_edge(0.2)), 1);
        assert_eq!(count_in_interval(&s, &IntervalSpec::centered(0.3, 0.0)), 0);
        assert_eq!(count_in_interval(&s, &IntervalSpec::hard_edge(10.0)), 2);
        // Closed endpoints.
        assert_eq!(count_in_interval(&s, &IntervalSpec::centered(0.3, 0.2)), 2);
    }

    #[test]
    fn kth_and_gap_examples() {
        let s = Spectrum::new(vec![3.0, 2.0, 1.0], SpectrumOrdering::SingularDescending).unwrap();
        assert_eq!(kth_smallest_sv(&s, 1).unwrap(), 1.0);
        assert_eq!(kth_smallest_sv(&s, 3).unwrap(), 3.0);
        assert!(matches!(kth_smallest_sv(&s, 4), Err(Error::BadK { .. })));
        assert!(matches!(kth_smallest_sv(&s, 0), Err(Error::BadK { .. })));

        let e = Spectrum::new(vec![0.0, 1.0, 2.0, 4.0], SpectrumOrdering::EigenAscending).unwrap();
        assert_eq!(min_k_gap(&e, 2).unwrap(), 1.0);
        assert_eq!(min_k_gap(&e, 3).unwrap(), 2.0);
        assert!(matches!(min_k_gap(&e, 1), Err(Error::BadK { .. })));
        assert!(matches!(min_k_gap(&e, 5), Err(Error::BadK { .. })));
        let eq = Spectrum::new(vec![1.0, 1.0, 3.0], SpectrumOrdering::EigenAscending).unwrap();
        assert_eq!(min_k_gap(&eq, 2).unwrap(), 0.0);
        assert!(Spectrum::new(vec![1.0, 2.0], SpectrumOrdering::SingularDescending).is_err());
    }

    #[test]
    fn minmax_examples() {
        let c = minmax_certificate(&diag(&[3.0, 2.0, 1.0]), 2).unwrap();
        assert_abs_diff_eq!(c.achieved_max, 2.0, epsilon = 1e-12);
        // Basis spans e_2, e_3: no weight on the first coordinate.
        assert!(c.basis.row(0).norm() < 1e-12);
        let full = minmax_certificate(&diag(&[3.0, 2.0, 1.0]), 3).unwrap();
        assert_abs_diff_eq!(full.achieved_max, 3.0, epsilon = 1e-12);
        assert!(minmax_certificate(&diag(&[1.0]), 2).is_err());
    }

    #[test]
    fn minmax_beats_random_subspaces() {
        let mut rng = RngStream::new(21, 0).rng();
        let m = RealMatrix::from_fn(5, 5, |_, _| rng.sample(StandardNormal));
        for k in 1..=5 {
            let c = minmax_certificate(&m, k).unwrap();
            for _ in 0..100 {
                let g = RealMatrix::from_fn(5, k, |_, _| rng.sample(StandardNormal));
                let q = g.qr().q();
                let img = &m * q;
                let max = img.singular_values().iter().copied().fold(0.0, f64::max);
                assert!(max >= c.achieved_max - 1e-8);
            }
        }
    }

    #[test]
    fn minmax_matches_kth_smallest() {
        let mut rng = RngStream::new(22, 0).rng();
        for _ in 0..1000 {
            let n = rng.gen_range(1..=10);
            let k = rng.gen_range(1..=n);
            let m = RealMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal));
            let c = minmax_certificate(&m, k).unwrap();
            let target = kth_smallest_sv(&singular_values(&m).unwrap(), k).unwrap();
            assert!((c.achieved_max - target).abs() <= 1e-8 * target.max(1.0));
            assert!(c.witness_norms.iter().all(|&w| w <= target + 1e-10));
        }
    }

    #[test]
    fn sv_equals_sqrt_eig_of_gram() {
        let mut rng = RngStream::new(23, 0).rng();
        for _ in 0..50 {
            let m = RealMatrix::from_fn(8, 8, |_, _| rng.sample(StandardNormal));
            let s = singular_values(&m).unwrap();
            let e = eigenvalues_sym(&(m.transpose() * &m)).unwrap();
            for (sv, ev) in s.values().iter().zip(e.values().iter().rev()) {
                let root = ev.max(0.0).sqrt();
                assert!((sv - root).abs() <= 1e-8 * s.values()[0]);
            }
        }
    }

    fn closed_form_edelman(eps: f64) -> f64 {
        // d/du [-exp(-(u^2/2 + u))] = (1 + u) exp(-(u^2/2 + u)).
        1.0 - (-(0.5 * eps * eps + eps)).exp()
    }

    #[test]
    fn edelman_examples() {
        assert_eq!(edelman_cdf(0.0), 0.0);
        let v = edelman_cdf(0.1);
        assert_abs_diff_eq!(v, 0.09967, epsilon = 1e-5);
        assert!((v - (0.1 - 0.001 / 3.0)).abs() < 1e-4);
        let mut prev = 0.0;
        for i in 1..200 {
            let c = edelman_cdf(i as f64 * 0.05);
            // Quadrature noise near 1 is ~1e-15.
            assert!(c >= prev - 1e-13);
            prev = c;
        }
        assert!(edelman_cdf(50.0) > 1.0 - 1e-12);
    }

    #[test]
    fn edelman_matches_closed_form_and_series() {
        for i in 0..=300 {
            let eps = i as f64 * 0.01;
            assert!((edelman_cdf(eps) - closed_form_edelman(eps)).abs() <= 1e-10);
            if eps <= 0.3 {
                let series = eps - eps.powi(3) / 3.0;
                assert!((edelman_cdf(eps) - series).abs() <= 2.0 * eps.powi(4) + 1e-15);
            }
        }
    }

    #[test]
    fn semicircle_examples() {
        assert!(semicircle_location(50, 100).unwrap().abs() < 1e-9);
        assert_eq!(semicircle_location(7, 7).unwrap(), 2.0);
        let g = semicircle_location(1, 4).unwrap();
        let mass = quadrature::integrate(semicircle_density, -2.0, g, 1e-12);
        assert!((mass - 0.25).abs() < 1e-9);
        assert!(semicircle_location(0, 4).is_err());
        assert!(semicircle_location(5, 4).is_err());
    }

    #[test]
    fn semicircle_monotone_and_symmetric() {
        for n in [3usize, 10, 25] {
            let locs: Vec<f64> = (1..=n).map(|i| semicircle_location(i, n).unwrap()).collect();
            assert!(locs.windows(2).all(|w| w[0] < w[1]));
            for i in 1..n {
                // gamma_i and gamma_{n-i} sit at masses i/n and 1 - i/n.
                let a = semicircle_location(i, n).unwrap();
                let b = semicircle_location(n - i, n).unwrap();
                assert!((a + b).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn count_monotone_and_partition(values in proptest::collection::vec(-5.0f64..5.0, 1..30),
                                        z in -3.0f64..3.0, w1 in 0.0f64..2.0, dw in 0.0f64..2.0) {
            let mut v = values;
            v.sort_by(f64::total_cmp);
            let s = Spectrum::new(v.clone(), SpectrumOrdering::EigenAscending).unwrap();
            let a = count_in_interval(&s, &IntervalSpec::centered(z, w1));
            let b = count_in_interval(&s, &IntervalSpec::centered(z, w1 + dw));
            prop_assert!(a <= b && b <= v.len());
            // (-inf, z) + [z, z] + (z, inf) partitions the line.
            let left = v.iter().filter(|&&x| x < z).count();
            let right = v.iter().filter(|&&x| x > z).count();
            let mid = count_in_interval(&s, &IntervalSpec::centered(z, 0.0));
            prop_assert_eq!(left + mid + right, v.len());
        }
    }
}
