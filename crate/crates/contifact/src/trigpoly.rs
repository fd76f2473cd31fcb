//! Finite exponential sums `p(x) = sum_k c_k exp(i w_k x)` with real
//! frequencies, and the singular atom whose spectrum is the indicator of
//! `[0, tau)`.
//!
//! Frequencies are kept sorted; terms closer than the merge tolerance collapse
//! into one. A polynomial is in the plus class when every frequency is `>= 0`
//! and in the minus class when every frequency is `<= 0`; degree-bounded
//! lattice classes restrict frequencies to `{0, tau, ..., N*tau}` (or their
//! negatives).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, SampledFunction};

/// Absolute slack when merging nearby frequencies or testing lattice
/// membership, scaled by the magnitude of the frequency involved.
const FREQ_TOL: f64 = 1e-12;

/// Exponential sum with real frequencies, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    terms: Vec<(f64, Complex64)>,
}

impl TrigPoly {
    /// Builds a polynomial from `(frequency, coefficient)` pairs, merging
    /// duplicates and dropping exact zeros.
    pub fn new(mut terms: Vec<(f64, Complex64)>) -> Self {
        terms.retain(|(_, c)| c.norm_sqr() > 0.0);
        terms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, Complex64)> = Vec::with_capacity(terms.len());
        for (w, c) in terms {
            match merged.last_mut() {
                Some((w0, c0)) if (w - *w0).abs() <= FREQ_TOL * w.abs().max(1.0) => *c0 += c,
                _ => merged.push((w, c)),
            }
        }
        Self { terms: merged }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![(0.0, c)])
    }

    /// Lattice polynomial `sum_k coeffs[k] exp(i (lo + k) tau x)`.
    pub fn from_lattice(tau: f64, lo: i64, coeffs: &[Complex64]) -> Self {
        Self::new(
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| ((lo + k as i64) as f64 * tau, *c))
                .collect(),
        )
    }

    pub fn terms(&self) -> &[(f64, Complex64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn freq_min(&self) -> Option<f64> {
        self.terms.first().map(|t| t.0)
    }

    pub fn freq_max(&self) -> Option<f64> {
        self.terms.last().map(|t| t.0)
    }

    /// Every frequency nonnegative (constants allowed).
    pub fn is_plus_class(&self) -> bool {
        self.freq_min().map_or(true, |w| w >= -FREQ_TOL)
    }

    /// Every frequency nonpositive (constants allowed).
    pub fn is_minus_class(&self) -> bool {
        self.freq_max().map_or(true, |w| w <= FREQ_TOL)
    }

    /// Coefficient 2-norm; equals `lim (1/2L) integral |p|^2` by almost
    /// periodicity, so it is the natural size measure for these sums.
    pub fn coeff_norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, c)| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// The conjugate sum `conj(p(x)) = sum_k conj(c_k) exp(-i w_k x)`.
    pub fn conj_bar(&self) -> Self {
        Self::new(
            self.terms
                .iter()
                .map(|(w, c)| (-*w, c.conj()))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::new(terms)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.terms.iter().map(|(w, c)| (*w, c * s)).collect())
    }

    /// Product of two sums; frequencies add termwise.
    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                terms.push((wa + wb, ca * cb));
            }
        }
        Self::new(terms)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(w, c)| c * Complex64::from_polar(1.0, w * x))
            .sum()
    }

    pub fn eval_on_grid(&self, grid: Grid) -> SampledFunction {
        SampledFunction::from_fn(grid, Domain::Time, |t| self.eval(t))
    }

    /// Nearest lattice index of every frequency, or an error naming the first
    /// frequency that is off the lattice with spacing `tau`.
    fn lattice_indices(&self, tau: f64) -> Result<Vec<i64>> {
        self.terms
            .iter()
            .map(|(w, _)| {
                let ratio = w / tau;
                let k = ratio.round();
                if (ratio - k).abs() * tau > FREQ_TOL * w.abs().max(1.0) {
                    Err(Error::OffLattice {
                        freq: *w,
                        tau,
                        tol: FREQ_TOL,
                    })
                } else {
                    Ok(k as i64)
                }
            })
            .collect()
    }

    /// Coefficients at the strictly negative lattice frequencies
    /// `-tau, -2 tau, ..., -n tau` (index 0 holds the `-tau` coefficient).
    pub fn negative_part_coeffs(&self, tau: f64, n: usize) -> Result<Vec<Complex64>> {
        if !(tau > 0.0) {
            return Err(Error::Validation(format!("tau = {tau} must be positive")));
        }
        let idx = self.lattice_indices(tau)?;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (k, (_, c)) in idx.iter().zip(&self.terms) {
            if *k < 0 {
                let slot = (-k - 1) as usize;
                if slot >= n {
                    return Err(Error::Validation(format!(
                        "frequency {} below the tracked range -{} tau",
                        k, n
                    )));
                }
                out[slot] += c;
            }
        }
        Ok(out)
    }

    /// Dense lattice coefficients `(lo, coeffs)` with
    /// `p = sum_k coeffs[k] exp(i (lo + k) tau x)`.
    pub fn lattice_coeffs(&self, tau: f64) -> Result<(i64, Vec<Complex64>)> {
        let idx = self.lattice_indices(tau)?;
        let lo = idx.iter().copied().min().unwrap_or(0);
        let hi = idx.iter().copied().max().unwrap_or(0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for (k, (_, c)) in idx.iter().zip(&self.terms) {
            coeffs[(k - lo) as usize] += c;
        }
        Ok((lo, coeffs))
    }
}

/// The atom `e_tau(t) = (i / sqrt(2 pi)) (1 - exp(i tau t)) / t`, the inverse
/// transform of the indicator of `[0, tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtauFunction {
    tau: f64,
}

/// Switch to the series expansion below this value of `|tau * t|`; the
/// truncated series then agrees with the closed form to machine precision.
const ETAU_SERIES_CUTOFF: f64 = 1e-6;

impl EtauFunction {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Validation(format!("tau = {tau} must be positive")));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Value at the removable singularity, `tau / sqrt(2 pi)`.
    pub fn value_at_zero(&self) -> f64 {
        self.tau / (2.0 * std::f64::consts::PI).sqrt()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let u = self.tau * t;
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        if u.abs() < ETAU_SERIES_CUTOFF {
            // (i (1 - e^{iu})) / t = tau * (1 + iu/2 - u^2/6 - ...)
            let series = Complex64::new(1.0 - u * u / 6.0, u / 2.0);
            series * (self.tau / norm)
        } else {
            let one_minus = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, u);
            Complex64::new(0.0, 1.0 / norm) * one_minus / t
        }
    }

    pub fn eval_on_grid(&self, grid: Grid) -> SampledFunction {
        SampledFunction::from_fn(grid, Domain::Time, |t| self.eval(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicate_frequencies_merge() {
        let p = TrigPoly::new(vec![(1.0, c(1.0, 0.0)), (1.0 + 1e-14, c(2.0, 0.0))]);
        assert_eq!(p.terms().len(), 1);
        assert_relative_eq!(p.terms()[0].1.re, 3.0);
    }

    #[test]
    fn class_membership_follows_frequency_signs() {
        let plus = TrigPoly::from_lattice(0.5, 0, &[c(1.0, 0.0), c(0.0, 1.0)]);
        assert!(plus.is_plus_class() && !plus.is_zero());
        let minus = plus.conj_bar();
        assert!(minus.is_minus_class());
        let mixed = plus.add(&minus);
        assert!(!mixed.is_plus_class() && !mixed.is_minus_class());
    }

    #[test]
    fn negative_part_extraction() {
        let tau = 0.25;
        // p = 2 e^{-i tau x} + (3 - i) e^{-3 i tau x} + 5 + e^{+2 i tau x}
        let p = TrigPoly::new(vec![
            (-tau, c(2.0, 0.0)),
            (-3.0 * tau, c(3.0, -1.0)),
            (0.0, c(5.0, 0.0)),
            (2.0 * tau, c(1.0, 0.0)),
        ]);
        let neg = p.negative_part_coeffs(tau, 4).unwrap();
        assert_eq!(neg[0], c(2.0, 0.0));
        assert_eq!(neg[1], c(0.0, 0.0));
        assert_eq!(neg[2], c(3.0, -1.0));
        assert_eq!(neg[3], c(0.0, 0.0));
    }

    #[test]
    fn off_lattice_frequency_is_an_error() {
        let p = TrigPoly::new(vec![(-0.3, c(1.0, 0.0))]);
        assert!(matches!(
            p.negative_part_coeffs(0.25, 4),
            Err(Error::OffLattice { .. })
        ));
    }

    #[test]
    fn atom_value_at_zero_and_lattice_zeros() {
        let tau = 0.75;
        let e = EtauFunction::new(tau).unwrap();
        assert_relative_eq!(
            e.eval(0.0).re,
            tau / (2.0 * std::f64::consts::PI).sqrt(),
            epsilon = 1e-15
        );
        for k in 1..4 {
            let t = 2.0 * std::f64::consts::PI * k as f64 / tau;
            assert!(e.eval(t).norm() < 1e-15);
            assert!(e.eval(-t).norm() < 1e-15);
        }
    }

    #[test]
    fn atom_series_matches_closed_form_at_the_cutoff() {
        // The straddle distance carries the genuine slope of the atom and the
        // closed form loses about eps/u relative accuracy to cancellation in
        // 1 - e^{iu}, so agreement is at 1e-9, not 1e-12.
        let e = EtauFunction::new(1.0).unwrap();
        let below = e.eval(0.999e-6);
        let above = e.eval(1.001e-6);
        assert!((below - above).norm() < 1e-9);
    }

    #[test]
    fn atom_l2_norm_squared_is_tau() {
        let tau = 1.5;
        let e = EtauFunction::new(tau).unwrap();
        let grid = Grid::symmetric(4096.0, 1 << 16).unwrap();
        let s = e.eval_on_grid(grid);
        let norm_sq = s.norm_l2().powi(2);
        assert!(
            (norm_sq - tau).abs() < 1e-3 * tau,
            "norm^2 = {norm_sq}, expected ~{tau}"
        );
    }

    fn small_poly() -> impl Strategy<Value = TrigPoly> {
        prop::collection::vec(
            (
                prop_oneof![(-6i64..=6).prop_map(|k| k as f64 * 0.5), -4.0..4.0f64],
                (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| c(re, im)),
            ),
            0..6,
        )
        .prop_map(TrigPoly::new)
    }

    proptest! {
        #[test]
        fn conj_bar_is_an_involution(p in small_poly()) {
            let back = p.conj_bar().conj_bar();
            prop_assert_eq!(back.terms().len(), p.terms().len());
            for ((wa, ca), (wb, cb)) in back.terms().iter().zip(p.terms()) {
                prop_assert!((wa - wb).abs() <= 1e-12 * wb.abs().max(1.0));
                prop_assert!((ca - cb).norm() <= 1e-12);
            }
        }

        #[test]
        fn conj_bar_evaluates_to_the_conjugate(p in small_poly(), x in -5.0..5.0f64) {
            let lhs = p.conj_bar().eval(x);
            let rhs = p.eval(x).conj();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
        }

        #[test]
        fn product_evaluates_pointwise(p in small_poly(), q in small_poly(), x in -5.0..5.0f64) {
            let lhs = p.mul(&q).eval(x);
            let rhs = p.eval(x) * q.eval(x);
            prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
        }

        #[test]
        fn product_frequency_bounds_add(p in small_poly(), q in small_poly()) {
            let r = p.mul(&q);
            if let (Some(pm), Some(qm), Some(rm)) = (p.freq_max(), q.freq_max(), r.freq_max()) {
                prop_assert!(rm <= pm + qm + 1e-9);
            }
        }
    }
}
