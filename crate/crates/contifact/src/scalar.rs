//! Scalar spectral factorization: the logarithmic integrability check and the
//! boundary-value outer factor `f_plus = exp(log f / 2 + i H(log f) / 2)`.
//!
//! Both operations see only a finite window, so the tail behavior of `log f`
//! is modeled. The trailing decades of the window are fitted with
//! `log f ~ a - p log(1 + t^2)`; the fit extends the integrability integral
//! beyond the window and removes the unbounded part of `log f` before the
//! discrete Hilbert transform. The Hilbert transform of the removed part is
//! known in closed form (`H(log(1 + t^2)) = 2 atan2(1, t)`, the phase of the
//! outer function `t + i` squared), so no accuracy is lost: without this
//! split, the windowed transform of an unbounded `log f` acquires a phase
//! drift of order `t log T / T` that destroys analyticity of the factor.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, SampledFunction};
use crate::transforms::hilbert;

/// Relative floor applied to density samples before taking logarithms. Small
/// enough that it only guards against `log(0)`: genuinely tiny positive
/// samples must keep their logarithms, or the divergence trend saturates.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

/// Fraction of non-positive samples tolerated before the density is rejected.
pub const CLIP_BUDGET: f64 = 1e-3;

/// Outcome of the logarithmic integrability check.
#[derive(Debug, Clone)]
pub struct PwReport {
    /// Windowed integral of `|log f| / (1 + t^2)` plus the fitted tail beyond
    /// the window.
    pub integral_value: f64,
    /// Half-width of the largest window used.
    pub window_t: f64,
    /// True when the integral keeps growing across nested windows instead of
    /// saturating.
    pub diverged: bool,
    /// Partial windowed integrals at half-widths T/4, T/2, T.
    pub trend: Vec<(f64, f64)>,
    /// Number of samples raised to the positivity floor.
    pub clipped: usize,
}

/// Validated, floored real samples of a positive density, with the count of
/// floored entries.
fn positive_samples(f: &SampledFunction) -> Result<(Vec<f64>, usize)> {
    f.expect_domain(Domain::Time)?;
    let max_imag = f.max_imag();
    let tol = 1e-9 * f.max_abs().max(1e-300);
    if max_imag > tol {
        return Err(Error::NotRealValued { max_imag, tol });
    }
    let peak = f.values().iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NotPositive {
            context: format!("density maximum is {peak}"),
        });
    }
    let invalid = f.values().iter().filter(|v| !(v.re > 0.0)).count();
    let budget = (CLIP_BUDGET * f.values().len() as f64).ceil() as usize;
    if invalid > budget {
        return Err(Error::NotPositive {
            context: format!(
                "{invalid} of {} samples are not positive (budget {budget})",
                f.values().len()
            ),
        });
    }
    let floor = peak * POSITIVITY_FLOOR;
    let mut clipped = 0usize;
    let out: Vec<f64> = f
        .values()
        .iter()
        .map(|v| {
            if v.re < floor {
                clipped += 1;
                floor
            } else {
                v.re
            }
        })
        .collect();
    Ok((out, clipped))
}

/// Least-squares fit of `h ~ a - p log(1 + t^2)` over the trailing part of the
/// window, `0.5 T <= |t| <= 0.9 T`. Returns `(a, p)`, or zeros when the edge
/// region holds too few samples to fit.
fn edge_fit(grid: Grid, h: &[f64]) -> (f64, f64) {
    let t_half = 0.5 * (grid.t_max() - grid.t_min());
    let center = 0.5 * (grid.t_min() + grid.t_max());
    let in_band = |j: usize| {
        let r = (grid.time_at(j) - center).abs() / t_half;
        (0.5..=0.9).contains(&r)
    };
    let x_at = |j: usize| {
        let t = grid.time_at(j) - center;
        (1.0 + t * t).ln()
    };
    let idx: Vec<usize> = (0..h.len()).filter(|&j| in_band(j)).collect();
    if idx.len() < 8 {
        return (0.0, 0.0);
    }
    // Centered form: a constant shift of h moves the mean, not the slope, so
    // scaling equivariance of the factor survives in floating point.
    let m = idx.len() as f64;
    let x_mean = idx.iter().map(|&j| x_at(j)).sum::<f64>() / m;
    let y_mean = idx.iter().map(|&j| h[j]).sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &j in &idx {
        let dx = x_at(j) - x_mean;
        sxx += dx * dx;
        sxy += dx * (h[j] - y_mean);
    }
    if sxx < 1e-12 {
        return (0.0, 0.0);
    }
    let p = -sxy / sxx;
    let a = y_mean + p * x_mean;
    (a, p)
}

/// Tail integral of the fitted model `|a - p log(1 + t^2)| / (1 + t^2)` over
/// `|t| > t_half`, evaluated by the `t = tan(theta)` substitution.
fn model_tail_integral(a: f64, p: f64, t_half: f64) -> f64 {
    if a == 0.0 && p == 0.0 {
        return 0.0;
    }
    // After substitution the integrand is |a + 2 p log(sin phi)| on
    // (0, arctan(1/t_half)]; mapping phi = phi_t u^2 clusters quadrature
    // points at the integrable log singularity.
    let phi_t = (1.0 / t_half).atan();
    let steps = 4096;
    let mut total = 0.0;
    for i in 0..steps {
        let u = (i as f64 + 0.5) / steps as f64;
        let phi = phi_t * u * u;
        let weight = 2.0 * phi_t * u / steps as f64;
        total += (a + 2.0 * p * phi.sin().ln()).abs() * weight;
    }
    2.0 * total
}

/// Windowed integral of `|log f| / (1 + t^2)` over `|t - center| <= half`.
fn windowed_integral(grid: Grid, h: &[f64], half: f64) -> f64 {
    let center = 0.5 * (grid.t_min() + grid.t_max());
    let mut sum = 0.0;
    for (j, hj) in h.iter().enumerate() {
        let t = grid.time_at(j) - center;
        if t.abs() <= half {
            sum += hj.abs() / (1.0 + t * t);
        }
    }
    sum * grid.dt()
}

/// Ratio above which window increments are considered non-decaying.
const DIVERGENCE_RATIO: f64 = 0.75;

/// Checks the logarithmic integrability of a positive density across nested
/// windows. The reported value extends the windowed quadrature with the
/// fitted-model tail; divergence is a trend decision, not a threshold on the
/// (always finite) windowed number.
pub fn paley_wiener_check(f: &SampledFunction) -> Result<PwReport> {
    let (vals, clipped) = positive_samples(f)?;
    let grid = f.grid();
    let h: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let t_half = 0.5 * (grid.t_max() - grid.t_min());

    let trend: Vec<(f64, f64)> = [0.25, 0.5, 1.0]
        .iter()
        .map(|frac| {
            let half = frac * t_half;
            (half, windowed_integral(grid, &h, half))
        })
        .collect();
    let inc1 = trend[1].1 - trend[0].1;
    let inc2 = trend[2].1 - trend[1].1;
    let floor = 1e-6 * trend[2].1.abs().max(1.0);
    let diverged = inc2 > floor && inc2 > DIVERGENCE_RATIO * inc1;

    let (a, p) = edge_fit(grid, &h);
    let integral_value = trend[2].1 + model_tail_integral(a, p, t_half);
    Ok(PwReport {
        integral_value,
        window_t: t_half,
        diverged,
        trend,
        clipped,
    })
}

/// Boundary values of the outer spectral factor of a positive density.
///
/// The modulus is `sqrt(f)` by construction; the phase is half the Hilbert
/// transform of `log f`, computed on the tail-flattened remainder plus the
/// closed-form conjugate of the removed `log(1 + t^2)` component.
pub fn outer_factor(f: &SampledFunction) -> Result<SampledFunction> {
    let report = paley_wiener_check(f)?;
    if report.diverged {
        return Err(Error::PaleyWienerDiverged {
            context: format!(
                "windowed log-integral trend {:?} keeps growing",
                report.trend
            ),
        });
    }
    let (vals, _) = positive_samples(f)?;
    let grid = f.grid();
    let h: Vec<f64> = vals.iter().map(|v| v.ln()).collect();

    if let Some(j) = h.iter().position(|hj| 0.5 * *hj > 700.0) {
        return Err(Error::Overflow(format!(
            "exp of half log-density at t = {} exceeds the double range",
            grid.time_at(j)
        )));
    }

    let (_, p) = edge_fit(grid, &h);
    let center = 0.5 * (grid.t_min() + grid.t_max());
    let flattened: Vec<Complex64> = h
        .iter()
        .enumerate()
        .map(|(j, hj)| {
            let t = grid.time_at(j) - center;
            Complex64::new(hj + p * (1.0 + t * t).ln(), 0.0)
        })
        .collect();
    let flattened = SampledFunction::new(grid, Domain::Time, flattened)?;
    let conj_flat = hilbert(&flattened)?;

    let values: Vec<Complex64> = (0..grid.len())
        .map(|j| {
            let t = grid.time_at(j) - center;
            let phase = 0.5 * conj_flat.values()[j].re - p * (1.0f64).atan2(t);
            Complex64::from_polar((0.5 * h[j]).exp(), phase)
        })
        .collect();
    SampledFunction::new(grid, Domain::Time, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{interior_window, rho_minus, INTERIOR_FRAC};
    use approx::assert_relative_eq;

    fn real_density(grid: Grid, f: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction::from_fn(grid, Domain::Time, |t| Complex64::new(f(t), 0.0))
    }

    #[test]
    fn constant_density_has_zero_integral() {
        let grid = Grid::symmetric(64.0, 1 << 10).unwrap();
        let f = real_density(grid, |_| 1.0);
        let report = paley_wiener_check(&f).unwrap();
        assert!(report.integral_value.abs() < 1e-12);
        assert!(!report.diverged);
    }

    #[test]
    fn lorentzian_integral_matches_closed_form() {
        let grid = Grid::symmetric(1000.0, 1 << 16).unwrap();
        let f = real_density(grid, |t| 1.0 / (1.0 + t * t));
        let report = paley_wiener_check(&f).unwrap();
        let expected = 2.0 * std::f64::consts::PI * 2.0f64.ln();
        assert!(
            (report.integral_value - expected).abs() < 1e-2,
            "integral {} vs {expected}",
            report.integral_value
        );
        assert!(!report.diverged);
    }

    #[test]
    fn gaussian_density_is_flagged_divergent() {
        // e^{-t^2} underflows f64 beyond |t| ~ 27, so wider windows carry no
        // tail information; the trend test needs representable samples.
        let grid = Grid::symmetric(16.0, 1 << 12).unwrap();
        let f = real_density(grid, |t| (-t * t).exp());
        let report = paley_wiener_check(&f).unwrap();
        assert!(report.diverged, "trend {:?}", report.trend);
        assert!(matches!(
            outer_factor(&f),
            Err(Error::PaleyWienerDiverged { .. })
        ));
    }

    #[test]
    fn negative_samples_beyond_budget_are_rejected() {
        let grid = Grid::symmetric(8.0, 256).unwrap();
        let f = real_density(grid, |t| if t < -4.0 { -1.0 } else { 1.0 });
        assert!(matches!(
            paley_wiener_check(&f),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn modulus_identity_holds_to_rounding() {
        let grid = Grid::symmetric(512.0, 1 << 16).unwrap();
        let f = real_density(grid, |t| (2.0 + (0.5 * t).cos()) / (1.0 + 0.01 * t * t));
        let fp = outer_factor(&f).unwrap();
        let peak = f.max_abs();
        let mut worst = 0.0f64;
        for (v, d) in fp.values().iter().zip(f.values()) {
            worst = worst.max((v.norm_sqr() - d.re).abs());
        }
        assert!(worst / peak < 1e-12, "modulus defect {}", worst / peak);
    }

    #[test]
    fn lorentzian_outer_factor_has_unit_quotient_modulus() {
        let grid = Grid::symmetric(512.0, 1 << 16).unwrap();
        let f = real_density(grid, |t| 1.0 / (1.0 + t * t));
        let fp = outer_factor(&f).unwrap();
        let mut worst = 0.0f64;
        for (j, v) in fp.values().iter().enumerate() {
            let t = grid.time_at(j);
            if t.abs() <= 128.0 {
                let q = v * Complex64::new(t, 1.0);
                worst = worst.max((q.norm() - 1.0).abs());
            }
        }
        assert!(worst < 1e-3, "quotient modulus defect {worst}");
    }

    #[test]
    fn two_pole_outer_factor_matches_rational_oracle() {
        // f = (t^2 + 4) / (1 + t^2)^2 has the outer factor
        // c (t + 2i) / (t + i)^2 with |c| = 1; the quotient must be a
        // constant of unit modulus across the interior, which pins the phase,
        // not just the modulus.
        let grid = Grid::symmetric(512.0, 1 << 16).unwrap();
        let f = real_density(grid, |t| (t * t + 4.0) / (1.0 + t * t).powi(2));
        let fp = outer_factor(&f).unwrap();
        let quotient = |j: usize| -> Complex64 {
            let t = grid.time_at(j);
            let oracle = Complex64::new(t, 2.0) / (Complex64::new(t, 1.0) * Complex64::new(t, 1.0));
            fp.values()[j] / oracle
        };
        let q0 = quotient(grid.len() / 2);
        assert_relative_eq!(q0.norm(), 1.0, epsilon = 1e-3);
        let mut worst = 0.0f64;
        for j in 0..grid.len() {
            if grid.time_at(j).abs() <= 128.0 {
                worst = worst.max((quotient(j) - q0).norm());
            }
        }
        assert!(worst < 1e-3, "phase drift {worst}");
    }

    #[test]
    fn outer_factors_of_rational_densities_are_analytic() {
        let grid = Grid::symmetric(512.0, 1 << 16).unwrap();
        let w = interior_window(grid, INTERIOR_FRAC);
        for f in [
            real_density(grid, |t| 1.0 / (1.0 + t * t)),
            real_density(grid, |t| (t * t + 4.0) / (1.0 + t * t).powi(2)),
        ] {
            let fp = outer_factor(&f).unwrap();
            let rho = rho_minus(&fp, &w).unwrap();
            assert!(rho < 1e-3, "analyticity defect {rho}");
        }
    }

    #[test]
    fn scaling_a_density_scales_the_factor_by_sqrt() {
        let grid = Grid::symmetric(256.0, 1 << 14).unwrap();
        let f = real_density(grid, |t| 1.0 / (1.0 + t * t));
        let scaled = real_density(grid, |t| 3.7 / (1.0 + t * t));
        let fp = outer_factor(&f).unwrap();
        let fp_scaled = outer_factor(&scaled).unwrap();
        let c = 3.7f64.sqrt();
        let mut worst = 0.0f64;
        for (a, b) in fp_scaled.values().iter().zip(fp.values()) {
            worst = worst.max((a - c * b).norm());
        }
        assert!(worst < 1e-12, "equivariance defect {worst}");
    }
}
