//! Synthetic densities with closed-form factors and independent oracles.
//!
//! Everything here exists to check the production code from a different
//! direction: densities are generated from rational factors whose analyticity
//! is known by inspection, the Bauer block Toeplitz route factors lattice
//! Gram data without touching the completion solver, and the brute-force
//! completion searches the full coefficient space of the two-by-two unitary
//! form pointwise. None of these paths share numerical machinery with the
//! pipeline beyond the basic types.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::completion::{
    completion_residuals, CompletionProblem, UnitaryPolyMatrix,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pipeline::{MatrixFunction, SpectralDensity};
use crate::transforms::INTERIOR_FRAC;
use crate::trigpoly::TrigPoly;

/// One simple-pole term `residue * e^{i modulation t} / (t - pole)`.
///
/// The pole must lie strictly in the lower half plane and the modulation
/// frequency must be nonnegative, so every term is analytic and bounded on
/// the closed upper half plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoleTerm {
    pub pole: Complex64,
    pub residue: Complex64,
    #[serde(default)]
    pub modulation: f64,
}

/// One matrix entry: a constant plus simple-pole terms.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RationalEntry {
    #[serde(default)]
    pub constant: Complex64,
    #[serde(default)]
    pub terms: Vec<PoleTerm>,
}

/// A square matrix of rational entries used to synthesize test densities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalMatrixSpec {
    pub r: usize,
    /// Row-major entries.
    pub entries: Vec<Vec<RationalEntry>>,
}

/// Minimum allowed dip ratio of |det| on the upper half plane verification
/// grid. The ratio compares the smallest to the largest sample per height
/// level, so the entries' decay along the real direction cancels out while
/// a determinant zero on or near a sample drives the ratio toward zero.
const OUTER_PROXY_FLOOR: f64 = 1e-8;

impl RationalMatrixSpec {
    /// Checks shapes, pole locations, and modulation signs.
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::UnsupportedSize("matrix order zero".into()));
        }
        if self.entries.len() != self.r || self.entries.iter().any(|row| row.len() != self.r) {
            return Err(Error::Validation(format!(
                "expected {0} x {0} entries",
                self.r
            )));
        }
        for (i, row) in self.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                for term in &e.terms {
                    if !(term.pole.im < 0.0) {
                        return Err(Error::Validation(format!(
                            "entry ({i}, {j}) has a pole at {} outside the lower half plane",
                            term.pole
                        )));
                    }
                    if !(term.modulation >= 0.0) || !term.modulation.is_finite() {
                        return Err(Error::Validation(format!(
                            "entry ({i}, {j}) has modulation frequency {}, expected >= 0",
                            term.modulation
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Entry value at a point of the closed upper half plane.
    pub fn eval_entry(&self, i: usize, j: usize, z: Complex64) -> Complex64 {
        let e = &self.entries[i][j];
        let mut v = e.constant;
        for term in &e.terms {
            v += term.residue * (Complex64::i() * term.modulation * z).exp() / (z - term.pole);
        }
        v
    }

    /// Matrix value at a point of the closed upper half plane.
    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.r, self.r, |i, j| self.eval_entry(i, j, z))
    }

    /// Samples |det| over a rectangle of the upper half plane and returns
    /// the worst per-level ratio of smallest to largest sample: a proxy for
    /// the determinant being zero-free there. A zero on or near a sample
    /// drives the ratio far below the decay-induced spread.
    pub fn outer_proxy_minimum(&self, x_half: f64) -> f64 {
        let mut worst = f64::INFINITY;
        let nx = 257;
        for level in [0.0, 0.25, 1.0, 4.0] {
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for q in 0..nx {
                let x = -x_half + 2.0 * x_half * q as f64 / (nx - 1) as f64;
                let z = Complex64::new(x, level);
                let det = self.eval(z).determinant().norm();
                lo = lo.min(det);
                hi = hi.max(det);
            }
            if hi > 0.0 {
                worst = worst.min(lo / hi);
            } else {
                worst = 0.0;
            }
        }
        worst
    }
}

/// Evaluates a rational factor on the grid and forms the density it
/// realizes. The returned pair is (S, A) with S = A A* pointwise.
pub fn synth_density(
    spec: &RationalMatrixSpec,
    grid: Grid,
) -> Result<(SpectralDensity, MatrixFunction)> {
    spec.validate()?;
    let proxy = spec.outer_proxy_minimum(grid.t_max().abs().min(64.0));
    if proxy < OUTER_PROXY_FLOOR {
        return Err(Error::Validation(format!(
            "determinant ratio {proxy:.3e} on the upper half plane verification grid is below {OUTER_PROXY_FLOOR:.0e}; the factor is not outer"
        )));
    }
    let a = MatrixFunction::from_fn(grid, spec.r, |t| spec.eval(Complex64::new(t, 0.0)))?;
    let s = SpectralDensity::from_outer_product(&a)?;
    Ok((s, a))
}

fn entry(constant: Complex64, terms: Vec<PoleTerm>) -> RationalEntry {
    RationalEntry { constant, terms }
}

fn pole(re: f64, im: f64, res_re: f64, res_im: f64, modulation: f64) -> PoleTerm {
    PoleTerm {
        pole: Complex64::new(re, im),
        residue: Complex64::new(res_re, res_im),
        modulation,
    }
}

/// 1 / (t + i): the scalar Lorentzian factor.
pub fn preset_scalar_lorentzian() -> RationalMatrixSpec {
    RationalMatrixSpec {
        r: 1,
        entries: vec![vec![entry(
            Complex64::new(0.0, 0.0),
            vec![pole(0.0, -1.0, 1.0, 0.0, 0.0)],
        )]],
    }
}

/// Lower triangular 2x2 rational factor with coupling 1/2.
pub fn preset_rational_two_by_two() -> RationalMatrixSpec {
    let zero = RationalEntry::default();
    RationalMatrixSpec {
        r: 2,
        entries: vec![
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -1.0, 1.0, 0.0, 0.0)]),
                zero,
            ],
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -1.0, 0.5, 0.0, 0.0)]),
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -1.0, 1.0, 0.0, 0.0)]),
            ],
        ],
    }
}

/// Lower triangular 2x2 factor whose coupling carries the phase e^{i t}.
pub fn preset_phase_twisted_two_by_two() -> RationalMatrixSpec {
    let zero = RationalEntry::default();
    RationalMatrixSpec {
        r: 2,
        entries: vec![
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -1.0, 1.0, 0.0, 0.0)]),
                zero,
            ],
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -2.0, 1.0, 0.0, 1.0)]),
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -2.0, 1.0, 0.0, 0.0)]),
            ],
        ],
    }
}

/// Full 2x2 factor with modulated upper coupling; its triangular
/// factorization has a genuinely co-analytic bottom row.
pub fn preset_cross_two_by_two() -> RationalMatrixSpec {
    RationalMatrixSpec {
        r: 2,
        entries: vec![
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -1.0, 1.0, 0.0, 0.0)]),
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -3.0, 0.4, 0.0, 2.0)]),
            ],
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -2.0, 0.5, 0.0, 0.0)]),
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -1.0, 1.0, 0.0, 0.0)]),
            ],
        ],
    }
}

/// Lower triangular 3x3 factor exercising two recursion steps.
pub fn preset_lower_three_by_three() -> RationalMatrixSpec {
    let zero = RationalEntry::default();
    RationalMatrixSpec {
        r: 3,
        entries: vec![
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -1.0, 1.0, 0.0, 0.0)]),
                zero.clone(),
                zero.clone(),
            ],
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -2.0, 0.5, 0.0, 0.0)]),
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -1.0, 1.0, 0.0, 0.0)]),
                zero,
            ],
            vec![
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -2.0, 0.3, 0.0, 1.0)]),
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -3.0, 0.25, 0.0, 0.0)]),
                entry(Complex64::new(0.0, 0.0), vec![pole(0.0, -2.0, 1.0, 0.0, 0.0)]),
            ],
        ],
    }
}

/// Looks up a named synthetic factor.
pub fn preset(name: &str) -> Option<RationalMatrixSpec> {
    match name {
        "scalar" => Some(preset_scalar_lorentzian()),
        "rational2" => Some(preset_rational_two_by_two()),
        "twisted2" => Some(preset_phase_twisted_two_by_two()),
        "cross2" => Some(preset_cross_two_by_two()),
        "lower3" => Some(preset_lower_three_by_three()),
        _ => None,
    }
}

/// Names accepted by `preset`.
pub const PRESET_NAMES: [&str; 5] = ["scalar", "rational2", "twisted2", "cross2", "lower3"];

/// Gaussian-envelope density e^{-t^2} I: Hermitian and positive definite,
/// but its log-integral diverges, so no spectral factor exists.
pub fn gaussian_density(grid: Grid, r: usize) -> Result<SpectralDensity> {
    let values = (0..grid.len())
        .map(|k| {
            let t = grid.time_at(k);
            DMatrix::from_diagonal_element(r, r, Complex64::new((-t * t).exp(), 0.0))
        })
        .collect();
    SpectralDensity::new(grid, values)
}

/// Hermitian lattice Gram coefficients of the row matrix of a completion
/// problem: G_k for k = 0..=depth, where G(x) = F(x) F(x)* and F carries the
/// identity block, the co-analytic row, and the corner factor. Sampled
/// pointwise and recovered by a discrete transform, which is exact because
/// the band is finite.
pub fn gram_coefficients(p: &CompletionProblem, depth: usize) -> Vec<DMatrix<Complex64>> {
    let m = p.m();
    let points = (4 * (p.n_degree() + 1).max(depth + 1)).next_power_of_two();
    let tau = p.tau();
    let samples: Vec<DMatrix<Complex64>> = (0..points)
        .map(|q| {
            let x = 2.0 * std::f64::consts::PI * q as f64 / (points as f64 * tau);
            let mut f = DMatrix::identity(m, m);
            for j in 0..m - 1 {
                f[(m - 1, j)] = p.zeta()[j].eval(x);
            }
            f[(m - 1, m - 1)] = p.f_plus().eval(x);
            &f * f.adjoint()
        })
        .collect();
    (0..=depth)
        .map(|k| {
            let mut acc = DMatrix::zeros(m, m);
            for (q, s) in samples.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (k * q) as f64 / points as f64;
                acc += s * Complex64::from_polar(1.0 / points as f64, phase);
            }
            acc
        })
        .collect()
}

/// Spectral factorization of lattice Gram data by Cholesky factorization of
/// the block Toeplitz matrix of the coefficients.
///
/// `g_coeffs[k]` holds G_k for k >= 0; the negative side is implied by
/// G_{-k} = G_k*. The last block row of the Cholesky factor, read from the
/// diagonal outwards, approximates the factor coefficients: entry k of the
/// result multiplies z^k, and the zeroth block is lower triangular with
/// positive diagonal. Convergence in the truncation order is geometric when
/// det G stays away from zero on the unit circle.
pub fn bauer_toeplitz_factor(
    g_coeffs: &[DMatrix<Complex64>],
    blocks: usize,
) -> Result<Vec<DMatrix<Complex64>>> {
    if g_coeffs.is_empty() || blocks == 0 {
        return Err(Error::Validation("empty Gram data or zero blocks".into()));
    }
    let d = g_coeffs[0].nrows();
    for (k, g) in g_coeffs.iter().enumerate() {
        if g.nrows() != d || g.ncols() != d {
            return Err(Error::Validation(format!(
                "coefficient {k} is {}x{}, expected {d}x{d}",
                g.nrows(),
                g.ncols()
            )));
        }
    }
    let h_defect = (&g_coeffs[0] - g_coeffs[0].adjoint()).norm();
    if h_defect > 1e-10 * g_coeffs[0].norm().max(1.0) {
        return Err(Error::Validation(format!(
            "zeroth Gram coefficient is not Hermitian: defect {h_defect:.3e}"
        )));
    }
    let size = blocks * d;
    let mut toeplitz: DMatrix<Complex64> = DMatrix::zeros(size, size);
    for bi in 0..blocks {
        for bj in 0..blocks {
            let block = if bi >= bj {
                let k = bi - bj;
                if k < g_coeffs.len() {
                    g_coeffs[k].clone()
                } else {
                    DMatrix::zeros(d, d)
                }
            } else {
                let k = bj - bi;
                if k < g_coeffs.len() {
                    g_coeffs[k].adjoint()
                } else {
                    DMatrix::zeros(d, d)
                }
            };
            for i in 0..d {
                for j in 0..d {
                    toeplitz[(bi * d + i, bj * d + j)] = block[(i, j)];
                }
            }
        }
    }
    let chol = nalgebra::Cholesky::new(toeplitz).ok_or_else(|| Error::NotPositive {
        context: format!("block Toeplitz matrix of {blocks} blocks is not positive definite"),
    })?;
    let l = chol.l();
    let last = blocks - 1;
    let factor = (0..blocks)
        .map(|k| {
            let mut block = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    block[(i, j)] = l[(last * d + i, (last - k) * d + j)];
                }
            }
            block
        })
        .collect();
    Ok(factor)
}

/// Value of a lattice polynomial factor at a point.
pub fn eval_factor(coeffs: &[DMatrix<Complex64>], tau: f64, x: f64) -> DMatrix<Complex64> {
    let d = coeffs[0].nrows();
    let mut acc = DMatrix::zeros(d, d);
    for (k, c) in coeffs.iter().enumerate() {
        acc += c * Complex64::from_polar(1.0, k as f64 * tau * x);
    }
    acc
}

/// Gram coefficients realized by a polynomial factor, for residual checks.
pub fn realized_gram(coeffs: &[DMatrix<Complex64>], depth: usize) -> Vec<DMatrix<Complex64>> {
    let d = coeffs[0].nrows();
    (0..=depth)
        .map(|k| {
            let mut acc = DMatrix::zeros(d, d);
            for u in k..coeffs.len() {
                acc += &coeffs[u] * coeffs[u - k].adjoint();
            }
            acc
        })
        .collect()
}

/// Largest Frobenius deviation of Q = a^{-1} b from its mean over the given
/// points. Zero exactly when the two factors differ by a constant matrix on
/// the right.
pub fn quotient_deviation_at(
    a: impl Fn(f64) -> DMatrix<Complex64>,
    b: impl Fn(f64) -> DMatrix<Complex64>,
    xs: &[f64],
) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Validation("no comparison points".into()));
    }
    let mut qs = Vec::with_capacity(xs.len());
    for &x in xs {
        let av = a(x);
        let inv = av.clone().try_inverse().ok_or_else(|| {
            Error::Validation(format!("reference factor is singular at x = {x}"))
        })?;
        qs.push(inv * b(x));
    }
    let d = qs[0].nrows();
    let mut mean: DMatrix<Complex64> = DMatrix::zeros(d, d);
    for q in &qs {
        mean += q;
    }
    mean /= Complex64::new(xs.len() as f64, 0.0);
    Ok(qs
        .iter()
        .map(|q| (q - &mean).norm())
        .fold(0.0, f64::max))
}

/// Quotient deviation of two factors over the interior of their grid.
pub fn factor_quotient_deviation(
    oracle: &MatrixFunction,
    candidate: &MatrixFunction,
) -> Result<f64> {
    if oracle.grid() != candidate.grid() || oracle.r() != candidate.r() {
        return Err(Error::GridMismatch(
            "factors live on different grids or orders".into(),
        ));
    }
    let grid = oracle.grid();
    let center = 0.5 * (grid.t_min() + grid.t_max());
    let half = 0.5 * (grid.t_max() - grid.t_min());
    let interior: Vec<usize> = (0..grid.len())
        .filter(|&k| (grid.time_at(k) - center).abs() <= INTERIOR_FRAC * half)
        .collect();
    if interior.is_empty() {
        return Err(Error::Validation("interior sample set is empty".into()));
    }
    let mut qs = Vec::with_capacity(interior.len());
    for &k in &interior {
        let inv = oracle.value(k).clone().try_inverse().ok_or_else(|| {
            Error::Validation(format!(
                "oracle factor is singular at t = {}",
                grid.time_at(k)
            ))
        })?;
        qs.push(inv * candidate.value(k));
    }
    let r = oracle.r();
    let mut mean: DMatrix<Complex64> = DMatrix::zeros(r, r);
    for q in &qs {
        mean += q;
    }
    mean /= Complex64::new(qs.len() as f64, 0.0);
    Ok(qs.iter().map(|q| (q - &mean).norm()).fold(0.0, f64::max))
}

/// Search budget of the brute-force completion oracle.
#[derive(Debug, Clone)]
pub struct BruteBudget {
    pub max_iters: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for BruteBudget {
    fn default() -> Self {
        BruteBudget {
            max_iters: 400,
            starts: 16,
            seed: 0,
        }
    }
}

/// Acceptance threshold of the brute-force oracle, scaled by the data norm.
const BRUTE_TOL: f64 = 1e-9;

/// Plain damped least squares with a finite-difference Jacobian. Kept local
/// so the oracle shares no optimizer state with the production solver.
fn descend(
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let p = start.len();
    let mut theta = start.to_vec();
    let mut res = residual(&theta);
    let mut cost: f64 = res.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    for _ in 0..max_iters {
        if cost < 1e-28 {
            break;
        }
        let nr = res.len();
        let mut jac = DMatrix::zeros(nr, p);
        for c in 0..p {
            let h = 1e-7 * theta[c].abs().max(1.0);
            let mut up = theta.clone();
            up[c] += h;
            let mut dn = theta.clone();
            dn[c] -= h;
            let ru = residual(&up);
            let rd = residual(&dn);
            for rix in 0..nr {
                jac[(rix, c)] = (ru[rix] - rd[rix]) / (2.0 * h);
            }
        }
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let rhs = &jt * DMatrix::from_column_slice(nr, 1, &res);
        let mut accepted = false;
        for _ in 0..8 {
            let mut damped = normal.clone();
            for i in 0..p {
                damped[(i, i)] += lambda * normal[(i, i)].max(1e-12);
            }
            if let Some(ch) = nalgebra::Cholesky::new(damped) {
                let delta = ch.solve(&rhs);
                let trial: Vec<f64> = theta
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v - delta[(i, 0)])
                    .collect();
                let tres = residual(&trial);
                let tcost: f64 = tres.iter().map(|v| v * v).sum();
                if tcost < cost {
                    theta = trial;
                    res = tres;
                    cost = tcost;
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (theta, cost)
}

/// Global search for the unitary completion on small instances.
///
/// Restricted to m <= 2 and degree <= 2 where the two-by-two unitary form
/// [[alpha, beta], [-conj beta, conj alpha]] with |alpha|^2 + |beta|^2 = 1
/// covers every admissible completion. The residual stacks the pointwise
/// norm defect with the negative-lattice coefficients of both completed
/// columns, evaluated on a dense sample of one period; nothing is shared
/// with the production solver's coefficient-space construction.
pub fn brute_force_completion(
    p: &CompletionProblem,
    budget: &BruteBudget,
) -> Result<UnitaryPolyMatrix> {
    let m = p.m();
    let n = p.n_degree();
    if m > 2 || n > 2 {
        return Err(Error::UnsupportedSize(format!(
            "brute-force oracle handles m <= 2 and degree <= 2, got m = {m}, degree = {n}"
        )));
    }
    let tau = p.tau();
    if m == 1 {
        return Ok(UnitaryPolyMatrix::identity(1, tau, n));
    }
    if p.zeta().iter().all(|z| z.is_zero()) {
        return Ok(UnitaryPolyMatrix::identity(m, tau, n));
    }
    let nc = n + 1;
    let points = 16 * nc;
    let xs: Vec<f64> = (0..points)
        .map(|q| 2.0 * std::f64::consts::PI * q as f64 / (points as f64 * tau))
        .collect();
    let zeta_vals: Vec<Complex64> = xs.iter().map(|&x| p.zeta()[0].eval(x)).collect();
    let f_vals: Vec<Complex64> = xs.iter().map(|&x| p.f_plus().eval(x)).collect();
    let scale = p.f_plus().coeff_norm().max(p.zeta()[0].coeff_norm()).max(1.0);

    // theta: [Re a_0, Im a_0, ..., Re b_0, Im b_0, ...]
    let unpack = |theta: &[f64]| -> (Vec<Complex64>, Vec<Complex64>) {
        let a = (0..nc)
            .map(|k| Complex64::new(theta[2 * k], theta[2 * k + 1]))
            .collect();
        let b = (0..nc)
            .map(|k| Complex64::new(theta[2 * nc + 2 * k], theta[2 * nc + 2 * k + 1]))
            .collect();
        (a, b)
    };
    let eval_poly = |c: &[Complex64], x: f64| -> Complex64 {
        c.iter()
            .enumerate()
            .map(|(k, v)| v * Complex64::from_polar(1.0, k as f64 * tau * x))
            .sum()
    };
    let residual = |theta: &[f64]| -> Vec<f64> {
        let (a, b) = unpack(theta);
        let mut out = Vec::with_capacity(points + 8 * n);
        let mut col0 = Vec::with_capacity(points);
        let mut col1 = Vec::with_capacity(points);
        for (q, &x) in xs.iter().enumerate() {
            let av = eval_poly(&a, x);
            let bv = eval_poly(&b, x);
            out.push(av.norm_sqr() + bv.norm_sqr() - 1.0);
            col0.push(zeta_vals[q] * av - f_vals[q] * bv.conj());
            col1.push(zeta_vals[q] * bv + f_vals[q] * av.conj());
        }
        // Negative-lattice coefficients of both completed columns; the band
        // is within [-n, n], so the dense sample recovers them exactly.
        for col in [&col0, &col1] {
            for s in 1..=n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (q, v) in col.iter().enumerate() {
                    let phase = 2.0 * std::f64::consts::PI * (s * q) as f64 / points as f64;
                    acc += v * Complex64::from_polar(1.0 / points as f64, phase);
                }
                out.push(acc.re);
                out.push(acc.im);
            }
        }
        out
    };

    let dim = 4 * nc;
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut best: Option<(UnitaryPolyMatrix, f64, f64, f64)> = None;
    for start_ix in 0..budget.starts.max(1) {
        let mut start = vec![0.0; dim];
        if start_ix == 0 {
            start[0] = 1.0;
        } else {
            for v in start.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let norm: f64 = start.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in start.iter_mut() {
                *v /= norm.max(1e-9);
            }
        }
        let (theta, _) = descend(&residual, &start, budget.max_iters);
        let (a, b) = unpack(&theta);
        let neg_b: Vec<Complex64> = b.iter().map(|v| -v).collect();
        let entries = vec![
            vec![
                TrigPoly::from_lattice(tau, 0, &a),
                TrigPoly::from_lattice(tau, 0, &b),
            ],
            vec![
                TrigPoly::from_lattice(tau, 0, &neg_b),
                TrigPoly::from_lattice(tau, 0, &a),
            ],
        ];
        let u = UnitaryPolyMatrix::new(2, tau, n, entries)?;
        let res = completion_residuals(p, &u);
        let worst = res.unitarity.max(res.det).max(res.analyticity);
        if best
            .as_ref()
            .map_or(true, |(_, bu, bd, ba)| worst < bu.max(*bd).max(*ba))
        {
            best = Some((u, res.unitarity, res.det, res.analyticity));
        }
        if worst <= BRUTE_TOL * scale {
            let (u, ..) = best.expect("just set");
            return Ok(u);
        }
    }
    let (_, unitary, det, analytic) = best.expect("at least one start");
    Err(Error::SolverFailure {
        restarts: budget.starts,
        unitary,
        det,
        analytic,
    })
}
