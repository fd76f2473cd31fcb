//! Unitary completion of lattice polynomial row data.
//!
//! The input is the bottom row `(zeta_1, ..., zeta_{m-1}, f_plus)` of a matrix
//! `F` that otherwise agrees with the identity: `zeta_i` live on the
//! nonpositive lattice `{-N tau, ..., 0}`, `f_plus` on the nonnegative one.
//! The output is a matrix `U`, unitary at every point with constant
//! determinant one, whose first `m - 1` rows are analytic lattice polynomials
//! and whose last row is the bar-conjugate of such polynomials, making `F U`
//! analytic.
//!
//! The construction runs in two stages. The analyticity requirement is exactly
//! linear in the coefficients of one column of `U` (after splitting real and
//! imaginary parts; the last row enters conjugated), and the same system
//! governs every column, so stage one assembles that system and an orthonormal
//! basis of its solution space. Stage two searches the solution space for `m`
//! columns forming a pointwise unitary matrix with unit determinant: the
//! unitarity and determinant targets become a square-residual system on the
//! Laurent coefficients of the column Gram functions and of `det U`, minimized
//! by Levenberg-Marquardt with a continuation ladder in the size of `zeta`
//! and seeded restarts. Solutions are non-unique (any constant right unitary
//! multiple with determinant one works); callers must compare factors only up
//! to that freedom.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trigpoly::TrigPoly;

/// Tuning knobs for [`solve_completion`].
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Pointwise unitarity tolerance, max over the check grid of
    /// `|U U* - I|_F`.
    pub tol_unitary: f64,
    /// Determinant tolerance, max over the check grid of `|det U - 1|`.
    pub tol_det: f64,
    /// Analyticity tolerance, relative to the sup of `|F|_F`.
    pub tol_analytic: f64,
    /// Relative corner threshold: the constant coefficient of `f_plus` must
    /// exceed `eps_c0_rel * |f_plus|`.
    pub eps_c0_rel: f64,
    /// Levenberg-Marquardt iteration budget per restart and ladder rung.
    pub max_iters: usize,
    /// Number of seeded restarts before giving up.
    pub restarts: usize,
    /// RNG seed for restart perturbations.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_unitary: 1e-8,
            tol_det: 1e-8,
            tol_analytic: 1e-8,
            eps_c0_rel: 1e-10,
            max_iters: 200,
            restarts: 8,
            seed: 0,
        }
    }
}

/// Row data to complete: `m - 1` co-analytic entries and the analytic corner.
#[derive(Debug, Clone)]
pub struct CompletionProblem {
    m: usize,
    tau: f64,
    n_degree: usize,
    zeta: Vec<TrigPoly>,
    f_plus: TrigPoly,
    atom: bool,
}

impl CompletionProblem {
    /// Validates classes and lattice membership. `zeta` must have `m - 1`
    /// entries on `{-N tau, ..., 0}`; `f_plus` must live on `{0, ..., N tau}`.
    pub fn new(
        m: usize,
        tau: f64,
        n_degree: usize,
        zeta: Vec<TrigPoly>,
        f_plus: TrigPoly,
        atom: bool,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::UnsupportedSize("matrix size zero".into()));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Validation(format!("tau = {tau} must be positive")));
        }
        if zeta.len() != m - 1 {
            return Err(Error::Validation(format!(
                "expected {} zeta entries, got {}",
                m - 1,
                zeta.len()
            )));
        }
        for (i, z) in zeta.iter().enumerate() {
            if !z.is_minus_class() {
                return Err(Error::Validation(format!(
                    "zeta[{i}] has positive-frequency content"
                )));
            }
            let (lo, _) = z.lattice_coeffs(tau)?;
            if lo < -(n_degree as i64) {
                return Err(Error::Validation(format!(
                    "zeta[{i}] reaches lattice index {lo}, below -{n_degree}"
                )));
            }
        }
        if !f_plus.is_plus_class() {
            return Err(Error::Validation(
                "f_plus has negative-frequency content".into(),
            ));
        }
        let (lo, coeffs) = f_plus.lattice_coeffs(tau)?;
        if lo + coeffs.len() as i64 - 1 > n_degree as i64 {
            return Err(Error::Validation(format!(
                "f_plus reaches lattice index {}, above {n_degree}",
                lo + coeffs.len() as i64 - 1
            )));
        }
        Ok(CompletionProblem {
            m,
            tau,
            n_degree,
            zeta,
            f_plus,
            atom,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_degree(&self) -> usize {
        self.n_degree
    }

    pub fn zeta(&self) -> &[TrigPoly] {
        &self.zeta
    }

    pub fn f_plus(&self) -> &TrigPoly {
        &self.f_plus
    }

    /// True when the represented bottom row carries a common interval atom
    /// factor. The completion itself acts on the modulation polynomials, so
    /// the flag only matters to consumers assembling the represented matrix.
    pub fn atom(&self) -> bool {
        self.atom
    }

    /// Dense coefficients of `zeta[i]` indexed by lattice depth: entry `k`
    /// multiplies `e^{-i k tau x}`.
    fn zeta_depth_coeffs(&self, i: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_degree + 1];
        let (lo, dense) = self.zeta[i].lattice_coeffs(self.tau).expect("validated");
        for (offset, c) in dense.iter().enumerate() {
            let k = -(lo + offset as i64);
            out[k as usize] = *c;
        }
        out
    }

    /// Dense coefficients of `f_plus`: entry `q` multiplies `e^{i q tau x}`.
    fn corner_coeffs(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_degree + 1];
        let (lo, dense) = self.f_plus.lattice_coeffs(self.tau).expect("validated");
        for (offset, c) in dense.iter().enumerate() {
            out[(lo + offset as i64) as usize] = *c;
        }
        out
    }

    /// Bottom row of `F` evaluated at `x` (without the atom factor).
    fn bottom_row_at(&self, x: f64) -> Vec<Complex64> {
        let mut row: Vec<Complex64> = self.zeta.iter().map(|z| z.eval(x)).collect();
        row.push(self.f_plus.eval(x));
        row
    }

    /// Sup over the check grid of the Frobenius norm of `F`.
    fn f_norm(&self) -> f64 {
        let points = 8 * (self.n_degree + 1);
        let mut worst = 0.0f64;
        for p in 0..points {
            let x = 2.0 * std::f64::consts::PI * p as f64 / (self.tau * points as f64);
            let row = self.bottom_row_at(x);
            let mut sq = (self.m - 1) as f64;
            for v in row {
                sq += v.norm_sqr();
            }
            worst = worst.max(sq.sqrt());
        }
        worst
    }
}

/// The real-linear analyticity constraints for one column of `U`, with an
/// orthonormal basis of their solution space.
///
/// Unknown layout: stored row `i` of `U`, lattice coefficient `k`, real part
/// at `2 (i (N+1) + k)`, imaginary part one slot later. The stored last row
/// appears bar-conjugated in the represented matrix, which is what makes the
/// constraints real-linear in the stored coefficients.
#[derive(Debug, Clone)]
pub struct AnalyticitySystem {
    pub constraints: DMatrix<f64>,
    pub basis: DMatrix<f64>,
    pub m: usize,
    pub n_coeffs: usize,
}

impl AnalyticitySystem {
    /// Number of free real parameters per column.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Assembles the per-column analyticity system: for each lattice depth
/// `s = 1..N`, the coefficient of `e^{-i s tau x}` in
/// `sum_i zeta_i u_i + f_plus conj_bar(u_last)` must vanish.
pub fn build_analyticity_system(p: &CompletionProblem) -> Result<AnalyticitySystem> {
    let m = p.m;
    let nc = p.n_degree + 1;
    let unknowns = 2 * m * nc;
    let rows = 2 * p.n_degree;
    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let corner = p.corner_coeffs();
    let base = |i: usize, k: usize| 2 * (i * nc + k);

    for s in 1..=p.n_degree {
        let re_row = 2 * (s - 1);
        let im_row = re_row + 1;
        for i in 0..m - 1 {
            let z = p.zeta_depth_coeffs(i);
            for k in 0..=(p.n_degree - s) {
                let zc = z[k + s];
                let b = base(i, k);
                // (z_re + i z_im)(alpha + i beta)
                a[(re_row, b)] += zc.re;
                a[(re_row, b + 1)] -= zc.im;
                a[(im_row, b)] += zc.im;
                a[(im_row, b + 1)] += zc.re;
            }
        }
        for q in 0..=(p.n_degree - s) {
            let cc = corner[q];
            let b = base(m - 1, q + s);
            // (c_re + i c_im)(gamma - i delta)
            a[(re_row, b)] += cc.re;
            a[(re_row, b + 1)] += cc.im;
            a[(im_row, b)] += cc.im;
            a[(im_row, b + 1)] -= cc.re;
        }
    }

    // Null basis from the spectral decomposition of A^T A; the eigenvector
    // matrix is orthogonal, so near-zero eigenpairs give an orthonormal basis.
    let gram = a.transpose() * &a;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-12 * max_ev.max(1e-300);
    let mut cols = Vec::new();
    for (idx, ev) in eig.eigenvalues.iter().enumerate() {
        if *ev <= tol {
            cols.push(eig.eigenvectors.column(idx).into_owned());
        }
    }
    let mut basis = DMatrix::<f64>::zeros(unknowns, cols.len());
    for (c, v) in cols.iter().enumerate() {
        basis.set_column(c, v);
    }
    Ok(AnalyticitySystem {
        constraints: a,
        basis,
        m,
        n_coeffs: nc,
    })
}

/// Matrix of analytic lattice polynomials; the represented function applies
/// bar-conjugation to the stored last row.
#[derive(Debug, Clone)]
pub struct UnitaryPolyMatrix {
    m: usize,
    tau: f64,
    n_degree: usize,
    /// Stored rows; all entries on the nonnegative lattice.
    entries: Vec<Vec<TrigPoly>>,
}

impl UnitaryPolyMatrix {
    pub fn new(m: usize, tau: f64, n_degree: usize, entries: Vec<Vec<TrigPoly>>) -> Result<Self> {
        if entries.len() != m || entries.iter().any(|r| r.len() != m) {
            return Err(Error::Validation("entry grid is not m by m".into()));
        }
        for row in &entries {
            for e in row {
                if !e.is_plus_class() {
                    return Err(Error::Validation(
                        "stored entries must be analytic lattice polynomials".into(),
                    ));
                }
            }
        }
        Ok(UnitaryPolyMatrix {
            m,
            tau,
            n_degree,
            entries,
        })
    }

    pub fn identity(m: usize, tau: f64, n_degree: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let entries = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i == j {
                            TrigPoly::constant(one)
                        } else {
                            TrigPoly::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        UnitaryPolyMatrix {
            m,
            tau,
            n_degree,
            entries,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_degree(&self) -> usize {
        self.n_degree
    }

    /// Stored (analytic) entry at `(i, j)`.
    pub fn stored(&self, i: usize, j: usize) -> &TrigPoly {
        &self.entries[i][j]
    }

    /// Entry of the represented matrix: stored entry for rows above the last,
    /// bar-conjugate on the last row.
    pub fn represented(&self, i: usize, j: usize) -> TrigPoly {
        if i + 1 == self.m {
            self.entries[i][j].conj_bar()
        } else {
            self.entries[i][j].clone()
        }
    }

    /// Pointwise value of the represented matrix.
    pub fn eval(&self, x: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.m, self.m, |i, j| {
            let v = self.entries[i][j].eval(x);
            if i + 1 == self.m {
                v.conj()
            } else {
                v
            }
        })
    }
}

/// Residuals of a candidate completion: pointwise unitarity defect, pointwise
/// determinant defect, and the largest negative-lattice coefficient norm
/// across the bottom row of `F U` (unnormalized; compare against
/// `tol * |F|`).
#[derive(Debug, Clone, Copy)]
pub struct ResidualTriple {
    pub unitarity: f64,
    pub det: f64,
    pub analyticity: f64,
}

/// Measures the three contract residuals on a dense grid of
/// `8 (N + 1)` points per lattice period.
pub fn completion_residuals(p: &CompletionProblem, u: &UnitaryPolyMatrix) -> ResidualTriple {
    let points = 8 * (p.n_degree + 1);
    let mut unitarity = 0.0f64;
    let mut det = 0.0f64;
    for q in 0..points {
        let x = 2.0 * std::f64::consts::PI * q as f64 / (p.tau * points as f64);
        let m = u.eval(x);
        let gram = &m * m.adjoint();
        let mut defect = 0.0;
        for i in 0..p.m {
            for j in 0..p.m {
                let target = if i == j { 1.0 } else { 0.0 };
                defect += (gram[(i, j)] - Complex64::new(target, 0.0)).norm_sqr();
            }
        }
        unitarity = unitarity.max(defect.sqrt());
        let d = m.lu().determinant();
        det = det.max((d - Complex64::new(1.0, 0.0)).norm());
    }

    let mut analyticity = 0.0f64;
    for j in 0..p.m {
        let mut entry = p.f_plus.mul(&u.stored(p.m - 1, j).conj_bar());
        for i in 0..p.m - 1 {
            entry = entry.add(&p.zeta[i].mul(u.stored(i, j)));
        }
        let neg_norm: f64 = entry
            .terms()
            .iter()
            .filter(|(w, _)| *w < -0.5 * p.tau)
            .map(|(_, c)| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        analyticity = analyticity.max(neg_norm);
    }
    ResidualTriple {
        unitarity,
        det,
        analyticity,
    }
}

/// Internal solver state: per-column coefficient vectors reconstructed from
/// the nullspace coordinates.
struct Objective<'a> {
    p: &'a CompletionProblem,
    sys: &'a AnalyticitySystem,
    /// Determinant sampling size, a power of two at least the Laurent band.
    det_points: usize,
}

impl<'a> Objective<'a> {
    fn new(p: &'a CompletionProblem, sys: &'a AnalyticitySystem) -> Self {
        let band = p.m * p.n_degree + 1;
        let det_points = band.next_power_of_two().max(8);
        Objective { p, sys, det_points }
    }

    fn n_coeffs(&self) -> usize {
        self.sys.n_coeffs
    }

    fn params_per_column(&self) -> usize {
        self.sys.dim()
    }

    /// Complex coefficient `a_i[k]` of stored row `i` in column `col`.
    fn coeff(&self, cols: &DMatrix<f64>, col: usize, i: usize, k: usize) -> Complex64 {
        let b = 2 * (i * self.n_coeffs() + k);
        Complex64::new(cols[(b, col)], cols[(b + 1, col)])
    }

    /// Expands nullspace coordinates into per-column real coefficient vectors.
    fn expand(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let d = self.params_per_column();
        let mut cols = DMatrix::<f64>::zeros(2 * self.p.m * self.n_coeffs(), self.p.m);
        for j in 0..self.p.m {
            let slice = theta.rows(j * d, d);
            let coeffs = &self.sys.basis * slice;
            cols.set_column(j, &coeffs);
        }
        cols
    }

    /// Laurent coefficients of the column Gram function
    /// `(U^* U)_{jl} = sum_{i<m-1} conj(u_{ij}) u_{il} + u_{m-1,j} conj(u_{m-1,l})`
    /// at lattice offsets `-N..N`.
    fn gram_coeffs(&self, cols: &DMatrix<f64>, j: usize, l: usize) -> Vec<Complex64> {
        let n = self.p.n_degree as i64;
        let nc = self.n_coeffs();
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * self.p.n_degree + 1];
        for k in -n..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..self.p.m - 1 {
                for q in 0..nc as i64 {
                    let qk = q + k;
                    if (0..nc as i64).contains(&qk) {
                        acc += self.coeff(cols, j, i, q as usize).conj()
                            * self.coeff(cols, l, i, qk as usize);
                    }
                }
            }
            let last = self.p.m - 1;
            for q in 0..nc as i64 {
                let qk = q + k;
                if (0..nc as i64).contains(&qk) {
                    acc += self.coeff(cols, j, last, qk as usize)
                        * self.coeff(cols, l, last, q as usize).conj();
                }
            }
            out[(k + n) as usize] = acc;
        }
        out
    }

    /// Laurent coefficients of `det U` over `-N .. (m-1) N`, recovered from
    /// pointwise samples at roots of unity; the band fits inside the sample
    /// count, so the wrapped spectrum is recovered exactly.
    fn det_coeffs(&self, cols: &DMatrix<f64>) -> Vec<Complex64> {
        let m = self.p.m;
        let nc = self.n_coeffs();
        let pts = self.det_points;
        let mut samples = Vec::with_capacity(pts);
        for s in 0..pts {
            let angle = 2.0 * std::f64::consts::PI * s as f64 / pts as f64;
            let mut mat = DMatrix::<Complex64>::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    let mut v = Complex64::new(0.0, 0.0);
                    for k in 0..nc {
                        v += self.coeff(cols, j, i, k) * Complex64::from_polar(1.0, angle * k as f64);
                    }
                    if i + 1 == m {
                        v = v.conj();
                    }
                    mat[(i, j)] = v;
                }
            }
            samples.push(mat.lu().determinant());
        }
        let n = self.p.n_degree as i64;
        let band = (m - 1) as i64 * n;
        let mut out = Vec::with_capacity((band + n + 1) as usize);
        for nu in -n..=band {
            let bin = nu.rem_euclid(pts as i64);
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..pts {
                let angle = -2.0 * std::f64::consts::PI * (bin * s as i64) as f64 / pts as f64;
                acc += samples[s] * Complex64::from_polar(1.0, angle);
            }
            out.push(acc / pts as f64);
        }
        out
    }

    /// Stacked real residual vector: Gram coefficients against
    /// `delta_{jl}` at offset zero, then determinant coefficients against one
    /// at offset zero.
    fn residuals(&self, theta: &DVector<f64>) -> DVector<f64> {
        let cols = self.expand(theta);
        let m = self.p.m;
        let n = self.p.n_degree;
        let mut r = Vec::new();
        for j in 0..m {
            for l in j..m {
                let g = self.gram_coeffs(&cols, j, l);
                for (idx, c) in g.iter().enumerate() {
                    let target = if j == l && idx == n { 1.0 } else { 0.0 };
                    r.push(c.re - target);
                    r.push(c.im);
                }
            }
        }
        for (idx, c) in self.det_coeffs(&cols).iter().enumerate() {
            let target = if idx == n { 1.0 } else { 0.0 };
            r.push(c.re - target);
            r.push(c.im);
        }
        DVector::from_vec(r)
    }

    /// Central-difference Jacobian; the system is small and smooth, so the
    /// quadratic truncation error stays far below the solve tolerances.
    fn jacobian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let n_res = self.residuals(theta).len();
        let mut jac = DMatrix::<f64>::zeros(n_res, theta.len());
        let mut probe = theta.clone();
        for c in 0..theta.len() {
            let h = 1e-6 * theta[c].abs().max(1.0);
            let orig = probe[c];
            probe[c] = orig + h;
            let plus = self.residuals(&probe);
            probe[c] = orig - h;
            let minus = self.residuals(&probe);
            probe[c] = orig;
            let col = (plus - minus) / (2.0 * h);
            jac.set_column(c, &col);
        }
        jac
    }
}

/// Levenberg-Marquardt descent on the stacked residuals. Returns the best
/// parameters found and their residual sum of squares.
fn levenberg_marquardt(
    obj: &Objective,
    start: DVector<f64>,
    max_iters: usize,
    target: f64,
) -> (DVector<f64>, f64) {
    let mut theta = start;
    let mut r = obj.residuals(&theta);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..max_iters {
        if cost.sqrt() <= target {
            break;
        }
        let jac = obj.jacobian(&theta);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut stepped = false;
        for _ in 0..12 {
            let mut damped = jtj.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            if let Some(chol) = Cholesky::new(damped) {
                let delta = chol.solve(&(-&jtr));
                let candidate = &theta + &delta;
                let r_new = obj.residuals(&candidate);
                let cost_new = r_new.norm_squared();
                if cost_new < cost {
                    theta = candidate;
                    r = r_new;
                    cost = cost_new;
                    lambda = (lambda * 0.33).max(1e-14);
                    stepped = true;
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !stepped {
            break;
        }
    }
    (theta, cost)
}

/// Builds the represented matrix from solved coordinates.
fn matrix_from_theta(
    p: &CompletionProblem,
    sys: &AnalyticitySystem,
    theta: &DVector<f64>,
) -> UnitaryPolyMatrix {
    let obj = Objective::new(p, sys);
    let cols = obj.expand(theta);
    let nc = sys.n_coeffs;
    let entries: Vec<Vec<TrigPoly>> = (0..p.m)
        .map(|i| {
            (0..p.m)
                .map(|j| {
                    let coeffs: Vec<Complex64> =
                        (0..nc).map(|k| obj.coeff(&cols, j, i, k)).collect();
                    TrigPoly::from_lattice(p.tau, 0, &coeffs)
                })
                .collect()
        })
        .collect();
    UnitaryPolyMatrix {
        m: p.m,
        tau: p.tau,
        n_degree: p.n_degree,
        entries,
    }
}

/// Projection of the identity matrix onto the analyticity solution space,
/// used as the ladder starting point.
fn identity_start(p: &CompletionProblem, sys: &AnalyticitySystem) -> DVector<f64> {
    let nc = sys.n_coeffs;
    let d = sys.dim();
    let mut theta = DVector::<f64>::zeros(p.m * d);
    for j in 0..p.m {
        let mut target = DVector::<f64>::zeros(2 * p.m * nc);
        // Column j of the identity: stored coefficient a_j[0] = 1. The last
        // row is stored pre-conjugation, and conj(1) = 1.
        target[2 * (j * nc)] = 1.0;
        let coords = sys.basis.transpose() * target;
        theta.rows_mut(j * d, d).copy_from(&coords);
    }
    theta
}

/// Completes the row data to a unitary matrix with constant determinant one
/// and analytic `F U`.
///
/// The ladder solves with `zeta` scaled by 1/4, 1/2, 3/4, 1, warm-starting
/// each rung; restarts perturb the starting point deterministically from the
/// seed. Residual targets follow the config; failure reports the best
/// residuals seen.
pub fn solve_completion(p: &CompletionProblem, cfg: &SolverConfig) -> Result<UnitaryPolyMatrix> {
    let c0 = p.corner_coeffs()[0].norm();
    let threshold = cfg.eps_c0_rel * p.f_plus.coeff_norm();
    if c0 < threshold {
        return Err(Error::DegenerateCorner {
            c0_abs: c0,
            threshold,
        });
    }
    if p.zeta.iter().all(|z| z.is_zero()) {
        return Ok(UnitaryPolyMatrix::identity(p.m, p.tau, p.n_degree));
    }
    if p.m == 1 {
        // A 1x1 completion with det U = 1 is the constant 1, and F U = f_plus
        // is analytic by assumption.
        return Ok(UnitaryPolyMatrix::identity(1, p.tau, p.n_degree));
    }

    let f_norm = p.f_norm();
    // The LM target undershoots the contract tolerances; coefficient-domain
    // residuals bound the pointwise ones only up to a lattice-size factor.
    let margin = 4.0 * ((p.n_degree + 1) as f64).sqrt() * (p.m as f64);
    let target = cfg
        .tol_unitary
        .min(cfg.tol_det)
        .min(cfg.tol_analytic * f_norm)
        / margin;

    let ladder = [0.25, 0.5, 0.75, 1.0];
    let mut best: Option<(ResidualTriple, UnitaryPolyMatrix)> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for restart in 0..cfg.restarts.max(1) {
        let mut warm: Option<DVector<f64>> = None;
        let mut final_theta: Option<(DVector<f64>, AnalyticitySystem)> = None;
        for scale in ladder {
            let scaled = CompletionProblem {
                m: p.m,
                tau: p.tau,
                n_degree: p.n_degree,
                zeta: p.zeta.iter().map(|z| z.scale(scale.into())).collect(),
                f_plus: p.f_plus.clone(),
                atom: p.atom,
            };
            let sys = build_analyticity_system(&scaled)?;
            let mut start = match &warm {
                // Coefficients carry over between rungs; coordinates do not,
                // because each rung has its own basis.
                Some(theta_prev) => theta_prev.clone(),
                None => identity_start(&scaled, &sys),
            };
            if restart > 0 && warm.is_none() {
                let sigma = 0.25 * (restart as f64) / cfg.restarts as f64 + 0.25;
                for v in start.iter_mut() {
                    *v += sigma * (rng.gen::<f64>() - 0.5);
                }
            }
            let obj = Objective::new(&scaled, &sys);
            let (theta, _) = levenberg_marquardt(&obj, start, cfg.max_iters, target);
            warm = Some(theta.clone());
            if scale == 1.0 {
                final_theta = Some((theta, sys));
            }
        }
        if let Some((theta, sys)) = final_theta {
            let candidate = matrix_from_theta(p, &sys, &theta);
            let res = completion_residuals(p, &candidate);
            let ok = res.unitarity <= cfg.tol_unitary
                && res.det <= cfg.tol_det
                && res.analyticity <= cfg.tol_analytic * f_norm;
            let better = match &best {
                None => true,
                Some((b, _)) => {
                    res.unitarity + res.det + res.analyticity < b.unitarity + b.det + b.analyticity
                }
            };
            if better {
                best = Some((res, candidate));
            }
            if ok {
                return Ok(best.take().expect("just set").1);
            }
        }
        let _ = restart;
    }
    let (res, _) = best.expect("at least one restart ran");
    Err(Error::SolverFailure {
        restarts: cfg.restarts,
        unitary: res.unitarity,
        det: res.det,
        analytic: res.analyticity,
    })
}
