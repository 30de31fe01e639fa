//! Iterative solvers for the symmetric positive-definite systems produced by
//! assembly: Jacobi-preconditioned conjugate gradients for linear solves and
//! projected Gauss-Seidel sweeps for bound-constrained quadratic minimization.

use super::sparse::{dot, norm2, SparseMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual `|b - Ax| / |b|`.
    pub tol: f64,
    /// Defaults to `50 * dim`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: None }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients started from `x0` (zero if absent).
pub fn conjugate_gradient(op: &SparseMatrix, rhs: &[f64], x0: Option<&[f64]>, opts: &CgOptions) -> Result<CgOutcome> {
    let n = op.dim();
    if rhs.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::MeshMismatch(format!("vector length does not match operator dimension {n}")));
    }
    let diag = op.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::SingularSystem(format!("non-positive diagonal {} at row {i}", diag[i])));
    }
    let max_iter = opts.max_iter.unwrap_or(50 * n.max(1));
    let b_norm = norm2(rhs);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { x, iterations: 0, relative_residual: 0.0 });
    }

    let mut r = op.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut rel = norm2(&r) / b_norm;
    if rel <= opts.tol {
        return Ok(CgOutcome { x, iterations: 0, relative_residual: rel });
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        op.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem(format!("search direction with p^T A p = {pap:e}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm2(&r) / b_norm;
        if rel <= opts.tol {
            return Ok(CgOutcome { x, iterations: it, relative_residual: rel });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: rel })
}

/// Solves `op x = rhs` to relative residual `tol`.
pub fn solve_spd(op: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    conjugate_gradient(op, rhs, None, &CgOptions { tol, max_iter: None }).map(|o| o.x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxOptions {
    /// Bound on the (scaled) KKT residual.
    pub tol: f64,
    /// Defaults to `100 * dim`.
    pub max_sweeps: Option<usize>,
    /// Relaxation factor in (0, 2); 1 is plain projected Gauss-Seidel.
    pub omega: f64,
    /// Residual component `i` is divided by `scale[i]` before comparison with
    /// `tol`.
    pub scale: Option<Vec<f64>>,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_sweeps: None, omega: 1.0, scale: None }
    }
}

/// Worst violations of the first-order conditions of
/// `min 1/2 x^T A x - b^T x` over `lower <= x <= upper`, with `r = A x - b`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KktReport {
    /// `max |r_i|` over free components.
    pub interior: f64,
    /// `max r_i` over components at their upper bound (admissible: `r_i <= 0`).
    pub upper: f64,
    /// `max -r_i` over components at their lower bound (admissible: `r_i >= 0`).
    pub lower: f64,
    pub free_count: usize,
    pub upper_count: usize,
    pub lower_count: usize,
}

impl KktReport {
    pub fn violation(&self) -> f64 {
        self.interior.max(self.upper).max(self.lower)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.violation() <= tol
    }
}

pub fn kkt_report(
    op: &SparseMatrix,
    rhs: &[f64],
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    scale: Option<&[f64]>,
) -> KktReport {
    let ax = op.mul_vec(x);
    let mut rep = KktReport::default();
    for i in 0..x.len() {
        let r = (ax[i] - rhs[i]) / scale.map_or(1.0, |s| s[i]);
        if lower[i] == upper[i] {
            continue;
        }
        if x[i] >= upper[i] {
            rep.upper = rep.upper.max(r);
            rep.upper_count += 1;
        } else if x[i] <= lower[i] {
            rep.lower = rep.lower.max(-r);
            rep.lower_count += 1;
        } else {
            rep.interior = rep.interior.max(r.abs());
            rep.free_count += 1;
        }
    }
    rep
}

#[derive(Debug, Clone)]
pub struct BoxOutcome {
    pub x: Vec<f64>,
    pub sweeps: usize,
    pub kkt: KktReport,
}

/// Minimizes `1/2 x^T A x - b^T x` subject to `lower <= x <= upper` by
/// projected (over-relaxed) Gauss-Seidel sweeps, started from `x0` clamped
/// into the box. Every coordinate update decreases the objective.
pub fn solve_box_constrained(
    op: &SparseMatrix,
    rhs: &[f64],
    lower: &[f64],
    upper: &[f64],
    x0: Option<&[f64]>,
    opts: &BoxOptions,
) -> Result<BoxOutcome> {
    let n = op.dim();
    if rhs.len() != n || lower.len() != n || upper.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::MeshMismatch(format!("vector length does not match operator dimension {n}")));
    }
    if let Some(i) = (0..n).find(|&i| !(lower[i] <= upper[i])) {
        return Err(Error::InfeasibleBounds { index: i, lower: lower[i], upper: upper[i] });
    }
    if !(opts.omega > 0.0 && opts.omega < 2.0) {
        return Err(Error::Validation {
            key: "omega".into(),
            message: format!("relaxation factor {} outside (0, 2)", opts.omega),
        });
    }
    let diag = op.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::SingularSystem(format!("non-positive diagonal {} at row {i}", diag[i])));
    }
    let scale = opts.scale.as_deref();
    let max_sweeps = opts.max_sweeps.unwrap_or(100 * n.max(1));
    let mut x: Vec<f64> = match x0 {
        Some(x0) => (0..n).map(|i| x0[i].clamp(lower[i], upper[i])).collect(),
        None => (0..n).map(|i| 0.0f64.clamp(lower[i], upper[i])).collect(),
    };

    let check_every = 5;
    let mut kkt = kkt_report(op, rhs, &x, lower, upper, scale);
    if kkt.holds(opts.tol) {
        return Ok(BoxOutcome { x, sweeps: 0, kkt });
    }
    let (cols, vals) = (op.cols(), op.vals());
    for sweep in 1..=max_sweeps {
        for i in 0..n {
            if lower[i] == upper[i] {
                x[i] = lower[i];
                continue;
            }
            let mut ax = 0.0;
            for k in op.row_range(i) {
                ax += vals[k] * x[cols[k]];
            }
            let step = (rhs[i] - ax) / diag[i];
            x[i] = (x[i] + opts.omega * step).clamp(lower[i], upper[i]);
        }
        if sweep % check_every == 0 || sweep == max_sweeps {
            kkt = kkt_report(op, rhs, &x, lower, upper, scale);
            if kkt.holds(opts.tol) {
                return Ok(BoxOutcome { x, sweeps: sweep, kkt });
            }
        }
    }
    Err(Error::NoConvergence { iterations: max_sweeps, residual: kkt.violation() })
}
