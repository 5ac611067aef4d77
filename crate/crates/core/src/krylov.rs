//! Conjugate gradients with the Galerkin (Lanczos) tridiagonal matrix.
//!
//! CG on a symmetric positive (semi)definite `A` implicitly runs Lanczos on
//! the Krylov space of the initial residual. With step lengths `α_k` and
//! direction updates `β_k = ‖r_{k+1}‖² / ‖r_k‖²`, the tridiagonal matrix `T`
//! has
//!
//! ```text
//! T[0,0]     = 1/α_0
//! T[k,k]     = 1/α_k + β_{k−1}/α_{k−1}
//! T[k,k+1]   = √β_k / α_k
//! ```
//!
//! Its extreme eigenvalues (Ritz values) converge to those of `A`, which
//! gives an operator-norm estimate for the normwise backward error at no
//! extra cost.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::operators::LinearMap;
use crate::vector::{axpy, dot, norm};

/// Interval between explicit residual recomputations.
pub const DRIFT_CHECK_INTERVAL: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop when `‖r‖ ≤ rel_tol ‖b‖`.
    pub rel_tol: f64,
    /// Stop when the normwise backward error drops below this value.
    pub backward_tol: Option<f64>,
    pub max_iters: usize,
}

impl CgOptions {
    pub fn residual(rel_tol: f64, max_iters: usize) -> Self {
        Self { rel_tol, backward_tol: None, max_iters }
    }

    pub fn backward(tol: f64, max_iters: usize) -> Self {
        Self { rel_tol: tol, backward_tol: Some(tol), max_iters }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    /// Relative residual below tolerance.
    ResidualConverged,
    /// Backward error below tolerance.
    BackwardErrorConverged,
    MaxIterations,
    /// `pᵀ A p ≤ 0`: the operator is singular along the search direction.
    Breakdown,
}

impl CgStatus {
    pub fn converged(self) -> bool {
        matches!(self, CgStatus::ResidualConverged | CgStatus::BackwardErrorConverged)
    }
}

/// One line of the solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgRecord {
    pub k: usize,
    pub residual: f64,
    /// NaN unless the solve stops on backward error.
    pub backward_error: f64,
    /// `½ xᵀ A x − bᵀ x`
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct CgState {
    pub iterate: Vec<f64>,
    pub residual: Vec<f64>,
    pub direction: Vec<f64>,
    /// Diagonal of the Galerkin tridiagonal matrix, one entry per iteration.
    pub tridiag_diag: Vec<f64>,
    /// Off-diagonal, one entry per iteration after the first.
    pub tridiag_offdiag: Vec<f64>,
    pub iterations: usize,
    /// `‖b‖`
    pub rhs_norm: f64,
    /// Largest relative gap seen between the recurrence residual and
    /// `b − A x` at drift checks.
    pub max_residual_drift: f64,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl CgState {
    pub fn residual_norm(&self) -> f64 {
        norm(&self.residual)
    }

    /// Largest Ritz value of the accumulated tridiagonal matrix.
    pub fn largest_ritz_value(&self) -> Option<f64> {
        largest_eigenvalue(&self.tridiag_diag, &self.tridiag_offdiag)
    }

    /// `η = ‖b − A x‖ / (‖A‖ ‖x‖ + ‖b‖)` with `‖A‖` the largest Ritz value.
    pub fn backward_error(&self) -> f64 {
        let a_norm = self.largest_ritz_value().unwrap_or(0.0);
        let denom = a_norm * norm(&self.iterate) + self.rhs_norm;
        if denom == 0.0 {
            0.0
        } else {
            self.residual_norm() / denom
        }
    }

    /// Appends the tridiagonal entries produced by the step with length
    /// `alpha` followed by direction update `beta`.
    fn push_coefficients(&mut self, alpha: f64, beta: f64) {
        let k = self.alphas.len();
        let diag = if k == 0 {
            1.0 / alpha
        } else {
            1.0 / alpha + self.betas[k - 1] / self.alphas[k - 1]
        };
        self.tridiag_diag.push(diag);
        if k > 0 {
            self.tridiag_offdiag.push(libm::sqrt(self.betas[k - 1]) / self.alphas[k - 1]);
        }
        self.alphas.push(alpha);
        self.betas.push(beta);
    }
}

/// Stop test on the normwise backward error; needs at least two iterations
/// of tridiagonal data.
pub fn backward_error_stop(state: &CgState, tol: f64) -> bool {
    state.iterations >= 2 && state.backward_error() <= tol
}

/// Solves `A x = b` for symmetric positive semidefinite `A` from `x0`.
///
/// `observe` is called once per iteration with the updated state.
pub fn conjugate_gradient<A: LinearMap + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    options: CgOptions,
    mut observe: impl FnMut(&CgState, &CgRecord),
) -> Result<(CgState, CgStatus)> {
    let n = a.in_dim();
    check_len(n, a.out_dim())?;
    check_len(n, b.len())?;
    let mut x = match x0 {
        Some(x0) => {
            check_len(n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut ap = vec![0.0; n];
    let mut r = b.to_vec();
    if x.iter().any(|v| *v != 0.0) {
        a.apply_into(&x, &mut ap);
        for (ri, api) in r.iter_mut().zip(&ap) {
            *ri -= api;
        }
    }
    let rhs_norm = norm(b);
    let mut state = CgState {
        iterate: Vec::new(),
        residual: r.clone(),
        direction: r,
        tridiag_diag: Vec::new(),
        tridiag_offdiag: Vec::new(),
        iterations: 0,
        rhs_norm,
        max_residual_drift: 0.0,
        alphas: Vec::new(),
        betas: Vec::new(),
    };
    core::mem::swap(&mut state.iterate, &mut x);

    let mut rr = dot(&state.residual, &state.residual);
    if libm::sqrt(rr) <= options.rel_tol * rhs_norm || rr == 0.0 {
        return Ok((state, CgStatus::ResidualConverged));
    }

    let mut status = CgStatus::MaxIterations;
    for k in 0..options.max_iters {
        a.apply_into(&state.direction, &mut ap);
        let pap = dot(&state.direction, &ap);
        if !(pap > 0.0) {
            status = CgStatus::Breakdown;
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &state.direction, &mut state.iterate);
        axpy(-alpha, &ap, &mut state.residual);
        let rr_next = dot(&state.residual, &state.residual);
        let beta = rr_next / rr;
        state.push_coefficients(alpha, beta);
        state.iterations = k + 1;

        if state.iterations.is_multiple_of(DRIFT_CHECK_INTERVAL) {
            a.apply_into(&state.iterate, &mut ap);
            let true_res: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
            let tn = norm(&true_res);
            let drift = (tn - libm::sqrt(rr_next)).abs() / tn.max(f64::MIN_POSITIVE);
            state.max_residual_drift = state.max_residual_drift.max(drift);
        }

        let residual = libm::sqrt(rr_next);
        let energy = -0.5
            * state.iterate.iter().zip(b.iter().zip(&state.residual)).map(|(x, (b, r))| x * (b + r)).sum::<f64>();
        // Ritz values cost O(k) bisection steps, so only track them when asked.
        let backward_error = if options.backward_tol.is_some() { state.backward_error() } else { f64::NAN };
        let record = CgRecord { k: state.iterations, residual, backward_error, energy };
        observe(&state, &record);

        if residual <= options.rel_tol * rhs_norm {
            status = CgStatus::ResidualConverged;
            break;
        }
        if let Some(tol) = options.backward_tol {
            if backward_error_stop(&state, tol) {
                status = CgStatus::BackwardErrorConverged;
                break;
            }
        }

        for (p, r) in state.direction.iter_mut().zip(&state.residual) {
            *p = r + beta * *p;
        }
        rr = rr_next;
    }
    Ok((state, status))
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly
/// below `x` (Sturm sequence count).
fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, d) in diag.iter().enumerate() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = d - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalue of index `idx` (ascending) of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], idx: usize) -> Option<f64> {
    let n = diag.len();
    if idx >= n || off.len() + 1 != n {
        return None;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(diag, off, mid) > idx {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn largest_eigenvalue(diag: &[f64], off: &[f64]) -> Option<f64> {
    tridiagonal_eigenvalue(diag, off, diag.len().checked_sub(1)?)
}
