//! Proximal point iteration for least squares.
//!
//! Each step solves
//!
//! ```text
//! x_{k+1} = argmin ½‖g − R x‖² + (ε/2)‖x‖² + 1/(2λ_k) ‖x − x_k‖²
//! ```
//!
//! i.e. the symmetric positive definite system
//! `(RᵀR + (ε + 1/λ_k) I) x = Rᵀg + x_k/λ_k`, by conjugate gradients warm
//! started at `x_k`. With `ε = 0` and `x_0 = 0` every step stays in
//! `range(Rᵀ)`, so the iterates converge to the minimum-norm least-squares
//! solution `R† g`; with `ε > 0` they converge to the Tikhonov solution
//! `(RᵀR + εI)⁻¹ Rᵀ g`. Convergence holds for any schedule with `Σ λ_k = ∞`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::krylov::{conjugate_gradient, CgOptions};
use crate::linalg::Matrix;
use crate::operators::LinearMap;
use crate::vector::{self, distance, dot, norm};

/// Step parameters `λ_k > 0`. All variants have a divergent sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSchedule {
    Constant(f64),
    /// `λ_k = λ0 / (k + 1)`.
    Harmonic { lambda0: f64 },
    /// `λ_k = max(λ0 ρ^k, λ_min)`: large early steps, then constant.
    GeometricFloor { lambda0: f64, ratio: f64, floor: f64 },
}

impl LambdaSchedule {
    /// Geometric decay from `λ0 = 100 / ‖R‖²` with `ρ = 0.7`, floored at
    /// `floor_scaled / ‖R‖²`.
    pub fn geometric_for_norm(operator_norm: f64, floor_scaled: f64) -> Self {
        let inv = 1.0 / (operator_norm * operator_norm).max(f64::MIN_POSITIVE);
        LambdaSchedule::GeometricFloor { lambda0: 100.0 * inv, ratio: 0.7, floor: floor_scaled * inv }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LambdaSchedule::Constant(l) => l > 0.0 && l.is_finite(),
            LambdaSchedule::Harmonic { lambda0 } => lambda0 > 0.0 && lambda0.is_finite(),
            LambdaSchedule::GeometricFloor { lambda0, ratio, floor } => {
                lambda0 > 0.0 && lambda0.is_finite() && ratio > 0.0 && ratio <= 1.0 && floor > 0.0 && floor.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid lambda schedule {self:?}")))
        }
    }

    /// `λ_k`, `k` counting from zero.
    pub fn lambda(&self, k: usize) -> f64 {
        match *self {
            LambdaSchedule::Constant(l) => l,
            LambdaSchedule::Harmonic { lambda0 } => lambda0 / (k as f64 + 1.0),
            LambdaSchedule::GeometricFloor { lambda0, ratio, floor } => {
                (lambda0 * libm::pow(ratio, k as f64)).max(floor)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerTolerances {
    /// Relative residual of the inner CG solve.
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxConfig {
    /// Tikhonov shift `ε ≥ 0`.
    pub epsilon: f64,
    /// Stop when `‖x_{k+1} − x_k‖ ≤ outer_tol (1 + ‖x_k‖)`.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl ProxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be finite and nonnegative"));
        }
        if !(self.outer_tol > 0.0 && self.outer_tol.is_finite() && self.inner_tol > 0.0 && self.inner_tol.is_finite()) {
            return Err(invalid("tolerances must be positive and finite"));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(invalid("iteration limits must be positive"));
        }
        Ok(())
    }

    pub fn inner(&self) -> InnerTolerances {
        InnerTolerances { tol: self.inner_tol, max_iters: self.max_inner }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxRecord {
    pub k: usize,
    pub lambda: f64,
    /// `F(x_k)`
    pub objective: f64,
    /// `‖x_k − x_{k−1}‖`
    pub step_norm: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxStatus {
    Converged,
    MaxOuterReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxTrace {
    /// `F(x_0)`
    pub initial_objective: f64,
    pub records: Vec<ProxRecord>,
    pub status: ProxStatus,
}

impl ProxTrace {
    /// Objective values `F(x_0), F(x_1), …`.
    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        core::iter::once(self.initial_objective).chain(self.records.iter().map(|r| r.objective))
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.records.iter().map(|r| r.inner_iterations).sum()
    }
}

/// `RᵀR + shift · I`
struct ShiftedNormal<'a, R: ?Sized> {
    r: &'a R,
    shift: f64,
}

impl<R: LinearMap + ?Sized> LinearMap for ShiftedNormal<'_, R> {
    fn in_dim(&self) -> usize {
        self.r.in_dim()
    }

    fn out_dim(&self) -> usize {
        self.r.in_dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut rx = vec![0.0; self.r.out_dim()];
        self.r.apply_into(x, &mut rx);
        self.r.adjoint_into(&rx, y);
        vector::axpy(self.shift, x, y);
    }

    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.apply_into(y, x);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxStep {
    pub x: Vec<f64>,
    pub inner_iterations: usize,
}

/// One proximal step; see the module documentation for the system solved.
pub fn prox_step<R: LinearMap + ?Sized>(
    r: &R,
    g: &[f64],
    x_k: &[f64],
    lambda: f64,
    epsilon: f64,
    inner: InnerTolerances,
) -> Result<ProxStep> {
    check_len(r.out_dim(), g.len())?;
    check_len(r.in_dim(), x_k.len())?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let mut rhs = r.adjoint(g)?;
    vector::axpy(1.0 / lambda, x_k, &mut rhs);
    let system = ShiftedNormal { r, shift: epsilon + 1.0 / lambda };
    let (state, status) =
        conjugate_gradient(&system, &rhs, Some(x_k), CgOptions::residual(inner.tol, inner.max_iters), |_, _| {})?;
    if !status.converged() {
        return Err(Error::InnerSolverFailed {
            iterations: state.iterations,
            residual: state.residual_norm() / state.rhs_norm.max(f64::MIN_POSITIVE),
        });
    }
    Ok(ProxStep { x: state.iterate, inner_iterations: state.iterations })
}

/// `h(f) = (I + λRᵀR)⁻¹ (f + λRᵀg)`, whose fixed points are the least-squares
/// solutions. Solved as the equivalent proximal step.
pub fn fixed_point_map<R: LinearMap + ?Sized>(
    r: &R,
    g: &[f64],
    lambda: f64,
    f: &[f64],
    inner: InnerTolerances,
) -> Result<Vec<f64>> {
    Ok(prox_step(r, g, f, lambda, 0.0, inner)?.x)
}

/// `½‖g − R x‖² + (ε/2)‖x‖²`
pub fn least_squares_objective<R: LinearMap + ?Sized>(r: &R, g: &[f64], x: &[f64], epsilon: f64) -> Result<f64> {
    let rx = r.forward(x)?;
    let res = distance(g, &rx);
    Ok(0.5 * res * res + 0.5 * epsilon * dot(x, x))
}

/// Proximal iteration from an arbitrary start, reporting each iterate to
/// `observe`. Reaching `max_outer` is a status, not an error, so a run can
/// be resumed from the returned point.
pub fn run_proximal<R: LinearMap + ?Sized>(
    r: &R,
    g: &[f64],
    x0: &[f64],
    schedule: LambdaSchedule,
    config: ProxConfig,
    mut observe: impl FnMut(&ProxRecord, &[f64]),
) -> Result<(Vec<f64>, ProxTrace)> {
    schedule.validate()?;
    config.validate()?;
    check_len(r.out_dim(), g.len())?;
    check_len(r.in_dim(), x0.len())?;
    let mut x = x0.to_vec();
    let initial_objective = least_squares_objective(r, g, &x, config.epsilon)?;
    let mut records = Vec::new();
    let mut status = ProxStatus::MaxOuterReached;
    for k in 0..config.max_outer {
        let lambda = schedule.lambda(k);
        let step = prox_step(r, g, &x, lambda, config.epsilon, config.inner())?;
        let step_norm = distance(&step.x, &x);
        let threshold = config.outer_tol * (1.0 + norm(&x));
        x = step.x;
        let record = ProxRecord {
            k: k + 1,
            lambda,
            objective: least_squares_objective(r, g, &x, config.epsilon)?,
            step_norm,
            inner_iterations: step.inner_iterations,
        };
        observe(&record, &x);
        records.push(record);
        if step_norm <= threshold {
            status = ProxStatus::Converged;
            break;
        }
    }
    Ok((x, ProxTrace { initial_objective, records, status }))
}

/// Approximates `R† g` by proximal iteration from zero. Requires `ε = 0`.
pub fn ppa_min_norm_lsq<R: LinearMap + ?Sized>(
    r: &R,
    g: &[f64],
    schedule: LambdaSchedule,
    config: ProxConfig,
) -> Result<(Vec<f64>, ProxTrace)> {
    if config.epsilon != 0.0 {
        return Err(invalid("minimum-norm iteration requires epsilon = 0"));
    }
    run_proximal(r, g, &vec![0.0; r.in_dim()], schedule, config, |_, _| {})
}

/// Approximates `(RᵀR + εI)⁻¹ Rᵀ g` by proximal iteration from zero. Requires `ε > 0`.
pub fn ppa_tikhonov<R: LinearMap + ?Sized>(
    r: &R,
    g: &[f64],
    schedule: LambdaSchedule,
    config: ProxConfig,
) -> Result<(Vec<f64>, ProxTrace)> {
    if !(config.epsilon > 0.0) {
        return Err(invalid("Tikhonov iteration requires epsilon > 0"));
    }
    run_proximal(r, g, &vec![0.0; r.in_dim()], schedule, config, |_, _| {})
}

/// Proximal iteration on `F(x) = ½ xᵀQx − bᵀx (+ (ε/2)‖x‖²)` for symmetric
/// positive semidefinite `Q`, with dense Cholesky steps.
pub fn ppa_quadratic(
    q: &Matrix,
    b: &[f64],
    x0: &[f64],
    schedule: LambdaSchedule,
    config: ProxConfig,
) -> Result<(Vec<f64>, ProxTrace)> {
    ppa_quadratic_with(q, b, x0, schedule, config, |_, _| {})
}

pub fn ppa_quadratic_with(
    q: &Matrix,
    b: &[f64],
    x0: &[f64],
    schedule: LambdaSchedule,
    config: ProxConfig,
    mut observe: impl FnMut(&ProxRecord, &[f64]),
) -> Result<(Vec<f64>, ProxTrace)> {
    schedule.validate()?;
    config.validate()?;
    let asym = q.asymmetry()?;
    if asym > 1e-12 * (1.0 + q.frobenius_norm()) {
        return Err(Error::NotSymmetric(asym));
    }
    check_len(q.rows(), b.len())?;
    check_len(q.rows(), x0.len())?;
    let objective = |x: &[f64]| -> f64 {
        let qx = q.matvec(x).expect("checked dimensions");
        0.5 * dot(x, &qx) - dot(b, x) + 0.5 * config.epsilon * dot(x, x)
    };
    let mut x = x0.to_vec();
    let initial_objective = objective(&x);
    let mut records = Vec::new();
    let mut status = ProxStatus::MaxOuterReached;
    for k in 0..config.max_outer {
        let lambda = schedule.lambda(k);
        let shift = config.epsilon + 1.0 / lambda;
        let mut system = q.clone();
        for i in 0..q.rows() {
            system[(i, i)] += shift;
        }
        let rhs: Vec<f64> = b.iter().zip(&x).map(|(bi, xi)| bi + xi / lambda).collect();
        let next = system.cholesky_solve(&rhs)?;
        let step_norm = distance(&next, &x);
        let threshold = config.outer_tol * (1.0 + norm(&x));
        x = next;
        let record = ProxRecord { k: k + 1, lambda, objective: objective(&x), step_norm, inner_iterations: 1 };
        observe(&record, &x);
        records.push(record);
        if step_norm <= threshold {
            status = ProxStatus::Converged;
            break;
        }
    }
    Ok((x, ProxTrace { initial_objective, records, status }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Identity, ZeroMap};

    const INNER: InnerTolerances = InnerTolerances { tol: 1e-14, max_iters: 100 };

    fn config(epsilon: f64) -> ProxConfig {
        ProxConfig { epsilon, outer_tol: 1e-13, max_outer: 200, inner_tol: 1e-14, max_inner: 100 }
    }

    #[test]
    fn identity_step_closed_form() {
        let a = [2.0, -4.0, 1.0];
        let step = prox_step(&Identity(3), &a, &[0.0; 3], 1.0, 0.0, INNER).unwrap();
        for (x, ai) in step.x.iter().zip(a) {
            assert!((x - ai / 2.0).abs() < 1e-14);
        }
        let xk = [1.0, 1.0, 1.0];
        let lambda = 3.0;
        let step = prox_step(&Identity(3), &a, &xk, lambda, 0.0, INNER).unwrap();
        for ((x, ai), xki) in step.x.iter().zip(a).zip(xk) {
            assert!((x - (xki + lambda * ai) / (1.0 + lambda)).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_data_zero_step() {
        let step = prox_step(&Identity(4), &[0.0; 4], &[0.0; 4], 2.0, 0.1, INNER).unwrap();
        assert_eq!(step.x, vec![0.0; 4]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(prox_step(&Identity(2), &[1.0, 1.0], &[0.0; 2], 0.0, 0.0, INNER).is_err());
        assert!(prox_step(&Identity(2), &[1.0, 1.0], &[0.0; 2], 1.0, -1.0, INNER).is_err());
        assert!(prox_step(&Identity(2), &[1.0], &[0.0; 2], 1.0, 0.0, INNER).is_err());
        assert!(LambdaSchedule::GeometricFloor { lambda0: 1.0, ratio: 1.5, floor: 0.1 }.validate().is_err());
        assert!(ppa_min_norm_lsq(&Identity(2), &[1.0, 1.0], LambdaSchedule::Constant(1.0), config(0.1)).is_err());
        assert!(ppa_tikhonov(&Identity(2), &[1.0, 1.0], LambdaSchedule::Constant(1.0), config(0.0)).is_err());
    }

    #[test]
    fn inner_failure_is_reported() {
        let m = Matrix::from_fn(6, 6, |i, j| if i == j { 10f64.powi(i as i32 - 3) } else { 0.0 });
        let err = prox_step(&m, &[1.0; 6], &[0.0; 6], 1e12, 0.0, InnerTolerances { tol: 1e-15, max_iters: 2 });
        assert!(matches!(err, Err(Error::InnerSolverFailed { iterations: 2, .. })));
    }

    #[test]
    fn schedules() {
        let s = LambdaSchedule::GeometricFloor { lambda0: 10.0, ratio: 0.5, floor: 1.0 };
        assert_eq!(s.lambda(0), 10.0);
        assert_eq!(s.lambda(1), 5.0);
        assert_eq!(s.lambda(10), 1.0);
        assert_eq!(LambdaSchedule::Harmonic { lambda0: 6.0 }.lambda(2), 2.0);
    }

    #[test]
    fn zero_operator_stays_at_origin() {
        let r = ZeroMap { in_dim: 3, out_dim: 4 };
        let (x, trace) = ppa_min_norm_lsq(&r, &[1.0, 2.0, 3.0, 4.0], LambdaSchedule::Constant(1.0), config(0.0)).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(trace.status, ProxStatus::Converged);
    }

    #[test]
    fn tikhonov_identity_limit() {
        let g = [2.0, 4.0];
        let (x, trace) = ppa_tikhonov(&Identity(2), &g, LambdaSchedule::Constant(10.0), config(1.0)).unwrap();
        assert_eq!(trace.status, ProxStatus::Converged);
        assert!((x[0] - 1.0).abs() < 1e-11 && (x[1] - 2.0).abs() < 1e-11);
    }

    #[test]
    fn quadratic_closed_form_iterates() {
        let a = [1.0, -2.0];
        let mut seen = Vec::new();
        let cfg = ProxConfig { max_outer: 5, ..config(0.0) };
        let (_, trace) =
            ppa_quadratic_with(&Matrix::identity(2), &a, &[0.0; 2], LambdaSchedule::Constant(1.0), cfg, |rec, x| {
                seen.push((rec.k, x.to_vec()))
            })
            .unwrap();
        assert_eq!(trace.status, ProxStatus::MaxOuterReached);
        for (k, x) in seen {
            let factor = 1.0 - libm::pow(2.0, -(k as f64));
            assert!((x[0] - a[0] * factor).abs() < 1e-15);
            assert!((x[1] - a[1] * factor).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_zero_is_stationary() {
        let x0 = [0.3, -0.7, 2.0];
        let (x, trace) =
            ppa_quadratic(&Matrix::zeros(3, 3), &[0.0; 3], &x0, LambdaSchedule::Constant(1.0), config(0.0)).unwrap();
        assert_eq!(x, x0.to_vec());
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn quadratic_rejects_asymmetric() {
        let q = Matrix::from_row_major(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(
            ppa_quadratic(&q, &[0.0; 2], &[0.0; 2], LambdaSchedule::Constant(1.0), config(0.0)),
            Err(Error::NotSymmetric(_))
        ));
    }
}
