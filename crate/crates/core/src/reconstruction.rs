//! Variational reconstruction and the filtered back-projection baseline.
//!
//! The reconstruction minimizes
//!
//! ```text
//! ½‖g̃ − R f‖² + (α/2)‖H f‖²,   H = I − C
//! ```
//!
//! through its normal equations `(RᵀR + α H²) f = Rᵀ g̃`, solved by conjugate
//! gradients with a normwise backward-error stop. With the positivity flag
//! the same quadratic is minimized over `f ≥ 0` by projected gradient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::fourier::{hann_window, nyquist_frequency, Dft};
use crate::krylov::{conjugate_gradient, CgOptions, CgRecord, CgState, CgStatus};
use crate::operators::{operator_norm_estimate, GeometryConfig, ImageGrid, LinearMap, RadonProjector, Sinogram};
use crate::rng::{CounterRng, RngCursor};
use crate::vector::{self, distance, dot, norm};

pub use crate::krylov::backward_error_stop;

const PROBES: usize = 3;
const PROBE_TOL: f64 = 1e-10;

pub struct ReconProblem<'a> {
    pub projector: &'a dyn LinearMap,
    pub mollifier: &'a dyn LinearMap,
    pub highpass: &'a dyn LinearMap,
    pub alpha: f64,
    /// Preprocessed or raw sinogram values.
    pub data: &'a [f64],
    pub positivity: bool,
}

impl<'a> ReconProblem<'a> {
    /// Builds and validates a problem with positivity off.
    pub fn new(
        projector: &'a dyn LinearMap,
        mollifier: &'a dyn LinearMap,
        highpass: &'a dyn LinearMap,
        alpha: f64,
        data: &'a [f64],
    ) -> Result<Self> {
        let problem = Self { projector, mollifier, highpass, alpha, data, positivity: false };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_positivity(mut self, positivity: bool) -> Self {
        self.positivity = positivity;
        self
    }

    /// Checks dimensions, `α > 0` and `H = I − C` on seeded random probes.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        let n = self.projector.in_dim();
        check_len(self.projector.out_dim(), self.data.len())?;
        for map in [self.mollifier, self.highpass] {
            check_len(n, map.in_dim())?;
            check_len(n, map.out_dim())?;
        }
        if !vector::all_finite(self.data) {
            return Err(Error::NonFinite("reconstruction data"));
        }
        let mut cursor = RngCursor::new(CounterRng::new(0).stream("highpass-probe"));
        let mut cx = vec![0.0; n];
        let mut hx = vec![0.0; n];
        for _ in 0..PROBES {
            let x: Vec<f64> = (0..n).map(|_| cursor.normal()).collect();
            self.mollifier.apply_into(&x, &mut cx);
            self.highpass.apply_into(&x, &mut hx);
            let gap = x.iter().zip(&cx).zip(&hx).map(|((x, c), h)| (x - c - h) * (x - c - h)).sum::<f64>();
            if libm::sqrt(gap) > PROBE_TOL * norm(&x) {
                return Err(invalid("highpass operator is not identity minus mollifier"));
            }
        }
        Ok(())
    }

    /// `Rᵀ g̃`
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.projector.in_dim()];
        self.projector.adjoint_into(self.data, &mut b);
        b
    }

    pub fn normal_operator(&self) -> NormalOperator<'_, 'a> {
        NormalOperator { problem: self }
    }

    /// `½‖g̃ − R f‖² + (α/2)‖H f‖²`
    pub fn objective(&self, f: &[f64]) -> Result<f64> {
        let rf = self.projector.forward(f)?;
        let hf = self.highpass.forward(f)?;
        let res = distance(self.data, &rf);
        Ok(0.5 * res * res + 0.5 * self.alpha * dot(&hf, &hf))
    }
}

/// `RᵀR + α HᵀH`, with `Hᵀ = H`.
pub struct NormalOperator<'p, 'a> {
    problem: &'p ReconProblem<'a>,
}

impl LinearMap for NormalOperator<'_, '_> {
    fn in_dim(&self) -> usize {
        self.problem.projector.in_dim()
    }

    fn out_dim(&self) -> usize {
        self.in_dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let p = self.problem;
        let mut rx = vec![0.0; p.projector.out_dim()];
        p.projector.apply_into(x, &mut rx);
        p.projector.adjoint_into(&rx, y);
        let mut hx = vec![0.0; x.len()];
        let mut hhx = vec![0.0; x.len()];
        p.highpass.apply_into(x, &mut hx);
        p.highpass.adjoint_into(&hx, &mut hhx);
        vector::axpy(p.alpha, &hhx, y);
    }

    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.apply_into(y, x);
    }
}

pub fn normal_operator_apply(problem: &ReconProblem<'_>, f: &[f64]) -> Result<Vec<f64>> {
    problem.normal_operator().forward(f)
}

/// Scales a user weight so the penalty and data terms start on the same
/// footing: `α ‖R‖² / ‖H‖²`.
pub fn normalized_alpha(alpha: f64, projector_norm: f64, highpass_norm: f64) -> Result<f64> {
    if !(projector_norm > 0.0 && highpass_norm > 0.0) {
        return Err(Error::ZeroDenominator("alpha normalization"));
    }
    Ok(alpha * projector_norm * projector_norm / (highpass_norm * highpass_norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconStatus {
    Converged,
    MaxIterations,
    Breakdown,
}

impl From<CgStatus> for ReconStatus {
    fn from(status: CgStatus) -> Self {
        match status {
            CgStatus::ResidualConverged | CgStatus::BackwardErrorConverged => ReconStatus::Converged,
            CgStatus::MaxIterations => ReconStatus::MaxIterations,
            CgStatus::Breakdown => ReconStatus::Breakdown,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconOutcome {
    pub image: Vec<f64>,
    pub status: ReconStatus,
    /// Final CG state with its tridiagonal coefficients; `None` in
    /// positivity mode.
    pub state: Option<CgState>,
    pub trace: Vec<CgRecord>,
    pub iterations: usize,
}

pub fn solve_problem_p(problem: &ReconProblem<'_>, tol: f64, max_iters: usize) -> Result<ReconOutcome> {
    solve_problem_p_with(problem, tol, max_iters, |_| {})
}

/// As [`solve_problem_p`], reporting each trace record as it is produced.
pub fn solve_problem_p_with(
    problem: &ReconProblem<'_>,
    tol: f64,
    max_iters: usize,
    mut observe: impl FnMut(&CgRecord),
) -> Result<ReconOutcome> {
    if !(tol > 0.0 && tol.is_finite()) || max_iters == 0 {
        return Err(invalid("tolerance must be positive and max_iters nonzero"));
    }
    problem.validate()?;
    let a = problem.normal_operator();
    let b = problem.rhs();
    if problem.positivity {
        return projected_gradient(&a, &b, tol, max_iters, observe);
    }
    let mut trace = Vec::new();
    let (state, status) = conjugate_gradient(&a, &b, None, CgOptions::backward(tol, max_iters), |_, record| {
        observe(record);
        trace.push(*record);
    })?;
    Ok(ReconOutcome {
        image: state.iterate.clone(),
        status: status.into(),
        iterations: state.iterations,
        state: Some(state),
        trace,
    })
}

/// `x ← max(0, x − (A x − b) / L)` with `L` a power-iteration bound on `‖A‖`.
fn projected_gradient<A: LinearMap + ?Sized>(
    a: &A,
    b: &[f64],
    tol: f64,
    max_iters: usize,
    mut observe: impl FnMut(&CgRecord),
) -> Result<ReconOutcome> {
    let lipschitz = 1.01 * operator_norm_estimate(a, 50, 0);
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mut trace = Vec::new();
    if !(lipschitz > 0.0) {
        return Ok(ReconOutcome { image: x, status: ReconStatus::Converged, state: None, trace, iterations: 0 });
    }
    let mut status = ReconStatus::MaxIterations;
    let mut iterations = 0;
    for k in 1..=max_iters {
        a.apply_into(&x, &mut ax);
        let mut step = 0.0;
        let mut grad_sq = 0.0;
        for i in 0..n {
            let grad = ax[i] - b[i];
            grad_sq += grad * grad;
            let next = (x[i] - grad / lipschitz).max(0.0);
            step += (next - x[i]) * (next - x[i]);
            x[i] = next;
        }
        a.apply_into(&x, &mut ax);
        let record = CgRecord {
            k,
            residual: libm::sqrt(grad_sq),
            backward_error: f64::NAN,
            energy: 0.5 * dot(&x, &ax) - dot(b, &x),
        };
        observe(&record);
        trace.push(record);
        iterations = k;
        if libm::sqrt(step) <= tol * norm(&x) {
            status = ReconStatus::Converged;
            break;
        }
    }
    Ok(ReconOutcome { image: x, status, state: None, trace, iterations })
}

/// Filtered back-projection with a ramp filter apodized by a Hann window.
///
/// Each projection is zero padded to twice its length and convolved with
/// the band-limited ramp kernel `h(0) = 1/4`, `h(k) = −1/(π k)²` for odd
/// `k`; the result is back-projected with the ideal projector and weighted
/// by `π / n_angles`.
pub fn fbp_reconstruct(g: &Sinogram, cutoff_nyquist: f64, geom: &GeometryConfig) -> Result<ImageGrid> {
    if !(cutoff_nyquist > 0.0 && cutoff_nyquist <= 1.0) {
        return Err(invalid(format!("FBP cutoff must lie in (0, 1], got {cutoff_nyquist}")));
    }
    let ideal = geom.to_ideal();
    let projector = RadonProjector::new(ideal)?;
    check_len(ideal.n_angles, g.n_angles())?;
    check_len(ideal.n_bins, g.n_bins())?;
    let nb = ideal.n_bins;
    let padded = 2 * nb;
    let dft = Dft::new(padded);
    let mut scratch = vec![0.0; 2 * padded];

    let mut kernel = vec![0.0; padded];
    let mut zeros = vec![0.0; padded];
    let pi2 = core::f64::consts::PI * core::f64::consts::PI;
    for (i, h) in kernel.iter_mut().enumerate() {
        let k = if 2 * i > padded { i as i64 - padded as i64 } else { i as i64 };
        *h = if k == 0 {
            0.25
        } else if k % 2 != 0 {
            -1.0 / (pi2 * (k * k) as f64)
        } else {
            0.0
        };
    }
    dft.transform_strided(&mut kernel, &mut zeros, 0, 1, false, &mut scratch);
    let filter: Vec<f64> = kernel
        .iter()
        .enumerate()
        .map(|(k, h)| h * hann_window(nyquist_frequency(k, padded), cutoff_nyquist) / padded as f64)
        .collect();

    let mut filtered = vec![0.0; g.values().len()];
    let mut re = vec![0.0; padded];
    let mut im = vec![0.0; padded];
    for a in 0..ideal.n_angles {
        re.iter_mut().for_each(|v| *v = 0.0);
        im.iter_mut().for_each(|v| *v = 0.0);
        re[..nb].copy_from_slice(g.projection(a));
        dft.transform_strided(&mut re, &mut im, 0, 1, false, &mut scratch);
        for k in 0..padded {
            re[k] *= filter[k];
            im[k] *= filter[k];
        }
        dft.transform_strided(&mut re, &mut im, 0, 1, true, &mut scratch);
        filtered[a * nb..(a + 1) * nb].copy_from_slice(&re[..nb]);
    }
    let mut image = projector.adjoint(&filtered)?;
    vector::scale(core::f64::consts::PI / ideal.n_angles as f64, &mut image);
    ImageGrid::new(ideal.n, image)
}
