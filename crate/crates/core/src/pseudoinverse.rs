//! Moore–Penrose machinery at dense scale.
//!
//! The SVD is a one-sided Jacobi (Hestenes) iteration: columns of a working
//! copy are orthogonalized by plane rotations until every pair is numerically
//! orthogonal, after which the column norms are the singular values. It is
//! slow compared to bidiagonalization but simple and accurate to a few ulps
//! in the small singular values, which is what the oracle layer needs.
//!
//! [`pseudo_commutant`] returns `Φ = R C R†`, the minimum Frobenius norm
//! minimizer of `X ↦ ‖R C − X R‖_F`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{Matrix, DEFAULT_DENSE_CAP};
use crate::vector;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `M = U diag(s) Vᵀ` restricted to the numerical rank.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    /// `m x r`, orthonormal columns.
    pub u: Matrix,
    /// Strictly positive, nonincreasing.
    pub singular_values: Vec<f64>,
    /// `n x r`, orthonormal columns.
    pub v: Matrix,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationPolicy {
    /// Keep every singular value above the numerical rank cutoff.
    Exact,
    /// Keep the `k` largest singular values.
    Rank(usize),
    /// Keep singular values `s_i > τ s_max`, `τ ∈ (0, 1)`.
    Threshold(f64),
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationPolicy::Exact => Ok(()),
            TruncationPolicy::Rank(k) if k >= 1 => Ok(()),
            TruncationPolicy::Threshold(t) if t > 0.0 && t < 1.0 => Ok(()),
            other => Err(invalid(format!("invalid truncation policy {other:?}"))),
        }
    }
}

/// Factors `m` with the default dense cap.
pub fn svd_factor(m: &Matrix) -> Result<SvdFactorization> {
    svd_factor_capped(m, DEFAULT_DENSE_CAP)
}

pub fn svd_factor_capped(m: &Matrix, cap: usize) -> Result<SvdFactorization> {
    let (rows, cols) = m.shape();
    if rows.saturating_mul(cols) > cap {
        return Err(Error::DenseCapExceeded { rows, cols, cap });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    if rows < cols {
        // Factor the transpose so the Jacobi iteration works on the short side.
        let t = jacobi_svd(&m.transpose());
        return Ok(SvdFactorization { u: t.v, singular_values: t.singular_values, v: t.u, rank: t.rank });
    }
    Ok(jacobi_svd(m))
}

/// One-sided Jacobi on a tall (or square) matrix.
fn jacobi_svd(m: &Matrix) -> SvdFactorization {
    let (rows, cols) = m.shape();
    // Column-major working copies.
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();

    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = vector::dot(&a[p], &a[p]);
                let beta = vector::dot(&a[q], &a[q]);
                let gamma = vector::dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= eps * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                let (lo, hi) = a.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                let (lo, hi) = v.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = a.iter().enumerate().map(|(j, col)| (vector::norm(col), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let s_max = order.first().map_or(0.0, |o| o.0);
    let cutoff = rows.max(cols) as f64 * eps * s_max;
    let kept: Vec<(f64, usize)> = order.into_iter().filter(|(s, _)| *s > cutoff && *s > 0.0).collect();
    let rank = kept.len();

    let mut u = Matrix::zeros(rows, rank);
    let mut vm = Matrix::zeros(cols, rank);
    let mut singular_values = Vec::with_capacity(rank);
    for (k, (s, j)) in kept.iter().enumerate() {
        singular_values.push(*s);
        for i in 0..rows {
            u[(i, k)] = a[*j][i] / s;
        }
        for i in 0..cols {
            vm[(i, k)] = v[*j][i];
        }
    }
    SvdFactorization { u, singular_values, v: vm, rank }
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

impl SvdFactorization {
    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    pub fn cols(&self) -> usize {
        self.v.rows()
    }

    pub fn largest_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    fn kept(&self, policy: TruncationPolicy) -> Result<usize> {
        policy.validate()?;
        Ok(match policy {
            TruncationPolicy::Exact => self.rank,
            TruncationPolicy::Rank(k) => k.min(self.rank),
            TruncationPolicy::Threshold(t) => {
                let floor = t * self.largest_singular_value();
                self.singular_values.iter().take_while(|s| **s > floor).count()
            }
        })
    }

    /// `U diag(s) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let us = Matrix::from_fn(self.rows(), self.rank, |i, k| self.u[(i, k)] * self.singular_values[k]);
        us.matmul(&self.v.transpose()).expect("thin factors are conformable")
    }

    /// `Σ_{i kept} (uᵢᵀ g / sᵢ) vᵢ`; with [`TruncationPolicy::Exact`] this is
    /// the minimum-norm least-squares solution `M† g`.
    pub fn pinv_apply(&self, g: &[f64], policy: TruncationPolicy) -> Result<Vec<f64>> {
        check_len(self.rows(), g.len())?;
        let kept = self.kept(policy)?;
        let mut x = vec![0.0; self.cols()];
        for k in 0..kept {
            let coeff = (0..self.rows()).map(|i| self.u[(i, k)] * g[i]).sum::<f64>() / self.singular_values[k];
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coeff * self.v[(i, k)];
            }
        }
        Ok(x)
    }

    /// Dense `M†` (`n x m`).
    pub fn pinv_matrix(&self, policy: TruncationPolicy) -> Result<Matrix> {
        let kept = self.kept(policy)?;
        let vs = Matrix::from_fn(self.cols(), kept, |i, k| self.v[(i, k)] / self.singular_values[k]);
        let ut = Matrix::from_fn(kept, self.rows(), |k, i| self.u[(i, k)]);
        vs.matmul(&ut)
    }

    /// Component of `x` in `ker(M)`: `x − V Vᵀ x`.
    pub fn kernel_component(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols(), x.len())?;
        let coeffs = self.v.matvec_transposed(x)?;
        let mut out = x.to_vec();
        for (k, c) in coeffs.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o -= c * self.v[(i, k)];
            }
        }
        Ok(out)
    }

    /// Component of `y` outside `range(M)`: `y − U Uᵀ y`.
    pub fn range_residual(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows(), y.len())?;
        let coeffs = self.u.matvec_transposed(y)?;
        let mut out = y.to_vec();
        for (k, c) in coeffs.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o -= c * self.u[(i, k)];
            }
        }
        Ok(out)
    }
}

/// Residuals of the four Penrose conditions for a candidate `X ≈ M†`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenroseReport {
    /// `‖M X M − M‖_F`
    pub mxm: f64,
    /// `‖X M X − X‖_F`
    pub xmx: f64,
    /// `‖(M X)ᵀ − M X‖_F`
    pub mx_symmetry: f64,
    /// `‖(X M)ᵀ − X M‖_F`
    pub xm_symmetry: f64,
    m_norm: f64,
}

impl PenroseReport {
    pub fn max_residual(&self) -> f64 {
        self.mxm.max(self.xmx).max(self.mx_symmetry).max(self.xm_symmetry)
    }

    /// All residuals below `1e−8 (1 + ‖M‖_F)`.
    pub fn accepts(&self) -> bool {
        self.max_residual() <= 1e-8 * (1.0 + self.m_norm)
    }
}

pub fn verify_penrose(m: &Matrix, x: &Matrix) -> Result<PenroseReport> {
    if m.rows() != x.cols() || m.cols() != x.rows() {
        return Err(Error::ShapeMismatch(format!(
            "candidate pseudo-inverse is {}x{}, expected {}x{}",
            x.rows(),
            x.cols(),
            m.cols(),
            m.rows()
        )));
    }
    let mx = m.matmul(x)?;
    let xm = x.matmul(m)?;
    Ok(PenroseReport {
        mxm: mx.matmul(m)?.sub(m)?.frobenius_norm(),
        xmx: xm.matmul(x)?.sub(x)?.frobenius_norm(),
        mx_symmetry: mx.asymmetry()?,
        xm_symmetry: xm.asymmetry()?,
        m_norm: m.frobenius_norm(),
    })
}

/// `Φ = R C R†`.
pub fn pseudo_commutant(r: &Matrix, c: &Matrix) -> Result<Matrix> {
    if c.rows() != c.cols() || c.rows() != r.cols() {
        return Err(Error::ShapeMismatch(format!(
            "R is {}x{} so C must be {}x{}, got {}x{}",
            r.rows(),
            r.cols(),
            r.cols(),
            r.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let pinv = svd_factor(r)?.pinv_matrix(TruncationPolicy::Exact)?;
    r.matmul(c)?.matmul(&pinv)
}

/// `½ ‖A − X R‖²_F`.
pub fn frobenius_objective(x: &Matrix, r: &Matrix, a: &Matrix) -> Result<f64> {
    let xr = x.matmul(r)?;
    let residual = a.sub(&xr)?.frobenius_norm();
    Ok(0.5 * residual * residual)
}
