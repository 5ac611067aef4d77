//! Regularized data `g̃ = R C R† g`.
//!
//! The pseudo-inverse is never formed for operator-scale problems: `R† g`
//! is approximated by proximal iteration (plain or Tikhonov shifted) or, on
//! small instances, by a truncated SVD of the materialized projector.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Result};
use crate::linalg::DEFAULT_DENSE_CAP;
use crate::operators::{materialize_dense, LinearMap};
use crate::proximal::{ppa_min_norm_lsq, ppa_tikhonov, LambdaSchedule, ProxConfig, ProxTrace};
use crate::pseudoinverse::{svd_factor_capped, TruncationPolicy};
use crate::rng::{CounterRng, RngCursor};
use crate::vector::{distance, norm, scale};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreprocessMethod {
    /// Proximal iteration with `ε = 0`.
    Ppa { schedule: LambdaSchedule, config: ProxConfig },
    /// Proximal iteration with `ε > 0`.
    TikhonovPpa { schedule: LambdaSchedule, config: ProxConfig },
    /// SVD of the dense projector; refuses operators larger than `cap` entries.
    TruncatedSvd { policy: TruncationPolicy, cap: usize },
}

impl PreprocessMethod {
    pub fn truncated_svd(policy: TruncationPolicy) -> Self {
        PreprocessMethod::TruncatedSvd { policy, cap: DEFAULT_DENSE_CAP }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PreprocessMethod::Ppa { .. } => "ppa",
            PreprocessMethod::TikhonovPpa { .. } => "tikhonov_ppa",
            PreprocessMethod::TruncatedSvd { .. } => "truncated_svd",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PreprocessMethod::Ppa { schedule, config } => {
                schedule.validate()?;
                config.validate()?;
                if config.epsilon != 0.0 {
                    return Err(invalid("ppa preprocessing requires epsilon = 0"));
                }
            }
            PreprocessMethod::TikhonovPpa { schedule, config } => {
                schedule.validate()?;
                config.validate()?;
                if !(config.epsilon > 0.0) {
                    return Err(invalid("tikhonov_ppa preprocessing requires epsilon > 0"));
                }
            }
            PreprocessMethod::TruncatedSvd { policy, .. } => policy.validate()?,
        }
        Ok(())
    }

    /// `key = value` pairs describing the method and its parameters.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut meta = vec![("method".to_string(), self.name().to_string())];
        match self {
            PreprocessMethod::Ppa { schedule, config } | PreprocessMethod::TikhonovPpa { schedule, config } => {
                meta.push(("schedule".to_string(), format!("{schedule:?}")));
                meta.push(("epsilon".to_string(), format!("{:e}", config.epsilon)));
                meta.push(("outer_tol".to_string(), format!("{:e}", config.outer_tol)));
                meta.push(("max_outer".to_string(), format!("{}", config.max_outer)));
                meta.push(("inner_tol".to_string(), format!("{:e}", config.inner_tol)));
                meta.push(("max_inner".to_string(), format!("{}", config.max_inner)));
            }
            PreprocessMethod::TruncatedSvd { policy, cap } => {
                meta.push(("policy".to_string(), format!("{policy:?}")));
                meta.push(("dense_cap".to_string(), format!("{cap}")));
            }
        }
        meta
    }
}

/// Approximation of `R† g` with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PinvEstimate {
    pub x: Vec<f64>,
    /// Present for the proximal methods.
    pub trace: Option<ProxTrace>,
    pub metadata: Vec<(String, String)>,
}

pub fn estimate_pinv<R: LinearMap + ?Sized>(r: &R, g: &[f64], method: &PreprocessMethod) -> Result<PinvEstimate> {
    method.validate()?;
    check_len(r.out_dim(), g.len())?;
    let mut metadata = method.metadata();
    let (x, trace) = match *method {
        PreprocessMethod::Ppa { schedule, config } => {
            let (x, trace) = ppa_min_norm_lsq(r, g, schedule, config)?;
            (x, Some(trace))
        }
        PreprocessMethod::TikhonovPpa { schedule, config } => {
            let (x, trace) = ppa_tikhonov(r, g, schedule, config)?;
            (x, Some(trace))
        }
        PreprocessMethod::TruncatedSvd { policy, cap } => {
            let dense = materialize_dense(r, cap)?;
            let svd = svd_factor_capped(&dense, cap)?;
            metadata.push(("rank".to_string(), format!("{}", svd.rank)));
            (svd.pinv_apply(g, policy)?, None)
        }
    };
    if let Some(trace) = &trace {
        metadata.push(("status".to_string(), format!("{:?}", trace.status)));
        metadata.push(("outer_iterations".to_string(), format!("{}", trace.records.len())));
        metadata.push(("inner_iterations".to_string(), format!("{}", trace.total_inner_iterations())));
    }
    Ok(PinvEstimate { x, trace, metadata })
}

/// `R (C x)`
pub fn smoothed_projection<R, C>(r: &R, c: &C, x: &[f64]) -> Result<Vec<f64>>
where
    R: LinearMap + ?Sized,
    C: LinearMap + ?Sized,
{
    check_len(r.in_dim(), c.out_dim())?;
    r.forward(&c.forward(x)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedData {
    /// `R C x̂`, same layout as the input sinogram.
    pub data: Vec<f64>,
    pub estimate: PinvEstimate,
}

/// Replaces `g` by `R C x̂` with `x̂ ≈ R† g`.
pub fn regularize_data<R, C>(r: &R, c: &C, g: &[f64], method: &PreprocessMethod) -> Result<RegularizedData>
where
    R: LinearMap + ?Sized,
    C: LinearMap + ?Sized,
{
    check_len(r.in_dim(), c.in_dim())?;
    check_len(r.in_dim(), c.out_dim())?;
    let estimate = estimate_pinv(r, g, method)?;
    let data = smoothed_projection(r, c, &estimate.x)?;
    Ok(RegularizedData { data, estimate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// `‖g̃(g + δg) − g̃(g)‖ / ‖δg‖`; `None` when `δg = 0`.
    pub amplification: Option<f64>,
    pub perturbation_norm: f64,
    pub response_norm: f64,
}

/// Measures how a data perturbation propagates through [`regularize_data`].
///
/// The perturbation is Poisson-like, `δg_i ∝ √|g_i| z_i` with standard
/// normal `z`, rescaled to `‖δg‖ = perturbation_scale ‖g‖`.
pub fn preprocess_stability_probe<R, C>(
    r: &R,
    c: &C,
    g: &[f64],
    method: &PreprocessMethod,
    perturbation_scale: f64,
    seed: u64,
) -> Result<StabilityReport>
where
    R: LinearMap + ?Sized,
    C: LinearMap + ?Sized,
{
    if !(perturbation_scale >= 0.0 && perturbation_scale.is_finite()) {
        return Err(invalid("perturbation scale must be finite and nonnegative"));
    }
    let base = regularize_data(r, c, g, method)?;
    let mut cursor = RngCursor::new(CounterRng::new(seed).stream("stability-probe"));
    let mut delta: Vec<f64> = g.iter().map(|v| libm::sqrt(v.abs()) * cursor.normal()).collect();
    if norm(&delta) == 0.0 {
        delta.iter_mut().for_each(|d| *d = cursor.normal());
    }
    let target = perturbation_scale * norm(g);
    let current = norm(&delta);
    if target == 0.0 || current == 0.0 {
        return Ok(StabilityReport { amplification: None, perturbation_norm: 0.0, response_norm: 0.0 });
    }
    scale(target / current, &mut delta);
    let perturbed: Vec<f64> = g.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let moved = regularize_data(r, c, &perturbed, method)?;
    let response_norm = distance(&moved.data, &base.data);
    let perturbation_norm = norm(&delta);
    Ok(StabilityReport { amplification: Some(response_norm / perturbation_norm), perturbation_norm, response_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::operators::Identity;

    fn prox() -> ProxConfig {
        ProxConfig { epsilon: 0.0, outer_tol: 1e-12, max_outer: 500, inner_tol: 1e-13, max_inner: 200 }
    }

    #[test]
    fn zero_data_maps_to_zero() {
        let r = Matrix::from_fn(4, 3, |i, j| (i + 2 * j) as f64 - 1.5);
        let c = Identity(3);
        let method = PreprocessMethod::Ppa { schedule: LambdaSchedule::Constant(1.0), config: prox() };
        let out = regularize_data(&r, &c, &[0.0; 4], &method).unwrap();
        assert!(out.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn validation() {
        let bad = PreprocessMethod::TikhonovPpa { schedule: LambdaSchedule::Constant(1.0), config: prox() };
        assert!(bad.validate().is_err());
        let mut cfg = prox();
        cfg.epsilon = 1e-3;
        let bad = PreprocessMethod::Ppa { schedule: LambdaSchedule::Constant(1.0), config: cfg };
        assert!(bad.validate().is_err());
        let r = Matrix::identity(3);
        let method = PreprocessMethod::truncated_svd(TruncationPolicy::Exact);
        assert!(regularize_data(&r, &Identity(4), &[1.0; 3], &method).is_err());
    }

    #[test]
    fn zero_perturbation_is_not_applicable() {
        let r = Matrix::identity(3);
        let method = PreprocessMethod::truncated_svd(TruncationPolicy::Exact);
        let report = preprocess_stability_probe(&r, &Identity(3), &[1.0, 2.0, 3.0], &method, 0.0, 1).unwrap();
        assert_eq!(report.amplification, None);
    }

    #[test]
    fn orthogonal_rows_amplify_by_one() {
        let r = Matrix::from_row_major(2, 3, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let method = PreprocessMethod::truncated_svd(TruncationPolicy::Exact);
        let report = preprocess_stability_probe(&r, &Identity(3), &[1.0, 4.0], &method, 0.1, 7).unwrap();
        assert!((report.amplification.unwrap() - 1.0).abs() < 1e-12);
    }
}
