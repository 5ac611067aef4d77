//! Discrete forward model: images, sinograms, linear maps, the Radon
//! projector and the mollifier pair `C` / `I − C`.

mod mollifier;
mod projector;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use mollifier::{HighPass, Mollifier, MollifierKind, MollifierSpec};
pub use projector::RadonProjector;

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::Matrix;
use crate::rng::{CounterRng, RngCursor};
use crate::vector;

/// Square `n x n` scalar field, row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    n: usize,
    values: Vec<f64>,
    pixel_size: f64,
}

impl ImageGrid {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_pixel_size(n, values, 1.0)
    }

    pub fn with_pixel_size(n: usize, values: Vec<f64>, pixel_size: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("image side must be positive"));
        }
        check_len(n * n, values.len())?;
        if !vector::all_finite(&values) {
            return Err(Error::NonFinite("image values"));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(invalid("pixel size must be positive and finite"));
        }
        Ok(Self { n, values, pixel_size })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; n * n], pixel_size: 1.0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    pub fn norm(&self) -> f64 {
        vector::norm(&self.values)
    }
}

/// Projection data, angle-major: `values[a * n_bins + b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    n_angles: usize,
    n_bins: usize,
    values: Vec<f64>,
    angles_deg: Vec<f64>,
}

impl Sinogram {
    pub fn new(n_bins: usize, angles_deg: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n_angles = angles_deg.len();
        if n_angles == 0 || n_bins == 0 {
            return Err(invalid("sinogram needs at least one angle and one bin"));
        }
        check_len(n_angles * n_bins, values.len())?;
        if !vector::all_finite(&values) {
            return Err(Error::NonFinite("sinogram values"));
        }
        if !angles_deg.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("sinogram angles must be strictly increasing"));
        }
        if angles_deg[n_angles - 1] - angles_deg[0] > 360.0 {
            return Err(invalid("sinogram angles span more than 360 degrees"));
        }
        Ok(Self { n_angles, n_bins, values, angles_deg })
    }

    /// Sinogram laid out for `geom`, with the given values.
    pub fn for_geometry(geom: &GeometryConfig, values: Vec<f64>) -> Result<Self> {
        Self::new(geom.n_bins, geom.angles_deg(), values)
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn projection(&self, angle: usize) -> &[f64] {
        &self.values[angle * self.n_bins..(angle + 1) * self.n_bins]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Parallel-beam acquisition geometry with an optional depth-dependent
/// detector blur.
///
/// The blur at depth `d` (pixels from the detector line) has standard
/// deviation `response_sigma0 + response_sigma_slope * d`, in bins. Both
/// zero selects the ideal Radon projector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    pub n: usize,
    pub n_angles: usize,
    pub n_bins: usize,
    pub span_deg: f64,
    pub response_sigma0: f64,
    pub response_sigma_slope: f64,
}

impl GeometryConfig {
    /// Response parameters used by the reference 64 x 64 experiment.
    pub const DEFAULT_SIGMA0: f64 = 0.5;
    pub const DEFAULT_SIGMA_SLOPE: f64 = 0.02;

    pub fn ideal(n: usize, n_angles: usize, n_bins: usize) -> Self {
        Self { n, n_angles, n_bins, span_deg: 360.0, response_sigma0: 0.0, response_sigma_slope: 0.0 }
    }

    pub fn with_response(self, sigma0: f64, slope: f64) -> Self {
        Self { response_sigma0: sigma0, response_sigma_slope: slope, ..self }
    }

    pub fn with_span(self, span_deg: f64) -> Self {
        Self { span_deg, ..self }
    }

    /// Same geometry without detector response.
    pub fn to_ideal(self) -> Self {
        self.with_response(0.0, 0.0)
    }

    pub fn is_ideal(&self) -> bool {
        self.response_sigma0 == 0.0 && self.response_sigma_slope == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_angles == 0 || self.n_bins == 0 {
            return Err(invalid("geometry sizes must be positive"));
        }
        if !self.span_deg.is_finite() || !self.response_sigma0.is_finite() || !self.response_sigma_slope.is_finite() {
            return Err(Error::NonFinite("geometry parameters"));
        }
        if !(self.span_deg > 0.0 && self.span_deg <= 360.0) {
            return Err(invalid(format!("angular span {} must lie in (0, 360]", self.span_deg)));
        }
        if self.response_sigma0 < 0.0 || self.response_sigma_slope < 0.0 {
            return Err(invalid("response parameters must be nonnegative"));
        }
        if self.n_bins < self.n {
            return Err(invalid(format!(
                "{} detector bins cannot cover a {}-pixel wide image",
                self.n_bins, self.n
            )));
        }
        Ok(())
    }

    /// Evenly spaced angles `a * span / n_angles`, endpoint excluded.
    pub fn angles_deg(&self) -> Vec<f64> {
        (0..self.n_angles).map(|a| a as f64 * self.span_deg / self.n_angles as f64).collect()
    }

    pub fn image_dim(&self) -> usize {
        self.n * self.n
    }

    pub fn sinogram_dim(&self) -> usize {
        self.n_angles * self.n_bins
    }
}

/// A linear operator with an exact adjoint.
///
/// `apply_into` and `adjoint_into` overwrite their output and panic on
/// length mismatch; [`LinearMap::forward`] and [`LinearMap::adjoint`] are the
/// checked, allocating entry points.
pub trait LinearMap {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]);

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.in_dim(), x.len())?;
        let mut y = vec![0.0; self.out_dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.out_dim(), y.len())?;
        let mut x = vec![0.0; self.in_dim()];
        self.adjoint_into(y, &mut x);
        Ok(x)
    }
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn in_dim(&self) -> usize {
        (**self).in_dim()
    }
    fn out_dim(&self) -> usize {
        (**self).out_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        (**self).adjoint_into(y, x)
    }
}

impl LinearMap for Matrix {
    fn in_dim(&self) -> usize {
        self.cols()
    }

    fn out_dim(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols());
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = vector::dot(self.row(i), x);
        }
    }

    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        assert_eq!(y.len(), self.rows());
        x.iter_mut().for_each(|v| *v = 0.0);
        for (i, yi) in y.iter().enumerate() {
            vector::axpy(*yi, self.row(i), x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity(pub usize);

impl LinearMap for Identity {
    fn in_dim(&self) -> usize {
        self.0
    }
    fn out_dim(&self) -> usize {
        self.0
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        x.copy_from_slice(y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroMap {
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LinearMap for ZeroMap {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn apply_into(&self, _x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
    }
    fn adjoint_into(&self, _y: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Dense matrix of a linear map, column `j` being the image of `e_j`.
pub fn materialize_dense<M: LinearMap + ?Sized>(map: &M, cap: usize) -> Result<Matrix> {
    let (rows, cols) = (map.out_dim(), map.in_dim());
    if rows.saturating_mul(cols) > cap {
        return Err(Error::DenseCapExceeded { rows, cols, cap });
    }
    let mut dense = Matrix::zeros(rows, cols);
    let mut e = vec![0.0; cols];
    let mut col = vec![0.0; rows];
    for j in 0..cols {
        e[j] = 1.0;
        map.apply_into(&e, &mut col);
        e[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            dense[(i, j)] = *v;
        }
    }
    Ok(dense)
}

/// Largest singular value of `map` by power iteration on `MᵀM` from a
/// seeded random start.
pub fn operator_norm_estimate<M: LinearMap + ?Sized>(map: &M, iterations: usize, seed: u64) -> f64 {
    let mut cursor = RngCursor::new(CounterRng::new(seed).stream("power-iteration"));
    let mut x: Vec<f64> = (0..map.in_dim()).map(|_| cursor.normal()).collect();
    let mut y = vec![0.0; map.out_dim()];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let nx = vector::norm(&x);
        if nx == 0.0 {
            return 0.0;
        }
        vector::scale(1.0 / nx, &mut x);
        map.apply_into(&x, &mut y);
        map.adjoint_into(&y, &mut x);
        estimate = vector::norm(&x);
    }
    libm::sqrt(estimate)
}
