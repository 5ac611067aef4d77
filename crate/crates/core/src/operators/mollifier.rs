use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::LinearMap;
use crate::error::{invalid, Result};
use crate::fourier::{hann_window, nyquist_frequency, Dft};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MollifierKind {
    /// Radial Hann window `0.5 (1 + cos(π |ν| / ν_c))` for `|ν| ≤ ν_c`.
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub kind: MollifierKind,
    /// Cutoff frequency in Nyquist units, in `(0, 1]`.
    pub cutoff_nyquist: f64,
    /// Image side.
    pub n: usize,
}

impl MollifierSpec {
    pub fn hann(n: usize, cutoff_nyquist: f64) -> Self {
        Self { kind: MollifierKind::Hann, cutoff_nyquist, n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("mollifier image side must be positive"));
        }
        if !(self.cutoff_nyquist > 0.0 && self.cutoff_nyquist <= 1.0) {
            return Err(invalid(format!("cutoff {} must lie in (0, 1]", self.cutoff_nyquist)));
        }
        Ok(())
    }

    /// Transfer value at a radial frequency given in Nyquist units.
    pub fn transfer_at(&self, radial_nyquist: f64) -> f64 {
        match self.kind {
            MollifierKind::Hann => hann_window(radial_nyquist, self.cutoff_nyquist),
        }
    }
}

/// Smoothing operator `C`: circular convolution on `n x n` images whose
/// transfer function is the radial window of a [`MollifierSpec`].
///
/// The transfer depends only on `|ν|`, so the kernel is real and even and
/// `C` is symmetric. Its eigenvalues are the transfer values, all in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Mollifier {
    spec: MollifierSpec,
    dft: Dft,
    transfer: Vec<f64>,
}

impl Mollifier {
    pub fn new(spec: MollifierSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let mut transfer = Vec::with_capacity(n * n);
        for ky in 0..n {
            let fy = nyquist_frequency(ky, n);
            for kx in 0..n {
                let fx = nyquist_frequency(kx, n);
                transfer.push(spec.transfer_at(libm::sqrt(fx * fx + fy * fy)));
            }
        }
        Ok(Self { spec, dft: Dft::new(n), transfer })
    }

    pub fn spec(&self) -> &MollifierSpec {
        &self.spec
    }

    /// Transfer values on the DFT grid, row-major over `(ky, kx)`.
    pub fn transfer(&self) -> &[f64] {
        &self.transfer
    }

    /// Applies the filter whose transfer is `h(C)` for the given map `h`.
    pub(crate) fn filter_with(&self, x: &[f64], y: &mut [f64], h: impl Fn(f64) -> f64) {
        let n = self.spec.n;
        assert_eq!(x.len(), n * n);
        let mut re = x.to_vec();
        let mut im = vec![0.0; n * n];
        self.dft.transform_2d(&mut re, &mut im, false);
        for ((r, i), t) in re.iter_mut().zip(im.iter_mut()).zip(&self.transfer) {
            let g = h(*t);
            *r *= g;
            *i *= g;
        }
        self.dft.transform_2d(&mut re, &mut im, true);
        let norm = 1.0 / (n * n) as f64;
        for (out, v) in y.iter_mut().zip(re) {
            *out = v * norm;
        }
    }
}

impl LinearMap for Mollifier {
    fn in_dim(&self) -> usize {
        self.spec.n * self.spec.n
    }

    fn out_dim(&self) -> usize {
        self.in_dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.filter_with(x, y, |t| t);
    }

    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.filter_with(y, x, |t| t);
    }
}

/// High-pass complement `H = I − C`.
#[derive(Debug, Clone)]
pub struct HighPass {
    mollifier: Mollifier,
}

impl HighPass {
    pub fn new(spec: MollifierSpec) -> Result<Self> {
        Ok(Self { mollifier: Mollifier::new(spec)? })
    }

    pub fn from_mollifier(mollifier: Mollifier) -> Self {
        Self { mollifier }
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    /// Applies `H² = (I − C)²` in a single spectral pass.
    pub fn apply_squared_into(&self, x: &[f64], y: &mut [f64]) {
        self.mollifier.filter_with(x, y, |t| (1.0 - t) * (1.0 - t));
    }
}

impl LinearMap for HighPass {
    fn in_dim(&self) -> usize {
        self.mollifier.in_dim()
    }

    fn out_dim(&self) -> usize {
        self.mollifier.out_dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.mollifier.apply_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - *yi;
        }
    }

    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.apply_into(y, x);
    }
}
