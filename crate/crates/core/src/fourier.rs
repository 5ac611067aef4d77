//! Discrete Fourier transforms on arbitrary lengths.
//!
//! Powers of two use an iterative radix-2 FFT; other lengths fall back to
//! the direct O(n²) sum. Both read twiddles from one table indexed by
//! `(j * k) mod n`, which keeps the transform exactly periodic.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Dft {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let cos = (0..n).map(|k| libm::cos(2.0 * PI * k as f64 / n as f64)).collect();
        let sin = (0..n).map(|k| libm::sin(2.0 * PI * k as f64 / n as f64)).collect();
        Self { n, cos, sin }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform of a strided complex sequence.
    ///
    /// `inverse` flips the exponent sign; no `1/n` normalization is applied.
    pub fn transform_strided(
        &self,
        re: &mut [f64],
        im: &mut [f64],
        offset: usize,
        stride: usize,
        inverse: bool,
        scratch: &mut [f64],
    ) {
        let n = self.n;
        let (buf_re, buf_im) = scratch[..2 * n].split_at_mut(n);
        if n.is_power_of_two() {
            for j in 0..n {
                let r = self.bitrev(j);
                buf_re[r] = re[offset + j * stride];
                buf_im[r] = im[offset + j * stride];
            }
            self.radix2(buf_re, buf_im, inverse);
        } else {
            self.direct(re, im, offset, stride, inverse, buf_re, buf_im);
        }
        for k in 0..n {
            re[offset + k * stride] = buf_re[k];
            im[offset + k * stride] = buf_im[k];
        }
    }

    #[inline]
    fn bitrev(&self, j: usize) -> usize {
        let bits = self.n.trailing_zeros();
        if bits == 0 {
            0
        } else {
            j.reverse_bits() >> (usize::BITS - bits)
        }
    }

    /// In-place butterflies on bit-reversed input.
    fn radix2(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (c, s) = (self.cos[k * step], sign * self.sin[k * step]);
                    let (a, b) = (start + k, start + k + half);
                    let tr = re[b] * c - im[b] * s;
                    let ti = re[b] * s + im[b] * c;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len *= 2;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn direct(
        &self,
        re: &[f64],
        im: &[f64],
        offset: usize,
        stride: usize,
        inverse: bool,
        out_re: &mut [f64],
        out_im: &mut [f64],
    ) {
        let n = self.n;
        let sign = if inverse { 1.0 } else { -1.0 };
        for k in 0..n {
            let mut acc_re = 0.0;
            let mut acc_im = 0.0;
            let mut idx = 0usize;
            for j in 0..n {
                let (xr, xi) = (re[offset + j * stride], im[offset + j * stride]);
                let (c, s) = (self.cos[idx], sign * self.sin[idx]);
                acc_re += xr * c - xi * s;
                acc_im += xr * s + xi * c;
                idx += k;
                if idx >= n {
                    idx -= n;
                }
            }
            out_re[k] = acc_re;
            out_im[k] = acc_im;
        }
    }

    /// Unnormalized 2D transform of an `n x n` row-major complex array.
    pub fn transform_2d(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        let mut scratch = vec![0.0; 2 * n];
        for row in 0..n {
            self.transform_strided(re, im, row * n, 1, inverse, &mut scratch);
        }
        for col in 0..n {
            self.transform_strided(re, im, col, n, inverse, &mut scratch);
        }
    }
}

/// Signed frequency of DFT index `k` in Nyquist units: `2 k' / n`,
/// with `k'` the index folded into `(-n/2, n/2]`.
pub fn nyquist_frequency(k: usize, n: usize) -> f64 {
    let signed = if 2 * k > n { k as f64 - n as f64 } else { k as f64 };
    2.0 * signed / n as f64
}

/// Hann window in Nyquist units, `0.5 (1 + cos(π ν / ν_c))` inside the
/// cutoff and zero outside.
pub fn hann_window(nu: f64, cutoff: f64) -> f64 {
    let nu = nu.abs();
    if nu <= cutoff {
        0.5 * (1.0 + libm::cos(PI * nu / cutoff))
    } else {
        0.0
    }
}
