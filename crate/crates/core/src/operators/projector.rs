use alloc::vec;
use alloc::vec::Vec;

use super::{GeometryConfig, ImageGrid, LinearMap, Sinogram};
use crate::error::{check_len, Result};

/// Parallel-beam projector with Joseph's ray-driven interpolation,
/// optionally followed by a depth-dependent Gaussian blur along the
/// detector.
///
/// Coordinates are in pixel units with the origin at the image centre:
/// pixel `(i, j)` sits at `x = j − (n−1)/2`, `y = (n−1)/2 − i`, and bin `b`
/// is the line `⟨θ, p⟩ = b − (n_bins−1)/2` with `θ = (cos φ, sin φ)`. Each
/// ray is sampled once per pixel column when it runs closer to horizontal,
/// otherwise once per pixel row; every sample interpolates linearly between
/// the two nearest pixels of that column (or row) and is weighted by the
/// ray length per step, `1 / max(|sin φ|, |cos φ|)`. Pixels outside the grid
/// count as zero. The adjoint visits the same samples.
///
/// In response mode the detector line sits on the circle circumscribing the
/// image, on the `θ⊥ = (−sin φ, cos φ)` side. A sample at depth `d`
/// (distance to the detector line) is split linearly between the two
/// neighbouring integer depth slabs, and every slab is convolved along the
/// bin axis with a Gaussian of standard deviation `σ0 + slope · d`,
/// truncated at `4σ` and renormalized to unit sum.
#[derive(Debug, Clone)]
pub struct RadonProjector {
    geom: GeometryConfig,
    angles: Vec<AngleTrig>,
    response: Option<DepthResponse>,
}

#[derive(Debug, Clone, Copy)]
struct AngleTrig {
    cos: f64,
    sin: f64,
}

#[derive(Debug, Clone)]
struct DepthResponse {
    detector_radius: f64,
    /// One symmetric kernel per integer depth, stored from `-h` to `h`.
    kernels: Vec<Vec<f64>>,
    /// Largest kernel half-width; slab rows carry this much zero padding.
    pad: usize,
    /// Per angle and slab, the half-open bin range that receives deposits.
    ranges: Vec<(usize, usize)>,
}

impl DepthResponse {
    fn new(geom: &GeometryConfig) -> Self {
        let detector_radius = geom.n as f64 / core::f64::consts::SQRT_2;
        let n_slabs = libm::floor(2.0 * detector_radius) as usize + 2;
        let kernels: Vec<Vec<f64>> = (0..n_slabs)
            .map(|s| gaussian_kernel(geom.response_sigma0 + geom.response_sigma_slope * s as f64))
            .collect();
        let pad = kernels.iter().map(|k| k.len() / 2).max().unwrap_or(0);
        Self { detector_radius, kernels, pad, ranges: Vec::new() }
    }

    fn n_slabs(&self) -> usize {
        self.kernels.len()
    }

    /// Slab index and linear weight of the upper slab for a sample at
    /// signed position `t` along `θ⊥`.
    #[inline]
    fn slab(&self, t: f64) -> (usize, f64) {
        let max = (self.n_slabs() - 1) as f64;
        let d = (self.detector_radius - t).clamp(0.0, max);
        let k = (d as usize).min(self.n_slabs() - 2);
        (k, d - k as f64)
    }

    #[inline]
    fn row_width(&self, n_bins: usize) -> usize {
        n_bins + 2 * self.pad
    }
}

#[inline]
fn floor_to_isize(x: f64) -> isize {
    let t = x as isize;
    if (t as f64) > x {
        t - 1
    } else {
        t
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Discrete Gaussian on integer offsets `|k| ≤ ⌊4σ⌋`, unit sum.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = libm::floor(4.0 * sigma) as usize;
    if half == 0 {
        return vec![1.0];
    }
    let mut k: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let x = i as f64 - half as f64;
            libm::exp(-x * x / (2.0 * sigma * sigma))
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// One ray sample: up to two pixels with their weights. Unused slots carry
/// weight zero.
type Sample = [(usize, f64); 2];

impl RadonProjector {
    pub fn new(geom: GeometryConfig) -> Result<Self> {
        geom.validate()?;
        let angles = geom
            .angles_deg()
            .into_iter()
            .map(|deg| {
                let phi = deg.to_radians();
                AngleTrig { cos: libm::cos(phi), sin: libm::sin(phi) }
            })
            .collect();
        let mut projector = Self { geom, angles, response: None };
        if !geom.is_ideal() {
            let mut resp = DepthResponse::new(&geom);
            let n_slabs = resp.n_slabs();
            let mut ranges = vec![(usize::MAX, 0usize); geom.n_angles * n_slabs];
            for (a, trig) in projector.angles.iter().enumerate() {
                projector.samples(*trig, |bin, t, _| {
                    let (k, _) = resp.slab(t);
                    for s in [k, k + 1] {
                        let r = &mut ranges[a * n_slabs + s];
                        r.0 = r.0.min(bin);
                        r.1 = r.1.max(bin + 1);
                    }
                });
            }
            for r in &mut ranges {
                if r.0 >= r.1 {
                    *r = (0, 0);
                }
            }
            resp.ranges = ranges;
            projector.response = Some(resp);
        }
        Ok(projector)
    }

    pub fn geometry(&self) -> &GeometryConfig {
        &self.geom
    }

    /// `g = R f`.
    pub fn project(&self, image: &ImageGrid) -> Result<Sinogram> {
        check_len(self.geom.n, image.n())?;
        let values = self.forward(image.values())?;
        Sinogram::for_geometry(&self.geom, values)
    }

    /// `Rᵀ g`.
    pub fn backproject(&self, sinogram: &Sinogram) -> Result<ImageGrid> {
        check_len(self.geom.n_angles, sinogram.n_angles())?;
        check_len(self.geom.n_bins, sinogram.n_bins())?;
        let values = self.adjoint(sinogram.values())?;
        ImageGrid::new(self.geom.n, values)
    }

    /// Visits every ray sample at one angle as `(bin, position along θ⊥,
    /// pixels)`, skipping samples that fall entirely outside the grid.
    #[inline]
    fn samples(&self, trig: AngleTrig, mut visit: impl FnMut(usize, f64, Sample)) {
        let n = self.geom.n;
        let centre = (n as f64 - 1.0) / 2.0;
        let bin_centre = (self.geom.n_bins as f64 - 1.0) / 2.0;
        let AngleTrig { cos, sin } = trig;
        let along_columns = sin.abs() >= cos.abs();
        let (major, minor) = if along_columns { (sin, cos) } else { (cos, sin) };
        let step = 1.0 / major.abs();
        let last = n as isize - 1;
        for bin in 0..self.geom.n_bins {
            let r = bin as f64 - bin_centre;
            for k in 0..n {
                // Along columns: x fixed, y = (r − x cos) / sin, interpolate across rows.
                // Along rows: y fixed, x = (r − y sin) / cos, interpolate across columns.
                let fixed = if along_columns { k as f64 - centre } else { centre - k as f64 };
                let free = (r - fixed * minor) / major;
                let pos = if along_columns { centre - free } else { free + centre };
                let lo = floor_to_isize(pos);
                if lo < -1 || lo > last {
                    continue;
                }
                let w = pos - lo as f64;
                let pixel = |m: isize| if along_columns { m as usize * n + k } else { k * n + m as usize };
                let lower = if lo >= 0 { (pixel(lo), (1.0 - w) * step) } else { (0, 0.0) };
                let upper = if lo < last { (pixel(lo + 1), w * step) } else { (0, 0.0) };
                let (x, y) = if along_columns { (fixed, free) } else { (free, fixed) };
                visit(bin, y * cos - x * sin, [lower, upper]);
            }
        }
    }
}

impl LinearMap for RadonProjector {
    fn in_dim(&self) -> usize {
        self.geom.image_dim()
    }

    fn out_dim(&self) -> usize {
        self.geom.sinogram_dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.in_dim());
        assert_eq!(y.len(), self.out_dim());
        let nb = self.geom.n_bins;
        y.iter_mut().for_each(|v| *v = 0.0);
        let Some(resp) = &self.response else {
            for (a, trig) in self.angles.iter().enumerate() {
                let out = &mut y[a * nb..(a + 1) * nb];
                self.samples(*trig, |bin, _, [(p, wp), (q, wq)]| {
                    out[bin] += wp * x[p] + wq * x[q];
                });
            }
            return;
        };
        let n_slabs = resp.n_slabs();
        let width = resp.row_width(nb);
        let pad = resp.pad;
        let mut rows = vec![0.0; n_slabs * width];
        for (a, trig) in self.angles.iter().enumerate() {
            rows.iter_mut().for_each(|v| *v = 0.0);
            self.samples(*trig, |bin, t, [(p, wp), (q, wq)]| {
                let v = wp * x[p] + wq * x[q];
                if v == 0.0 {
                    return;
                }
                let (k, frac) = resp.slab(t);
                rows[k * width + pad + bin] += (1.0 - frac) * v;
                rows[(k + 1) * width + pad + bin] += frac * v;
            });
            let out = &mut y[a * nb..(a + 1) * nb];
            for (s, kernel) in resp.kernels.iter().enumerate() {
                let (lo, hi) = resp.ranges[a * n_slabs + s];
                if lo >= hi {
                    continue;
                }
                let half = kernel.len() / 2;
                let row = &rows[s * width..(s + 1) * width];
                for (b, o) in out.iter_mut().enumerate().take((hi + half).min(nb)).skip(lo.saturating_sub(half)) {
                    let start = pad + b - half;
                    *o += dot(kernel, &row[start..start + kernel.len()]);
                }
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        assert_eq!(y.len(), self.out_dim());
        assert_eq!(x.len(), self.in_dim());
        let nb = self.geom.n_bins;
        x.iter_mut().for_each(|v| *v = 0.0);
        let Some(resp) = &self.response else {
            for (a, trig) in self.angles.iter().enumerate() {
                let proj = &y[a * nb..(a + 1) * nb];
                self.samples(*trig, |bin, _, [(p, wp), (q, wq)]| {
                    x[p] += wp * proj[bin];
                    x[q] += wq * proj[bin];
                });
            }
            return;
        };
        let n_slabs = resp.n_slabs();
        let width = resp.row_width(nb);
        let pad = resp.pad;
        let mut rows = vec![0.0; n_slabs * width];
        let mut padded = vec![0.0; width];
        for (a, trig) in self.angles.iter().enumerate() {
            padded[pad..pad + nb].copy_from_slice(&y[a * nb..(a + 1) * nb]);
            for (s, kernel) in resp.kernels.iter().enumerate() {
                let (lo, hi) = resp.ranges[a * n_slabs + s];
                let half = kernel.len() / 2;
                for b in lo..hi {
                    let start = pad + b - half;
                    rows[s * width + pad + b] = dot(kernel, &padded[start..start + kernel.len()]);
                }
            }
            self.samples(*trig, |bin, t, [(p, wp), (q, wq)]| {
                let (k, frac) = resp.slab(t);
                let v = (1.0 - frac) * rows[k * width + pad + bin] + frac * rows[(k + 1) * width + pad + bin];
                x[p] += wp * v;
                x[q] += wq * v;
            });
        }
    }
}
