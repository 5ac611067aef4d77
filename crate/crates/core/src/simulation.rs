//! Phantom, Poisson acquisition noise and the evaluation metric.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::operators::{ImageGrid, LinearMap, Sinogram};
use crate::rng::CounterRng;
use crate::vector::{distance, norm};

/// One additive ellipse on `[−1, 1]²` (y pointing up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center_x: f64,
    pub center_y: f64,
    pub semi_axis_a: f64,
    pub semi_axis_b: f64,
    /// Counter-clockwise rotation of the `a` axis, degrees.
    pub rotation_deg: f64,
    pub intensity: f64,
}

impl Ellipse {
    pub const fn new(center_x: f64, center_y: f64, a: f64, b: f64, rotation_deg: f64, intensity: f64) -> Self {
        Self { center_x, center_y, semi_axis_a: a, semi_axis_b: b, rotation_deg, intensity }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.center_x, self.center_y, self.semi_axis_a, self.semi_axis_b, self.rotation_deg, self.intensity]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("ellipse parameters"));
        }
        if !(self.semi_axis_a > 0.0 && self.semi_axis_b > 0.0) {
            return Err(invalid(format!("ellipse semi-axes must be positive: {self:?}")));
        }
        if self.center_x.abs() > 1.0 || self.center_y.abs() > 1.0 {
            return Err(invalid(format!("ellipse centre outside [-1, 1]^2: {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let phi = self.rotation_deg.to_radians();
        let (s, c) = (libm::sin(phi), libm::cos(phi));
        let (dx, dy) = (x - self.center_x, y - self.center_y);
        let u = (dx * c + dy * s) / self.semi_axis_a;
        let v = (-dx * s + dy * c) / self.semi_axis_b;
        u * u + v * v <= 1.0
    }
}

/// The 10-ellipse Shepp–Logan phantom, high-contrast variant.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    Ellipse::new(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    Ellipse::new(0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    Ellipse::new(-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    Ellipse::new(0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    Ellipse::new(0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    Ellipse::new(0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    Ellipse::new(-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    Ellipse::new(0.0, -0.606, 0.023, 0.023, 0.0, 0.1),
    Ellipse::new(0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub n: usize,
    pub ellipses: Vec<Ellipse>,
}

impl PhantomSpec {
    pub fn shepp_logan(n: usize) -> Self {
        Self { n, ellipses: SHEPP_LOGAN.to_vec() }
    }
}

/// Values this close to zero are snapped to zero, so cancelling
/// intensities (e.g. `1 − 0.8 − 0.2`) give exact zeros.
const SNAP: f64 = 1e-12;

/// Rasterizes the ellipse sum at pixel centres
/// `x = −1 + (2j + 1)/n`, `y = 1 − (2i + 1)/n`.
pub fn shepp_logan(spec: &PhantomSpec) -> Result<ImageGrid> {
    if spec.n == 0 {
        return Err(invalid("phantom side must be positive"));
    }
    for e in &spec.ellipses {
        e.validate()?;
    }
    let n = spec.n;
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        let y = 1.0 - (2 * i + 1) as f64 / n as f64;
        for j in 0..n {
            let x = -1.0 + (2 * j + 1) as f64 / n as f64;
            let v: f64 = spec.ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum();
            values.push(if v.abs() < SNAP { 0.0 } else { v });
        }
    }
    ImageGrid::new(n, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Expected total counts of the noisy sinogram.
    pub target_total_counts: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisySinogram {
    /// Integer counts stored as floats.
    pub sinogram: Sinogram,
    /// Factor applied to the clean sinogram before sampling.
    pub scale: f64,
    /// Number of slightly negative bins clamped to zero.
    pub clamped: usize,
}

/// Scales `g` to `target_total_counts` and replaces every bin with an
/// independent Poisson draw whose mean is the scaled bin value.
///
/// Bin `i` draws from the counter stream `(seed, "poisson", i)` only, so the
/// result is independent of evaluation order and platform.
pub fn poisson_corrupt(g: &Sinogram, noise: &NoiseSpec) -> Result<NoisySinogram> {
    if !(noise.target_total_counts > 0.0 && noise.target_total_counts.is_finite()) {
        return Err(invalid("target total counts must be positive and finite"));
    }
    let max = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-9 * max;
    let mut clamped = 0;
    let mut clean = Vec::with_capacity(g.values().len());
    for (index, v) in g.values().iter().enumerate() {
        if *v < 0.0 {
            if -*v > tolerance {
                return Err(Error::NegativeData { index, value: *v });
            }
            clamped += 1;
            clean.push(0.0);
        } else {
            clean.push(*v);
        }
    }
    let total: f64 = clean.iter().sum();
    let scale = if total > 0.0 { noise.target_total_counts / total } else { 0.0 };
    let rng = CounterRng::new(noise.seed).stream("poisson");
    let values = clean
        .iter()
        .enumerate()
        .map(|(i, v)| poisson_sample(&rng.substream(i as u64), v * scale) as f64)
        .collect();
    Ok(NoisySinogram { sinogram: Sinogram::new(g.n_bins(), g.angles_deg().to_vec(), values)?, scale, clamped })
}

/// Poisson draw: sequential inversion below mean 30, Hörmann's transformed
/// rejection (PTRS) above.
pub fn poisson_sample(rng: &CounterRng, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < 30.0 {
        let u = rng.uniform_at(0);
        let mut k = 0u64;
        let mut p = libm::exp(-mean);
        let mut cdf = p;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        return k;
    }
    let slam = libm::sqrt(mean);
    let loglam = libm::log(mean);
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    let mut counter = 0u64;
    loop {
        let u = rng.uniform_at(counter) - 0.5;
        let v = rng.uniform_at(counter + 1);
        counter += 2;
        let us = 0.5 - u.abs();
        let k = libm::floor((2.0 * a / us + b) * u + mean + 0.43);
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = libm::log(v) + libm::log(inv_alpha) - libm::log(a / (us * us) + b);
        let rhs = -mean + k * loglam - libm::lgamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `‖C f0 − f‖ / ‖C f0‖`
pub fn normalized_quadratic_error<C: LinearMap + ?Sized>(f: &ImageGrid, f0: &ImageGrid, c: &C) -> Result<f64> {
    let target = c.forward(f0.values())?;
    normalized_error_against(f.values(), &target)
}

/// `‖target − f‖ / ‖target‖` for a precomputed smoothed target.
pub fn normalized_error_against(f: &[f64], target: &[f64]) -> Result<f64> {
    crate::error::check_len(target.len(), f.len())?;
    let denom = norm(target);
    if denom == 0.0 {
        return Err(Error::ZeroDenominator("normalized quadratic error"));
    }
    Ok(distance(target, f) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Identity;
    use alloc::vec;

    #[test]
    fn single_pixel_phantom() {
        let img = shepp_logan(&PhantomSpec::shepp_logan(1)).unwrap();
        let expected: f64 = SHEPP_LOGAN.iter().filter(|e| e.contains(0.0, 0.0)).map(|e| e.intensity).sum();
        assert_eq!(img.values(), &[expected]);
        assert!((expected - 0.2).abs() < 1e-15);
    }

    #[test]
    fn phantom_support_and_sign() {
        let n = 64;
        let img = shepp_logan(&PhantomSpec::shepp_logan(n)).unwrap();
        assert!(img.values().iter().all(|v| *v >= 0.0));
        let outer = SHEPP_LOGAN[0];
        for i in 0..n {
            for j in 0..n {
                let x = -1.0 + (2 * j + 1) as f64 / n as f64;
                let y = 1.0 - (2 * i + 1) as f64 / n as f64;
                if !outer.contains(x, y) {
                    assert_eq!(img.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_ellipses() {
        let mut spec = PhantomSpec::shepp_logan(8);
        spec.ellipses[0].semi_axis_a = 0.0;
        assert!(shepp_logan(&spec).is_err());
        let mut spec = PhantomSpec::shepp_logan(8);
        spec.ellipses[3].center_x = 1.5;
        assert!(shepp_logan(&spec).is_err());
    }

    #[test]
    fn poisson_zero_and_negative() {
        let g = Sinogram::new(3, vec![0.0], vec![0.0; 3]).unwrap();
        let noisy = poisson_corrupt(&g, &NoiseSpec { target_total_counts: 10.0, seed: 1 }).unwrap();
        assert_eq!(noisy.sinogram.values(), &[0.0; 3]);
        let g = Sinogram::new(3, vec![0.0], vec![1.0, -1e-12, 2.0]).unwrap();
        let noisy = poisson_corrupt(&g, &NoiseSpec { target_total_counts: 10.0, seed: 1 }).unwrap();
        assert_eq!(noisy.clamped, 1);
        let g = Sinogram::new(3, vec![0.0], vec![1.0, -0.1, 2.0]).unwrap();
        assert!(matches!(
            poisson_corrupt(&g, &NoiseSpec { target_total_counts: 10.0, seed: 1 }),
            Err(Error::NegativeData { index: 1, .. })
        ));
    }

    #[test]
    fn poisson_moments() {
        let rng = CounterRng::new(9);
        for mean in [0.5, 4.0, 29.0, 31.0, 250.0] {
            let n = 20000;
            let draws: Vec<f64> = (0..n).map(|i| poisson_sample(&rng.substream(i), mean) as f64).collect();
            let m = draws.iter().sum::<f64>() / n as f64;
            let v = draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / n as f64;
            assert!((m - mean).abs() < 5.0 * libm::sqrt(mean / n as f64), "mean {mean}: {m}");
            assert!((v - mean).abs() < 0.1 * mean, "variance {mean}: {v}");
        }
    }

    #[test]
    fn metric_values() {
        let f0 = ImageGrid::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = Identity(4);
        assert_eq!(normalized_quadratic_error(&f0, &f0, &c).unwrap(), 0.0);
        assert_eq!(normalized_quadratic_error(&ImageGrid::zeros(2), &f0, &c).unwrap(), 1.0);
        let doubled = ImageGrid::new(2, f0.values().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!((normalized_quadratic_error(&doubled, &f0, &c).unwrap() - 1.0).abs() < 1e-15);
        assert!(normalized_quadratic_error(&f0, &ImageGrid::zeros(2), &c).is_err());
    }
}
