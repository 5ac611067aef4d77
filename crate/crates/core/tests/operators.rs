mod common;

use std::f64::consts::PI;

use common::{cursor, dot, norm, normal_vec, rel_diff, to_na};
use mollify_core::operators::materialize_dense;
use mollify_core::{GeometryConfig, HighPass, LinearMap, Mollifier, MollifierSpec, RadonProjector};

const SIGMA0: f64 = 0.5;
const SLOPE: f64 = 0.02;

fn geometries(n: usize) -> Vec<GeometryConfig> {
    let base = GeometryConfig::ideal(n, n + 3, n + 5);
    vec![
        base,
        base.with_span(180.0),
        base.with_response(SIGMA0, SLOPE),
        base.with_response(1.5, 0.1).with_span(180.0),
    ]
}

fn centre(len: usize) -> f64 {
    (len as f64 - 1.0) / 2.0
}

fn oracle_kernel(sigma: f64) -> Vec<f64> {
    let half = (4.0 * sigma).floor() as i64;
    let raw: Vec<f64> = (-half..=half).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Ray-by-ray evaluation of the projector. Each ray `p(s) = r θ + s θ⊥` is
/// sampled where it crosses the centre line of every pixel column (or row,
/// for steep rays), the image is interpolated linearly between the two
/// pixels straddling the crossing, and in response mode the sample is
/// spread over neighbouring bins by the depth-interpolated Gaussian.
fn brute_force_projection(geom: &GeometryConfig, image: &[f64]) -> Vec<f64> {
    let n = geom.n;
    let nb = geom.n_bins;
    let radius = n as f64 / 2f64.sqrt();
    let slabs = (2.0 * radius).floor() as usize + 2;
    let kernels: Vec<Vec<f64>> = (0..slabs)
        .map(|s| oracle_kernel(geom.response_sigma0 + geom.response_sigma_slope * s as f64))
        .collect();
    let pixel = |i: i64, j: i64| -> f64 {
        if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
            0.0
        } else {
            image[i as usize * n + j as usize]
        }
    };
    let mut out = vec![0.0; geom.n_angles * nb];
    for (a, deg) in geom.angles_deg().iter().enumerate() {
        let (sin, cos) = deg.to_radians().sin_cos();
        for b in 0..nb {
            let r = b as f64 - centre(nb);
            for k in 0..n {
                let (value, s, dl) = if sin.abs() >= cos.abs() {
                    let x = k as f64 - centre(n);
                    let s = (r * cos - x) / sin;
                    let y = r * sin + s * cos;
                    let row = centre(n) - y;
                    let i0 = row.floor();
                    let w = row - i0;
                    let v = (1.0 - w) * pixel(i0 as i64, k as i64) + w * pixel(i0 as i64 + 1, k as i64);
                    (v, s, 1.0 / sin.abs())
                } else {
                    let y = centre(n) - k as f64;
                    let s = (y - r * sin) / cos;
                    let x = r * cos - s * sin;
                    let col = x + centre(n);
                    let j0 = col.floor();
                    let w = col - j0;
                    let v = (1.0 - w) * pixel(k as i64, j0 as i64) + w * pixel(k as i64, j0 as i64 + 1);
                    (v, s, 1.0 / cos.abs())
                };
                let contribution = value * dl;
                if contribution == 0.0 {
                    continue;
                }
                if geom.is_ideal() {
                    out[a * nb + b] += contribution;
                    continue;
                }
                let depth = radius - s;
                let slab = (depth.floor() as usize).min(slabs - 2);
                let frac = depth - slab as f64;
                for (sl, ws) in [(slab, 1.0 - frac), (slab + 1, frac)] {
                    let kern = &kernels[sl];
                    let half = (kern.len() / 2) as i64;
                    for off in -half..=half {
                        let target = b as i64 + off;
                        if target >= 0 && target < nb as i64 {
                            out[a * nb + target as usize] += contribution * ws * kern[(off + half) as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn projector_matches_ray_by_ray_oracle() {
    let mut c = cursor("projector-oracle", 3);
    for geom in geometries(16) {
        let r = RadonProjector::new(geom).unwrap();
        let image: Vec<f64> = (0..256).map(|_| c.uniform()).collect();
        let fast = r.forward(&image).unwrap();
        let slow = brute_force_projection(&geom, &image);
        let err = rel_diff(&fast, &slow);
        assert!(err < 1e-12, "{geom:?}: relative difference {err:e}");
    }
}

#[test]
fn projector_adjoint_dot_products() {
    for n in [8, 16] {
        for (k, geom) in geometries(n).into_iter().enumerate() {
            let r = RadonProjector::new(geom).unwrap();
            let mut c = cursor("adjoint", (n * 10 + k) as u64);
            for _ in 0..5 {
                let x = normal_vec(&mut c, r.in_dim());
                let y = normal_vec(&mut c, r.out_dim());
                let lhs = dot(&r.forward(&x).unwrap(), &y);
                let rhs = dot(&x, &r.adjoint(&y).unwrap());
                let scale = norm(&r.forward(&x).unwrap()) * norm(&y);
                assert!((lhs - rhs).abs() <= 1e-10 * scale, "n={n} {geom:?}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn projector_adjoint_is_dense_transpose() {
    let geom = GeometryConfig::ideal(8, 6, 11).with_response(SIGMA0, SLOPE);
    let r = RadonProjector::new(geom).unwrap();
    let dense = materialize_dense(&r, 1 << 20).unwrap();
    let mut c = cursor("transpose", 1);
    let y = normal_vec(&mut c, r.out_dim());
    let via_adjoint = r.adjoint(&y).unwrap();
    let via_dense = dense.matvec_transposed(&y).unwrap();
    assert!(rel_diff(&via_adjoint, &via_dense) < 1e-13);
}

#[test]
fn ideal_projections_match_analytic_line_integrals() {
    let n = 32;
    let (cx, cy, width) = (4.0, -2.5, 3.0);
    let geom = GeometryConfig::ideal(n, 24, 40);
    let r = RadonProjector::new(geom).unwrap();
    let sino = r.forward(&bump(n, cx, cy, width, 0.0)).unwrap();
    let total: f64 = bump(n, cx, cy, width, 0.0).iter().sum();
    for (a, deg) in geom.angles_deg().iter().enumerate() {
        let (sin, cos) = deg.to_radians().sin_cos();
        let shift = cx * cos + cy * sin;
        let exact: Vec<f64> = (0..geom.n_bins)
            .map(|b| {
                let rb = b as f64 - centre(geom.n_bins);
                (2.0 * PI).sqrt() * width * (-(rb - shift).powi(2) / (2.0 * width * width)).exp()
            })
            .collect();
        let proj = &sino[a * geom.n_bins..(a + 1) * geom.n_bins];
        assert!(rel_diff(proj, &exact) < 0.01, "angle {deg}: {}", rel_diff(proj, &exact));
        let mass: f64 = proj.iter().sum();
        assert!((mass - total).abs() < 0.01 * total, "angle {deg}: mass {mass} vs {total}");
    }
}

#[test]
fn single_pixel_unit_footprint() {
    for deg_span in [1.0, 90.0, 360.0] {
        let r = RadonProjector::new(GeometryConfig::ideal(1, 1, 1).with_span(deg_span)).unwrap();
        assert_eq!(r.forward(&[3.25]).unwrap(), vec![3.25]);
    }
}

/// Gaussian bump sampled at `Rot(rotate_deg) p`, i.e. the bump rotated by `-rotate_deg`.
fn bump(n: usize, cx: f64, cy: f64, width: f64, rotate_deg: f64) -> Vec<f64> {
    let (s, c) = rotate_deg.to_radians().sin_cos();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = j as f64 - centre(n);
            let y = centre(n) - i as f64;
            let (xr, yr) = (x * c - y * s, x * s + y * c);
            let d2 = (xr - cx).powi(2) + (yr - cy).powi(2);
            out.push((-d2 / (2.0 * width * width)).exp());
        }
    }
    out
}

#[test]
fn rotation_symmetry_on_smooth_images() {
    let n = 32;
    for geom in [GeometryConfig::ideal(n, 16, n), GeometryConfig::ideal(n, 16, n).with_response(SIGMA0, SLOPE)] {
        let r = RadonProjector::new(geom).unwrap();
        let nb = geom.n_bins;
        let sino = r.forward(&bump(n, 5.0, -3.0, 3.0, 0.0)).unwrap();
        for (a, deg) in geom.angles_deg().iter().enumerate() {
            let rotated = r.forward(&bump(n, 5.0, -3.0, 3.0, *deg)).unwrap();
            let err = rel_diff(&sino[a * nb..(a + 1) * nb], &rotated[..nb]);
            assert!(err <= 0.02, "{geom:?} angle {deg}: {err}");
        }
    }
}

#[test]
fn response_blur_grows_with_depth() {
    let n = 32;
    let geom = GeometryConfig::ideal(n, 4, n).with_response(SIGMA0, 0.1);
    let r = RadonProjector::new(geom).unwrap();
    let spread = |row: usize| {
        let mut img = vec![0.0; n * n];
        img[row * n + n / 2] = 1.0;
        let p = r.forward(&img).unwrap();
        let proj = &p[..n];
        let mean: f64 = proj.iter().enumerate().map(|(b, v)| b as f64 * v).sum();
        proj.iter().enumerate().map(|(b, v)| (b as f64 - mean).powi(2) * v).sum::<f64>()
    };
    // At angle 0 the detector sits on the +y side, so row 1 is shallow.
    assert!(spread(1) < spread(n - 2));
}

fn hann(nu: f64, cutoff: f64) -> f64 {
    if nu <= cutoff {
        0.5 * (1.0 + (PI * nu / cutoff).cos())
    } else {
        0.0
    }
}

fn folded(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n = n as f64;
    let s = if 2.0 * k > n { k - n } else { k };
    2.0 * s / n
}

/// Circular convolution with the kernel obtained by summing the inverse DFT
/// of the Hann transfer term by term.
fn direct_mollify(n: usize, cutoff: f64, x: &[f64]) -> Vec<f64> {
    let mut kernel = vec![0.0; n * n];
    for m1 in 0..n {
        for m2 in 0..n {
            let mut acc = 0.0;
            for k1 in 0..n {
                for k2 in 0..n {
                    let nu = (folded(k1, n).powi(2) + folded(k2, n).powi(2)).sqrt();
                    let phase = 2.0 * PI * ((k1 * m1 + k2 * m2) % n) as f64 / n as f64;
                    acc += hann(nu, cutoff) * phase.cos();
                }
            }
            kernel[m1 * n + m2] = acc / (n * n) as f64;
        }
    }
    let mut y = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for p in 0..n {
                for q in 0..n {
                    acc += kernel[((i + n - p) % n) * n + (j + n - q) % n] * x[p * n + q];
                }
            }
            y[i * n + j] = acc;
        }
    }
    y
}

#[test]
fn mollifier_matches_direct_convolution() {
    for (n, cutoff) in [(8, 0.5), (8, 1.0), (6, 0.7), (10, 0.35)] {
        let c = Mollifier::new(MollifierSpec::hann(n, cutoff)).unwrap();
        let mut rng = cursor("mollifier-direct", n as u64);
        let x = normal_vec(&mut rng, n * n);
        let err = rel_diff(&c.forward(&x).unwrap(), &direct_mollify(n, cutoff, &x));
        assert!(err < 1e-12, "n={n} cutoff={cutoff}: {err:e}");
    }
}

#[test]
fn mollifier_spectrum_in_unit_interval() {
    for n in [8, 16] {
        for cutoff in [0.3, 0.5, 0.8, 1.0] {
            let c = Mollifier::new(MollifierSpec::hann(n, cutoff)).unwrap();
            let dense = to_na(&materialize_dense(&c, 1 << 20).unwrap());
            assert!((&dense - dense.transpose()).norm() < 1e-12);
            let mut eig: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            assert!(eig[0] >= -1e-12 && eig[eig.len() - 1] <= 1.0 + 1e-12, "n={n} cutoff={cutoff}");
            let mut transfer = c.transfer().to_vec();
            transfer.sort_by(f64::total_cmp);
            for (e, t) in eig.iter().zip(&transfer) {
                assert!((e - t).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn mollifier_and_highpass_commute_and_sum_to_identity() {
    for n in [8, 16] {
        let spec = MollifierSpec::hann(n, 0.6);
        let c = Mollifier::new(spec).unwrap();
        let h = HighPass::new(spec).unwrap();
        let mut rng = cursor("commute", n as u64);
        for _ in 0..5 {
            let x = normal_vec(&mut rng, n * n);
            let ch = c.forward(&h.forward(&x).unwrap()).unwrap();
            let hc = h.forward(&c.forward(&x).unwrap()).unwrap();
            let diff: Vec<f64> = ch.iter().zip(&hc).map(|(a, b)| a - b).collect();
            assert!(norm(&diff) <= 1e-10 * norm(&x));
            let sum: Vec<f64> = c.forward(&x).unwrap().iter().zip(h.forward(&x).unwrap()).map(|(a, b)| a + b).collect();
            assert!(rel_diff(&sum, &x) < 1e-12);
            let y = normal_vec(&mut rng, n * n);
            for map in [&c as &dyn LinearMap, &h] {
                let lhs = dot(&map.forward(&x).unwrap(), &y);
                let rhs = dot(&x, &map.adjoint(&y).unwrap());
                assert!((lhs - rhs).abs() <= 1e-10 * norm(&x) * norm(&y));
            }
        }
    }
}
