#![allow(dead_code)]

use mollify_core::rng::{CounterRng, RngCursor};
use mollify_core::Matrix;
use nalgebra::DMatrix;

pub fn cursor(label: &str, seed: u64) -> RngCursor {
    RngCursor::new(CounterRng::new(seed).stream(label))
}

pub fn normal_vec(c: &mut RngCursor, len: usize) -> Vec<f64> {
    (0..len).map(|_| c.normal()).collect()
}

pub fn gaussian(c: &mut RngCursor, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| c.normal())
}

/// `rows x cols` matrix of rank `rank`, built as a product of Gaussian factors.
pub fn low_rank(c: &mut RngCursor, rows: usize, cols: usize, rank: usize) -> Matrix {
    gaussian(c, rows, rank).matmul(&gaussian(c, rank, cols)).unwrap()
}

pub fn symmetric(c: &mut RngCursor, n: usize) -> Matrix {
    let a = gaussian(c, n, n);
    Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Moore-Penrose inverse from nalgebra's SVD, with the usual
/// `max(m, n) · eps · s_max` cutoff.
pub fn na_pinv(m: &Matrix) -> DMatrix<f64> {
    let a = to_na(m);
    let s_max = a.clone().svd(false, false).singular_values.max();
    let cutoff = m.rows().max(m.cols()) as f64 * f64::EPSILON * s_max;
    a.pseudo_inverse(cutoff).unwrap()
}

pub fn na_vec(v: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(v)
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
