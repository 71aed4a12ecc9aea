#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use sparsecd::data::{Dataset, SparseMatrix};
use sparsecd::loss::{Loss, Problem, Regularizer};
use sparsecd::rng::Rng;

/// Entries uniform in `(0, 1]` (or `[-1, 1)` when `signed`), no empty columns.
pub fn random_matrix(
    d: usize,
    n: usize,
    density: f64,
    signed: bool,
    rng: &mut Rng,
) -> SparseMatrix {
    let mut cols = Vec::with_capacity(n);
    for _ in 0..n {
        let mut c = Vec::new();
        for i in 0..d {
            if rng.random::<f64>() < density {
                let u: f64 = rng.random();
                c.push((i, if signed { 2.0 * u - 1.0 } else { 1.0 - u }));
            }
        }
        if c.is_empty() {
            c.push((rng.random_range(0..d), 1.0));
        }
        cols.push(c);
    }
    SparseMatrix::from_columns(d, cols).unwrap()
}

/// Quadratic-loss problem; labels uniform in `[-1, 1]`, column `j` scaled by `scale(j)`.
pub fn ridge_problem(
    d: usize,
    n: usize,
    lambda: f64,
    rng: &mut Rng,
    scale: impl Fn(usize, &mut Rng) -> f64,
) -> Problem {
    let x = random_matrix(d, n, 0.5, true, rng);
    let t: Vec<(usize, usize, f64)> = x.triplets();
    let s: Vec<f64> = (0..n).map(|j| scale(j, rng)).collect();
    let t: Vec<_> = t.into_iter().map(|(i, j, v)| (i, j, v * s[j])).collect();
    let x = SparseMatrix::from_triplets(d, n, &t).unwrap();
    let y = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    Problem::new(
        Dataset::new(x, y).unwrap(),
        Loss::Quadratic,
        Regularizer::L2,
        lambda,
    )
    .unwrap()
}

/// `w* = (X X^T/n + lambda I)^{-1} X y / n` and `a* = y - X^T w*`.
pub fn ridge_optimum(p: &Problem) -> (Vec<f64>, Vec<f64>) {
    let x = p.data.x.to_dense();
    let n = p.n() as f64;
    let a = &x * x.transpose() / n + DMatrix::identity(p.d(), p.d()) * p.lambda;
    let y = DVector::from_vec(p.data.y.clone());
    let w = a.lu().solve(&(&x * &y / n)).unwrap();
    let alpha = &y - x.transpose() * &w;
    (w.as_slice().to_vec(), alpha.as_slice().to_vec())
}
