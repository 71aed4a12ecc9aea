//! Shared fixtures for unit tests.

use rand::Rng as _;

use crate::data::{Dataset, SparseMatrix};
use crate::loss::{Loss, Problem, Regularizer};
use crate::rng::{self, purpose, Rng};

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

pub fn random_problem(d: usize, n: usize, loss: Loss, lambda: f64, seed: u64) -> Problem {
    let mut r = rng::stream(seed, purpose::DATA);
    let x = random_matrix(d, n, 0.5, true, &mut r);
    let y = (0..n)
        .map(|_| match loss {
            Loss::Quadratic => r.random::<f64>() * 2.0 - 1.0,
            _ if r.random::<bool>() => 1.0,
            _ => -1.0,
        })
        .collect();
    Problem::new(Dataset::new(x, y).unwrap(), loss, Regularizer::L2, lambda).unwrap()
}

/// Closed-form ridge solution `(X X^T/n + lambda I)^{-1} X y / n`.
pub fn ridge(p: &Problem) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let x = p.data.x.to_dense();
    let n = p.n() as f64;
    let a = &x * x.transpose() / n + DMatrix::identity(p.d(), p.d()) * p.lambda;
    let b = &x * DVector::from_vec(p.data.y.clone()) / n;
    a.lu().solve(&b).unwrap().as_slice().to_vec()
}
