//! Primal versus dual coordinate descent: per-iteration cost, iteration
//! bounds and total complexity, plus the extremal theory for binary data.

use serde::{Deserialize, Serialize};

use crate::data::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Primal,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SerialKind {
    Uniform,
    Importance,
}

/// `sum_i ||X_i:||_0 ||X_i:||^2`
pub fn c_p(x: &SparseMatrix) -> f64 {
    let s = x.row_stats();
    s.nnz
        .iter()
        .zip(&s.norms_sq)
        .map(|(&k, &v)| k as f64 * v)
        .sum()
}

/// `sum_j ||X_:j||_0 ||X_:j||^2`
pub fn c_d(x: &SparseMatrix) -> f64 {
    let s = x.col_stats();
    s.nnz
        .iter()
        .zip(&s.norms_sq)
        .map(|(&k, &v)| k as f64 * v)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaceoffReport {
    pub d: usize,
    pub n: usize,
    pub nnz: usize,
    pub c_p: f64,
    pub c_d: f64,
    /// Expected nonzeros touched per iteration.
    pub w_p: f64,
    pub w_d: f64,
    /// Iteration bounds without the log factor.
    pub k_p: f64,
    pub k_d: f64,
    pub t_p: f64,
    pub t_d: f64,
    pub ratio: f64,
    pub recommended: Side,
    pub sampling: SerialKind,
    pub lambda: f64,
    pub gamma: f64,
}

/// `(max_i s_i/(p_i nlg)) * sum_i p_i w_i` with `s_i = u_i + nlg`: the
/// total complexity of a serial sampling `p` with per-coordinate costs `w`.
pub fn serial_total(u: &[f64], cost: &[usize], p: &[f64], nlg: f64) -> Result<(f64, f64)> {
    if p.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::invalid("probabilities must be positive"));
    }
    let k = u
        .iter()
        .zip(p)
        .map(|(&ui, &q)| (ui + nlg) / (q * nlg))
        .fold(0.0, f64::max);
    let w = cost.iter().zip(p).map(|(&c, &q)| c as f64 * q).sum();
    Ok((k, w))
}

/// `p_i = (u_i + nlg) / sum_l (u_l + nlg)` on the chosen side.
pub fn optimal_serial_probs(x: &SparseMatrix, lambda: f64, gamma: f64, side: Side) -> Vec<f64> {
    let nlg = x.n() as f64 * lambda * gamma;
    let u = match side {
        Side::Primal => x.row_stats().norms_sq,
        Side::Dual => x.col_stats().norms_sq,
    };
    let total: f64 = u.iter().map(|v| v + nlg).sum();
    u.iter().map(|v| (v + nlg) / total).collect()
}

pub fn total_complexities(
    x: &SparseMatrix,
    lambda: f64,
    gamma: f64,
    sampling: SerialKind,
) -> Result<FaceoffReport> {
    if !(lambda > 0.0) || !(gamma > 0.0) {
        return Err(Error::invalid("lambda and gamma must be positive"));
    }
    let rows = x.row_stats();
    let cols = x.col_stats();
    if let Some(i) = rows.nnz.iter().position(|&k| k == 0) {
        return Err(Error::invalid(format!(
            "row {i} is zero; the comparison needs every row and column nonzero"
        )));
    }
    if let Some(j) = cols.nnz.iter().position(|&k| k == 0) {
        return Err(Error::invalid(format!(
            "column {j} is zero; the comparison needs every row and column nonzero"
        )));
    }
    let (d, n) = (x.d(), x.n());
    let nlg = n as f64 * lambda * gamma;
    let (p, q) = match sampling {
        SerialKind::Uniform => (vec![1.0 / d as f64; d], vec![1.0 / n as f64; n]),
        SerialKind::Importance => (
            optimal_serial_probs(x, lambda, gamma, Side::Primal),
            optimal_serial_probs(x, lambda, gamma, Side::Dual),
        ),
    };
    let (k_p, w_p) = serial_total(&rows.norms_sq, &rows.nnz, &p, nlg)?;
    let (k_d, w_d) = serial_total(&cols.norms_sq, &cols.nnz, &q, nlg)?;
    let (t_p, t_d) = (k_p * w_p, k_d * w_d);
    Ok(FaceoffReport {
        d,
        n,
        nnz: x.nnz(),
        c_p: c_p(x),
        c_d: c_d(x),
        w_p,
        w_d,
        k_p,
        k_d,
        t_p,
        t_d,
        ratio: t_p / t_d,
        recommended: if t_p <= t_d { Side::Primal } else { Side::Dual },
        sampling,
        lambda,
        gamma,
    })
}

/// `T_P / T_D` under importance sampling from summary statistics alone.
pub fn importance_ratio(nnz: f64, c_p: f64, c_d: f64, nlg: f64) -> f64 {
    (nnz + c_p / nlg) / (nnz + c_d / nlg)
}

/// `b floor(a / b)`
fn round_down(a: u128, b: u128) -> u128 {
    b * (a / b)
}

fn check_alpha(alpha: u64, d: u64, n: u64) -> Result<()> {
    if d == 0 || n == 0 || alpha < d.max(n) || alpha > d * n {
        return Err(Error::invalid(format!(
            "alpha = {alpha} must lie in [max(d, n), d n] for d = {d}, n = {n}"
        )));
    }
    Ok(())
}

/// `L(alpha, n) = (a^2 + (alpha - a)(2a + n)) / n` with `a = n floor(alpha/n)`:
/// the least `sum` of squared counts when `alpha` nonzeros fill `n` lines.
pub fn lower_l(alpha: u64, n: u64) -> u128 {
    let (al, n) = (alpha as u128, n as u128);
    let a = round_down(al, n);
    (a * a + (al - a) * (2 * a + n)) / n
}

/// `U(alpha, p, q) = (q + 1) r + p - 1 + (alpha - p + 1 - r)^2` with
/// `r = (q - 1) floor((alpha - p)/(q - 1))`; equals `p` when `q = 1`.
pub fn upper_u(alpha: u64, p: u64, q: u64) -> u128 {
    if q == 1 {
        return p as u128;
    }
    let (al, p, q) = (alpha as u128, p as u128, q as u128);
    let r = round_down(al - p, q - 1);
    let t = al - p + 1 - r;
    (q + 1) * r + p - 1 + t * t
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinaryBounds {
    /// `min C_D = L(alpha, n)`
    pub min_c_d: u128,
    /// `min C_P = L(alpha, d)`
    pub min_c_p: u128,
    /// `max C_D = U(alpha, n, d)`
    pub max_c_d: u128,
    /// `max C_P = U(alpha, d, n)`
    pub max_c_p: u128,
    /// `R(alpha, d, n) = max C_P / min C_D`
    pub r_dn: f64,
    /// `R(alpha, n, d) = max C_D / min C_P`
    pub r_nd: f64,
}

pub fn binary_bounds(alpha: u64, d: u64, n: u64) -> Result<BinaryBounds> {
    check_alpha(alpha, d, n)?;
    let min_c_d = lower_l(alpha, n);
    let min_c_p = lower_l(alpha, d);
    let max_c_d = upper_u(alpha, n, d);
    let max_c_p = upper_u(alpha, d, n);
    Ok(BinaryBounds {
        min_c_d,
        min_c_p,
        max_c_d,
        max_c_p,
        r_dn: max_c_p as f64 / min_c_d as f64,
        r_nd: max_c_d as f64 / min_c_p as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regime {
    /// `d <= n <= d^2/4 - 3d/2 - 1`: some matrix has `C_P < C_D`.
    pub primal_can_win: bool,
    /// `n <= d <= n^2/4 - 3n/2 - 1`: some matrix has `C_D < C_P`.
    pub dual_can_win: bool,
    /// `d >= n` and `alpha >= n^2 + 3n`: every matrix has `C_P <= C_D`.
    pub primal_always_at_alpha: bool,
    /// `n >= d` and `alpha >= d^2 + 3d`: every matrix has `C_D <= C_P`.
    pub dual_always_at_alpha: bool,
    /// `d >= n^2 + 3n`
    pub primal_always: bool,
    /// `n >= d^2 + 3d`
    pub dual_always: bool,
    pub bounds: BinaryBounds,
}

pub fn check_regime_theorems(d: u64, n: u64, alpha: u64) -> Result<Regime> {
    let bounds = binary_bounds(alpha, d, n)?;
    let (df, nf) = (d as f64, n as f64);
    Ok(Regime {
        primal_can_win: d <= n && nf <= df * df / 4.0 - 1.5 * df - 1.0,
        dual_can_win: n <= d && df <= nf * nf / 4.0 - 1.5 * nf - 1.0,
        primal_always_at_alpha: d >= n && alpha >= n * n + 3 * n,
        dual_always_at_alpha: n >= d && alpha >= d * d + 3 * d,
        primal_always: d >= n * n + 3 * n,
        dual_always: n >= d * d + 3 * d,
        bounds,
    })
}

/// `X(a, b, c)`: `c` in the corner, `a` down the rest of the first column,
/// `b` along the rest of the first row.
pub fn worst_case_general(d: usize, n: usize, a: f64, b: f64, c: f64) -> Result<SparseMatrix> {
    if d == 0 || n == 0 || a == 0.0 || b == 0.0 || c == 0.0 {
        return Err(Error::invalid("need d, n >= 1 and nonzero a, b, c"));
    }
    let mut t = vec![(0, 0, c)];
    t.extend((1..d).map(|i| (i, 0, a)));
    t.extend((1..n).map(|j| (0, j, b)));
    SparseMatrix::from_triplets(d, n, &t)
}

/// Binary matrix with `alpha` nonzeros reaching the largest `C_P` and the
/// smallest `C_D` at once.
pub fn worst_case_binary(d: usize, n: usize, alpha: usize) -> Result<SparseMatrix> {
    check_alpha(alpha as u64, d as u64, n as u64)?;
    // row counts: `full` rows of n, one row of `partial`, the rest single
    let counts: Vec<usize> = if n == 1 {
        vec![1; d]
    } else {
        let full = (alpha - d) / (n - 1);
        let partial = alpha - d + 1 - (n - 1) * full;
        let mut c = vec![n; full];
        if full < d {
            c.push(partial);
            c.resize(d, 1);
        }
        c
    };
    let mut t = Vec::with_capacity(alpha);
    let mut next = 0;
    for (i, &k) in counts.iter().enumerate() {
        if k == n {
            t.extend((0..n).map(|j| (i, j, 1.0)));
        } else {
            // cyclic placement keeps column counts within one of each other
            for _ in 0..k {
                t.push((i, next, 1.0));
                next = (next + 1) % n;
            }
        }
    }
    SparseMatrix::from_triplets(d, n, &t)
}
