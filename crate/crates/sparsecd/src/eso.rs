//! ESO parameters for each sampling, smoothness over blocks, and a Monte
//! Carlo check of the ESO inequality
//! `E ||sum_{j in S} h_j X_j||^2 <= sum_j p_j v_j h_j^2`.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::SparseMatrix;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sampling::{binomial, Context, Partition, Rule, Sampler, Sampling};

/// `v_j = ||X_j||^2`
pub fn v_serial(x: &SparseMatrix) -> Vec<f64> {
    x.col_stats().norms_sq
}

/// `u_i = ||X_{i:}||^2`
pub fn u_serial(x: &SparseMatrix) -> Vec<f64> {
    x.row_stats().norms_sq
}

/// `v_j = sum_i (1 + (|J_i| - 1)(tau - 1)/(n - 1)) X_ij^2`
pub fn v_tau_nice(x: &SparseMatrix, tau: usize) -> Vec<f64> {
    let n = x.n();
    if n <= 1 || tau <= 1 {
        return v_serial(x);
    }
    let c = (tau - 1) as f64 / (n - 1) as f64;
    let beta: Vec<f64> = (0..x.d())
        .map(|i| 1.0 + (x.row_nnz(i) as f64 - 1.0) * c)
        .collect();
    weighted_col_norms(x, |i, _| beta[i])
}

fn weighted_col_norms(x: &SparseMatrix, w: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    (0..x.n())
        .map(|j| {
            let (idx, val) = x.col(j);
            idx.iter().zip(val).map(|(&i, &v)| w(i, j) * v * v).sum()
        })
        .collect()
}

/// Number of buckets that row `i`'s support touches.
fn row_spread(x: &SparseMatrix, b: &Partition) -> Vec<usize> {
    let mut seen = vec![usize::MAX; b.len()];
    (0..x.d())
        .map(|i| {
            let mut c = 0;
            for &j in x.row(i).0 {
                let l = b.owner(j);
                if seen[l] != i {
                    seen[l] = i;
                    c += 1;
                }
            }
            c
        })
        .collect()
}

/// Bucket sampling: `v_j = sum_i (1 + (1 - 1/w_i) delta_i) X_ij^2` with
/// `delta_i = sum_{j in J_i} p_j` and `w_i` the number of buckets meeting `J_i`.
pub fn v_bucket(x: &SparseMatrix, b: &Partition, p: &[f64]) -> Vec<f64> {
    let spread = row_spread(x, b);
    let beta: Vec<f64> = (0..x.d())
        .map(|i| {
            if spread[i] == 0 {
                return 1.0;
            }
            let delta: f64 = x.row(i).0.iter().map(|&j| p[j]).sum();
            1.0 + (1.0 - 1.0 / spread[i] as f64) * delta
        })
        .collect();
    weighted_col_norms(x, |i, _| beta[i])
}

/// Bucket sampling with uniform `p` and `tau` buckets:
/// `v_j = sum_i (1 + (1 - 1/w_i)(tau |J_i| / n)) X_ij^2`.
pub fn v_unif(x: &SparseMatrix, b: &Partition) -> Vec<f64> {
    let spread = row_spread(x, b);
    let ratio = b.len() as f64 / x.n() as f64;
    let beta: Vec<f64> = (0..x.d())
        .map(|i| {
            if spread[i] == 0 {
                return 1.0;
            }
            1.0 + (1.0 - 1.0 / spread[i] as f64) * ratio * x.row_nnz(i) as f64
        })
        .collect();
    weighted_col_norms(x, |i, _| beta[i])
}

/// Chunked sampling (tau of k groups, uniformly):
/// `v_j = sum_i (1 + (w_i - 1)(tau - 1)/(k - 1)) |J_i cap G(j)| X_ij^2`,
/// where `w_i` counts the groups meeting `J_i`.
pub fn v_chunked(x: &SparseMatrix, g: &Partition, tau: usize) -> Vec<f64> {
    let k = g.len();
    let spread = row_spread(x, g);
    let c = if k > 1 {
        (tau as f64 - 1.0) / (k as f64 - 1.0)
    } else {
        0.0
    };
    // |J_i cap G_l| for each stored (i, j)
    let mut overlap = std::collections::HashMap::new();
    for i in 0..x.d() {
        for &j in x.row(i).0 {
            *overlap.entry((i, g.owner(j))).or_insert(0usize) += 1;
        }
    }
    weighted_col_norms(x, |i, j| {
        let beta = 1.0 + (spread[i] as f64 - 1.0) * c;
        beta * overlap[&(i, g.owner(j))] as f64
    })
}

/// ESO vector matching a sampling's rule.
pub fn v_for(x: &SparseMatrix, s: &Sampling) -> Result<Vec<f64>> {
    if s.n() != x.n() {
        return Err(Error::invalid("sampling size does not match the matrix"));
    }
    match s.rule() {
        Rule::Serial { .. } => Ok(v_serial(x)),
        Rule::TauNice { tau } => Ok(v_tau_nice(x, *tau)),
        Rule::Bucket { buckets, p } => Ok(v_bucket(x, buckets, p)),
        Rule::Chunked { groups, tau } => Ok(v_chunked(x, groups, *tau)),
        Rule::GreedySerial | Rule::GreedyMinibatch { .. } => {
            Err(Error::invalid("greedy rules have no ESO vector"))
        }
    }
}

/// Primal-side ESO over features; same formulas on `X^T`.
pub fn u_for(x: &SparseMatrix, s: &Sampling) -> Result<Vec<f64>> {
    v_for(&x.transpose(), s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LTau {
    pub value: f64,
    /// False when the trace bound stood in for the exact maximum.
    pub exact: bool,
}

pub const L_TAU_ENUM_LIMIT: f64 = 1e4;

/// `L_tau = max_{|S| = tau} lambda_max(M_S)`, or the sum of the `tau` largest
/// diagonal entries when there are too many subsets.
pub fn l_tau(m: &DMatrix<f64>, tau: usize) -> Result<LTau> {
    let n = m.nrows();
    if tau == 0 || tau > n {
        return Err(Error::invalid(format!("tau = {tau} must lie in 1..={n}")));
    }
    if tau == 1 {
        let v = (0..n).map(|i| m[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
        return Ok(LTau {
            value: v,
            exact: true,
        });
    }
    if binomial(n, tau) <= L_TAU_ENUM_LIMIT {
        let mut best = f64::NEG_INFINITY;
        for s in (0..n).combinations(tau) {
            let ms = DMatrix::from_fn(tau, tau, |a, b| m[(s[a], s[b])]);
            best = best.max(lambda_max_dense(&ms));
        }
        return Ok(LTau {
            value: best,
            exact: true,
        });
    }
    let mut diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    diag.sort_by(|a, b| b.total_cmp(a));
    Ok(LTau {
        value: diag[..tau].iter().sum(),
        exact: false,
    })
}

pub fn lambda_max_dense(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.max()
}

/// `lambda_max(X X^T)`. Exact through the smaller Gram matrix when it is
/// small, otherwise power iteration padded by its last relative change.
pub fn lambda_max_gram(x: &SparseMatrix) -> f64 {
    let (d, n) = (x.d(), x.n());
    if d.min(n) <= 600 {
        let xd = x.to_dense();
        let g = if d <= n {
            &xd * xd.transpose()
        } else {
            xd.transpose() * &xd
        };
        return lambda_max_dense(&g);
    }
    let mut w = vec![1.0 / (d as f64).sqrt(); d];
    let mut est = 0.0;
    let mut change = 1.0;
    for _ in 0..10_000 {
        let z = x.tmul_vec(&w);
        let y = x.mul_vec(&z);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        change = ((norm - est) / norm).abs();
        est = norm;
        w = y.into_iter().map(|v| v / norm).collect();
        if change < 1e-10 {
            break;
        }
    }
    est * (1.0 + change.max(1e-6))
}

/// `max_j ||X_j||^2 / mean_j ||X_j||^2`
pub fn speedup_sigma(x: &SparseMatrix) -> Result<f64> {
    let v = v_serial(x);
    if v.is_empty() {
        return Err(Error::Empty);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if mean == 0.0 {
        return Err(Error::invalid("all columns are zero"));
    }
    Ok(v.iter().cloned().fold(0.0, f64::max) / mean)
}

/// `beta_l = max_{j in B_l} (nlg + s_j)/(nlg + v_unif_j)` where `s = v_bucket(p_star)`.
pub fn beta_factors(
    x: &SparseMatrix,
    b: &Partition,
    p_star: &[f64],
    nlg: f64,
    v_unif: &[f64],
) -> Vec<f64> {
    let s = v_bucket(x, b, p_star);
    b.groups()
        .iter()
        .map(|g| {
            g.iter()
                .map(|&j| (nlg + s[j]) / (nlg + v_unif[j]))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Rate of minibatch importance sampling:
/// `1/theta = max_l beta_l (|B_l| + sum_{j in B_l} v_unif_j / nlg)`.
pub fn theta_tau_importance(x: &SparseMatrix, b: &Partition, nlg: f64) -> f64 {
    let vu = v_unif(x, b);
    let p = crate::sampling::bucket_probs_practical(&vu, nlg, b);
    let beta = beta_factors(x, b, &p, nlg, &vu);
    let inv = b
        .groups()
        .iter()
        .zip(&beta)
        .map(|(g, bl)| bl * (g.len() as f64 + g.iter().map(|&j| vu[j]).sum::<f64>() / nlg))
        .fold(0.0, f64::max);
    1.0 / inv
}

#[derive(Clone, Debug, Serialize)]
pub struct EsoReport {
    pub max_z: f64,
    /// `lhs / rhs` at the worst `h`.
    pub worst_ratio: f64,
    pub trials: usize,
    pub h_draws: usize,
    pub pass: bool,
}

pub const ESO_Z_THRESHOLD: f64 = 3.0;

/// Estimates the ESO left side for random `h` and reports the worst
/// standardized exceedance over the right side.
pub fn eso_mc_check(
    x: &SparseMatrix,
    sampling: &Sampling,
    v: &[f64],
    trials: usize,
    h_draws: usize,
    rng: &mut Rng,
) -> Result<EsoReport> {
    let p = sampling
        .marginals()
        .ok_or_else(|| Error::invalid("ESO check needs a sampling with known marginals"))?;
    if v.len() != x.n() || sampling.n() != x.n() {
        return Err(Error::invalid("ESO vector size mismatch"));
    }
    let mut sampler = Sampler::new(sampling)?;
    let mut max_z = f64::NEG_INFINITY;
    let mut worst_ratio = 0.0;
    let mut acc = vec![0.0; x.d()];
    for k in 0..h_draws {
        // half the draws share one sign, which makes the cross terms add up
        let h: Vec<f64> = (0..x.n())
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                if k % 2 == 1 {
                    g.abs()
                } else {
                    g
                }
            })
            .collect();
        let rhs: f64 = (0..x.n()).map(|j| p[j] * v[j] * h[j] * h[j]).sum();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..trials {
            let block = sampler.draw(Context::None, rng)?;
            let ix = block.indices();
            for &j in &ix {
                x.col_axpy(j, h[j], &mut acc);
            }
            let q: f64 = acc.iter().map(|a| a * a).sum();
            acc.iter_mut().for_each(|a| *a = 0.0);
            sum += q;
            sum_sq += q * q;
        }
        let t = trials as f64;
        let mean = sum / t;
        let var = ((sum_sq / t - mean * mean) * t / (t - 1.0)).max(0.0);
        let se = (var / t).sqrt();
        let z = if se > 0.0 {
            (mean - rhs) / se
        } else if mean > rhs * (1.0 + 1e-12) {
            f64::INFINITY
        } else if mean < rhs * (1.0 - 1e-12) {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        if z > max_z {
            max_z = z;
            worst_ratio = if rhs > 0.0 { mean / rhs } else { f64::INFINITY };
        }
    }
    Ok(EsoReport {
        max_z,
        worst_ratio,
        trials,
        h_draws,
        pass: max_z <= ESO_Z_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::rng::Rng;
    use crate::sampling::{importance_probs, naive_chunks, random_buckets};
    use proptest::prelude::*;
    use rand::Rng as _;

    fn random_matrix(d: usize, n: usize, density: f64, rng: &mut Rng) -> SparseMatrix {
        crate::testutil::random_matrix(d, n, density, false, rng)
    }

    #[test]
    fn serial_examples() {
        let x = SparseMatrix::from_columns(3, vec![vec![(0, 1.0)], vec![(2, 1.0)], vec![(1, 1.0)]])
            .unwrap();
        assert_eq!(v_serial(&x), vec![1.0; 3]);
        let y = SparseMatrix::from_dense(&[vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(v_serial(&y), vec![13.0]);
        assert_eq!(v_serial(&y), y.col_stats().norms_sq);
    }

    #[test]
    fn tau_nice_examples() {
        let x = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(v_tau_nice(&x, 2), vec![2.0, 3.0]);
        assert_eq!(v_tau_nice(&x, 1), v_serial(&x));
        let dense = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.5], vec![3.0, 1.0, 1.0]]).unwrap();
        let v = v_tau_nice(&dense, 3);
        for (a, b) in v.iter().zip(v_serial(&dense)) {
            assert!((a - 3.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn bucket_reductions() {
        let mut rng = stream(4, 2);
        let x = random_matrix(10, 20, 0.3, &mut rng);
        let p: Vec<f64> = vec![1.0 / 20.0; 20];
        assert_eq!(v_bucket(&x, &Partition::whole(20), &p), v_serial(&x));
        let b = random_buckets(20, 4, &mut rng).unwrap();
        let pu: Vec<f64> = vec![0.2; 20];
        let (a, c) = (v_bucket(&x, &b, &pu), v_unif(&x, &b));
        for (s, t) in a.iter().zip(&c) {
            assert!((s - t).abs() < 1e-12);
        }
        // every row inside a single bucket
        let block = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0, 0.0], vec![0.0, 0.0, 3.0, 1.0]])
            .unwrap();
        let bb = Partition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(v_bucket(&block, &bb, &[0.5; 4]), v_serial(&block));
    }

    #[test]
    fn l_tau_examples() {
        let mut rng = stream(9, 2);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
        let m = &a * a.transpose() + DMatrix::identity(6, 6) * 0.1;
        let l1 = l_tau(&m, 1).unwrap();
        assert_eq!(l1.value, (0..6).map(|i| m[(i, i)]).fold(0.0, f64::max));
        let ln = l_tau(&m, 6).unwrap();
        assert!((ln.value - lambda_max_dense(&m)).abs() < 1e-12);
        assert_eq!(l_tau(&DMatrix::identity(5, 5), 3).unwrap().value, 1.0);
        let big = l_tau(&DMatrix::identity(30, 30), 10).unwrap();
        assert!(!big.exact);
        assert_eq!(big.value, 10.0);
        for tau in 1..=6 {
            let l = l_tau(&m, tau).unwrap();
            let mut dg: Vec<f64> = (0..6).map(|i| m[(i, i)]).collect();
            dg.sort_by(|a, b| b.total_cmp(a));
            assert!(l.value <= dg[..tau].iter().sum::<f64>() + 1e-12);
            assert!(l1.value <= l.value + 1e-12 && l.value <= ln.value + 1e-12);
        }
    }

    #[test]
    fn sigma_examples() {
        let x =
            SparseMatrix::from_columns(1, vec![vec![(0, 1.0)], vec![(0, 3f64.sqrt())]]).unwrap();
        assert!((speedup_sigma(&x).unwrap() - 1.5).abs() < 1e-12);
        let y = SparseMatrix::from_dense(&[vec![1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(speedup_sigma(&y).unwrap(), 1.0);
    }

    #[test]
    fn beta_examples() {
        let mut rng = stream(2, 2);
        let ones = SparseMatrix::from_dense(&vec![vec![1.0; 8]; 4]).unwrap();
        let b = random_buckets(8, 2, &mut rng).unwrap();
        let vu = v_unif(&ones, &b);
        let p = crate::sampling::bucket_probs_practical(&vu, 1.0, &b);
        for beta in beta_factors(&ones, &b, &p, 1.0, &vu) {
            assert!((beta - 1.0).abs() < 1e-12);
        }
        let x = random_matrix(20, 60, 0.2, &mut rng);
        let s = Partition::singletons(60);
        let vu = v_unif(&x, &s);
        let p = crate::sampling::bucket_probs_practical(&vu, 0.5, &s);
        assert!(beta_factors(&x, &s, &p, 0.5, &vu)
            .iter()
            .all(|&b| (b - 1.0).abs() < 1e-12));

        // sanity band: beta_l is at least the smallest within-bucket weight ratio
        let b = random_buckets(60, 4, &mut rng).unwrap();
        let vu = v_unif(&x, &b);
        let p = crate::sampling::bucket_probs_practical(&vu, 0.5, &b);
        let beta = beta_factors(&x, &b, &p, 0.5, &vu);
        for (g, bl) in b.groups().iter().zip(beta) {
            let w: Vec<f64> = g.iter().map(|&j| 0.5 + vu[j]).collect();
            let lo = w.iter().cloned().fold(f64::INFINITY, f64::min)
                / w.iter().cloned().fold(0.0, f64::max);
            assert!(bl >= lo && bl.is_finite());
        }
    }

    #[test]
    fn importance_rate_matches_stepsize() {
        let mut rng = stream(6, 2);
        let x = random_matrix(15, 40, 0.3, &mut rng);
        let b = random_buckets(40, 4, &mut rng).unwrap();
        let nlg = 0.3;
        let vu = v_unif(&x, &b);
        let p = crate::sampling::bucket_probs_practical(&vu, nlg, &b);
        let v = v_bucket(&x, &b, &p);
        let direct = crate::primal::dfsdca_stepsize(&p, &v, nlg).unwrap();
        assert!((theta_tau_importance(&x, &b, nlg) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn gram_lambda_max_paths_agree() {
        let mut rng = stream(8, 2);
        let x = random_matrix(700, 650, 0.01, &mut rng);
        let est = lambda_max_gram(&x);
        let xd = x.to_dense();
        let g = xd.transpose() * &xd;
        let want = lambda_max_dense(&g);
        // the iterative path pads upward
        assert!(
            est >= want * (1.0 - 1e-12) && est <= want * (1.0 + 1e-5),
            "{est} vs {want}"
        );
    }

    #[test]
    fn mc_serial_and_negative_control() {
        let mut rng = stream(1, 6);
        let x = random_matrix(10, 20, 0.4, &mut rng);
        let v = v_serial(&x);
        let s = Sampling::serial(importance_probs(&v, 1.0)).unwrap();
        let r = eso_mc_check(&x, &s, &v, 2000, 50, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
        let dense = random_matrix(10, 20, 1.0, &mut rng);
        let b = random_buckets(20, 4, &mut rng).unwrap();
        let p = vec![0.2; 20];
        let s = Sampling::bucket(b.clone(), p.clone()).unwrap();
        let half: Vec<f64> = v_bucket(&dense, &b, &p)
            .into_iter()
            .map(|x| x / 2.0)
            .collect();
        let r = eso_mc_check(&dense, &s, &half, 2000, 20, &mut rng).unwrap();
        assert!(r.max_z > 3.0, "{r:?}");
    }

    #[test]
    fn mc_chunked_and_tau_nice() {
        let mut rng = stream(2, 6);
        for density in [0.2, 0.9] {
            let x = random_matrix(10, 20, density, &mut rng);
            let s = Sampling::tau_nice(20, 5).unwrap();
            let r = eso_mc_check(&x, &s, &v_tau_nice(&x, 5), 2000, 30, &mut rng).unwrap();
            assert!(r.pass, "{r:?}");
            let nnz: Vec<usize> = (0..20).map(|j| x.col_nnz(j)).collect();
            let g = naive_chunks(&nnz).unwrap();
            let tau = (g.len() / 2).max(1);
            let s = Sampling::chunked(g.clone(), tau).unwrap();
            let r = eso_mc_check(&x, &s, &v_chunked(&x, &g, tau), 2000, 30, &mut rng).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn tau_nice_monotone(seed in 0u64..500, density in 0.1f64..0.9) {
            let mut rng = stream(seed, 2);
            let x = random_matrix(8, 12, density, &mut rng);
            let mut prev = v_tau_nice(&x, 1);
            for tau in 2..=12 {
                let v = v_tau_nice(&x, tau);
                prop_assert!(v.iter().zip(&prev).all(|(a, b)| *a >= *b - 1e-12));
                prev = v;
            }
        }

        #[test]
        fn bucket_eso_holds(seed in 0u64..500, density in 0.1f64..0.9, ti in 0usize..3) {
            let tau = [2, 4, 5][ti];
            let mut rng = stream(seed, 2);
            let x = random_matrix(10, 20, density, &mut rng);
            let b = random_buckets(20, tau, &mut rng).unwrap();
            let vu = v_unif(&x, &b);
            let p = crate::sampling::bucket_probs_practical(&vu, 1.0, &b);
            let s = Sampling::bucket(b.clone(), p.clone()).unwrap();
            let r = eso_mc_check(&x, &s, &v_bucket(&x, &b, &p), 1000, 10, &mut rng).unwrap();
            prop_assert!(r.pass, "{:?}", r);
        }
    }
}
