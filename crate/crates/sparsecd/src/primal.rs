//! Primal methods: dual-free SDCA with arbitrary sampling, and NSync
//! (parallel coordinate descent over features), plus the simulated
//! parallel cost model.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::eso;
use crate::loss::Problem;
use crate::rng::{self, purpose};
use crate::sampling::{Block, Context, Rule, Sampler, Sampling};
use crate::trace::{unit_cost, Recorder, RunOptions, Status, Trace};

/// `1/theta = max_j (1/p_j + v_j/(p_j nlg))`
pub fn dfsdca_stepsize(p: &[f64], v: &[f64], nlg: f64) -> Result<f64> {
    if p.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::invalid(
            "dfSDCA needs every marginal probability positive",
        ));
    }
    let inv = p
        .iter()
        .zip(v)
        .map(|(&q, &vj)| (1.0 + vj / nlg) / q)
        .fold(0.0, f64::max);
    Ok(1.0 / inv)
}

/// `(lambda/2)||w - w*||^2 + (gamma/2n)||alpha - alpha*||^2`
pub fn dfsdca_potential(
    problem: &Problem,
    w: &[f64],
    alpha: &[f64],
    w_star: &[f64],
    a_star: &[f64],
) -> f64 {
    let dw: f64 = w.iter().zip(w_star).map(|(a, b)| (a - b) * (a - b)).sum();
    let da: f64 = alpha
        .iter()
        .zip(a_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    0.5 * problem.lambda * dw + 0.5 * problem.gamma() / problem.n() as f64 * da
}

/// Dual-free SDCA. Traces `P(w)`, the gap `P(w) - D(alpha)` (meaningful
/// because `w = X alpha/(lambda n)` holds throughout), the gradient norm, and
/// the potential `E_t` when `opts.optimum` is given.
pub fn dfsdca_run(problem: &Problem, sampling: &Sampling, opts: &RunOptions) -> Result<Trace> {
    let v = eso::v_for(&problem.data.x, sampling)?;
    dfsdca_run_with(problem, sampling, v, opts)
}

pub fn dfsdca_run_with(
    problem: &Problem,
    sampling: &Sampling,
    v: Vec<f64>,
    opts: &RunOptions,
) -> Result<Trace> {
    problem.require_l2()?;
    let p = sampling
        .marginals()
        .ok_or_else(|| Error::invalid("dfSDCA needs a sampling with known marginals"))?;
    if sampling.n() != problem.n() || v.len() != problem.n() {
        return Err(Error::invalid(
            "sampling does not match the number of examples",
        ));
    }
    let x = &problem.data.x;
    let n = problem.n();
    let ln = problem.lambda * n as f64;
    let theta = dfsdca_stepsize(&p, &v, problem.nlg())?;

    let mut alpha = opts.init.clone().unwrap_or_else(|| vec![0.0; n]);
    if alpha.len() != n {
        return Err(Error::invalid("initial alpha has the wrong length"));
    }
    let mut w = problem.primal_from_dual(&alpha);
    let mut rec = Recorder::new(opts, x.nnz(), sampling.expected_size(), n);
    let mut rng = rng::stream(opts.seed, purpose::SAMPLING);
    let mut sampler = Sampler::new(sampling)?;

    let checkpoint =
        |rec: &mut Recorder, w: &[f64], alpha: &[f64], iter: u64, drift: Option<f64>| {
            let primal = problem.primal_value(w);
            let dual = problem.dual_value_with(alpha, w);
            let mut extra = BTreeMap::new();
            let g = problem.primal_gradient(w);
            extra.insert(
                "grad_norm".to_string(),
                g.iter().map(|a| a * a).sum::<f64>().sqrt(),
            );
            if let Some(o) = &opts.optimum {
                extra.insert(
                    "potential".to_string(),
                    dfsdca_potential(problem, w, alpha, &o.w, &o.alpha),
                );
            }
            if let Some(d) = drift {
                extra.insert("drift".to_string(), d);
            }
            rec.record(iter, primal, Some(dual), extra)
        };

    if let Some(s) = checkpoint(&mut rec, &w, &alpha, 0, None) {
        let mut t = rec.finish(s);
        t.theta = Some(theta);
        return Ok(t);
    }
    let mut deltas = Vec::new();
    let mut status = Status::BudgetExhausted;
    for iter in 1..=rec.max_iters {
        let block = sampler.draw(Context::None, &mut rng)?;
        deltas.clear();
        for j in block.indices() {
            let s = x.col_dot(j, &w);
            rec.meter.visit(x.col_nnz(j));
            deltas.push((j, problem.loss.deriv(s, problem.data.y[j]) + alpha[j]));
        }
        for &(j, d) in &deltas {
            alpha[j] -= theta / p[j] * d;
            x.col_axpy(j, -theta / (ln * p[j]) * d, &mut w);
            rec.meter.ops(x.col_nnz(j) as u64);
        }
        rec.meter.parallel(&block, |j| x.col_nnz(j));
        let bad = deltas.iter().any(|(_, d)| !d.is_finite());
        if rec.due(iter) || bad {
            let drift = (iter % rec.epoch_len == 0).then(|| {
                let fresh = problem.primal_from_dual(&alpha);
                let diff = fresh
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let norm = fresh.iter().map(|a| a * a).sum::<f64>().sqrt();
                w = fresh;
                diff / (1.0 + norm)
            });
            if let Some(s) = checkpoint(&mut rec, &w, &alpha, iter, drift) {
                status = s;
                break;
            }
            if bad {
                status = Status::NonFinite;
                break;
            }
        }
    }
    let mut t = rec.finish(status);
    t.theta = Some(theta);
    t.notes.insert("method".into(), "dfsdca".into());
    t.notes.insert("sampling".into(), sampling.name().into());
    Ok(t)
}

/// Primal ESO vector for NSync: the rule's formula on `X^T`, except the
/// full batch, which uses `lambda_max(X X^T)` for every feature.
pub fn nsync_u(problem: &Problem, sampling: &Sampling) -> Result<Vec<f64>> {
    let d = problem.d();
    if sampling.n() != d {
        return Err(Error::invalid("NSync sampling must range over features"));
    }
    match sampling.rule() {
        Rule::TauNice { tau } if *tau == d => Ok(vec![eso::lambda_max_gram(&problem.data.x); d]),
        _ => eso::u_for(&problem.data.x, sampling),
    }
}

/// `max_i (u_i + nlg)/(p_i nlg)`: iterations per unit of log-accuracy.
pub fn nsync_rate(p: &[f64], u: &[f64], nlg: f64) -> Result<f64> {
    if p.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::invalid(
            "NSync rate needs every probability positive",
        ));
    }
    Ok(p.iter()
        .zip(u)
        .map(|(&q, &ui)| (ui + nlg) / (q * nlg))
        .fold(0.0, f64::max))
}

/// NSync on the primal. Traces `P(w)` and the gap against the dual point
/// `alpha = -phi'(X^T w)`.
pub fn nsync_run(problem: &Problem, sampling: &Sampling, opts: &RunOptions) -> Result<Trace> {
    let u = nsync_u(problem, sampling)?;
    nsync_run_with(problem, sampling, u, opts)
}

pub fn nsync_run_with(
    problem: &Problem,
    sampling: &Sampling,
    u: Vec<f64>,
    opts: &RunOptions,
) -> Result<Trace> {
    problem.require_l2()?;
    let x = &problem.data.x;
    let (d, n) = (problem.d(), problem.n());
    if sampling.n() != d || u.len() != d {
        return Err(Error::invalid("NSync sampling must range over features"));
    }
    let nlg = problem.nlg();
    let gn = problem.gamma() * n as f64;
    let mut w = opts.init.clone().unwrap_or_else(|| vec![0.0; d]);
    if w.len() != d {
        return Err(Error::invalid("initial w has the wrong length"));
    }
    let mut z = x.tmul_vec(&w);
    let mut rec = Recorder::new(opts, x.nnz(), sampling.expected_size(), d);
    let mut rng = rng::stream(opts.seed, purpose::SAMPLING);
    let mut sampler = Sampler::new(sampling)?;
    let mut notes = BTreeMap::new();
    if let Some(p) = sampling.marginals() {
        if p.iter().any(|&q| q == 0.0) {
            notes.insert(
                "warning".to_string(),
                "some feature has zero probability".to_string(),
            );
        }
        if let Ok(k) = nsync_rate(&p, &u, nlg) {
            notes.insert("rate".to_string(), k.to_string());
        }
    }

    let checkpoint = |rec: &mut Recorder, w: &[f64], z: &[f64], iter: u64, drift: Option<f64>| {
        let primal = problem.primal_value_from_margins(z, w);
        let alpha: Vec<f64> = z
            .iter()
            .zip(&problem.data.y)
            .map(|(&s, &y)| -problem.loss.deriv(s, y))
            .collect();
        let dual = problem.dual_value(&alpha).ok();
        let mut extra = BTreeMap::new();
        if let Some(dr) = drift {
            extra.insert("drift".to_string(), dr);
        }
        rec.record(iter, primal, dual, extra)
    };

    let mut status = Status::BudgetExhausted;
    if let Some(s) = checkpoint(&mut rec, &w, &z, 0, None) {
        status = s;
    } else {
        let mut steps = Vec::new();
        for iter in 1..=rec.max_iters {
            let block = sampler.draw(Context::None, &mut rng)?;
            steps.clear();
            for i in block.indices() {
                let (idx, val) = x.row(i);
                let g: f64 = idx
                    .iter()
                    .zip(val)
                    .map(|(&j, &v)| problem.loss.deriv(z[j], problem.data.y[j]) * v)
                    .sum::<f64>()
                    / n as f64
                    + problem.lambda * w[i];
                rec.meter.visit(idx.len());
                steps.push((i, -gn / (u[i] + nlg) * g));
            }
            for &(i, dlt) in &steps {
                w[i] += dlt;
                x.row_axpy(i, dlt, &mut z);
                rec.meter.ops(x.row_nnz(i) as u64);
            }
            rec.meter.parallel(&block, |i| x.row_nnz(i));
            let bad = steps.iter().any(|(_, s)| !s.is_finite());
            if rec.due(iter) || bad {
                let drift = (iter % rec.epoch_len == 0).then(|| {
                    let fresh = x.tmul_vec(&w);
                    let diff = fresh
                        .iter()
                        .zip(&z)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let norm = fresh.iter().map(|a| a * a).sum::<f64>().sqrt();
                    z = fresh;
                    diff / (1.0 + norm)
                });
                if let Some(s) = checkpoint(&mut rec, &w, &z, iter, drift) {
                    status = s;
                    break;
                }
                if bad {
                    status = Status::NonFinite;
                    break;
                }
            }
        }
    }
    let mut t = rec.finish(status);
    t.notes = notes;
    t.notes.insert("method".into(), "nsync".into());
    t.notes.insert("sampling".into(), sampling.name().into());
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParallelMode {
    /// Every sampled coordinate is its own unit.
    Standard,
    /// Units as the block groups them (chunks).
    Chunked,
}

/// Cumulative simulated parallel time: each iteration costs its slowest unit.
pub fn simulated_parallel_cost(blocks: &[Block], nnz: &[usize], mode: ParallelMode) -> Vec<f64> {
    let mut acc = 0.0;
    blocks
        .iter()
        .map(|b| {
            let c = match mode {
                ParallelMode::Chunked => unit_cost(b, &|j| nnz[j]),
                ParallelMode::Standard => {
                    b.indices().iter().map(|&j| nnz[j]).max().unwrap_or(0) as f64
                }
            };
            acc += c;
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::Loss;
    use crate::sampling::{importance_probs, naive_chunks, Partition};
    use crate::trace::Optimum;

    fn problem(d: usize, n: usize, lambda: f64, seed: u64) -> Problem {
        crate::testutil::random_problem(d, n, Loss::Quadratic, lambda, seed)
    }

    fn ridge(p: &Problem) -> Vec<f64> {
        crate::testutil::ridge(p)
    }

    #[test]
    fn stepsize_examples() {
        let v = [1.0, 4.0, 2.0];
        let nlg = 0.5;
        let unif = dfsdca_stepsize(&[1.0 / 3.0; 3], &v, nlg).unwrap();
        // n + max v / (lambda gamma) with lambda gamma = nlg / n
        assert!((1.0 / unif - (3.0 + 4.0 * 3.0 / nlg)).abs() < 1e-12);
        let imp = dfsdca_stepsize(&importance_probs(&v, nlg), &v, nlg).unwrap();
        assert!((1.0 / imp - (3.0 + 7.0 / nlg)).abs() < 1e-12);
        assert_eq!(dfsdca_stepsize(&[1.0], &[0.0], 1.0).unwrap(), 1.0);
        assert!(dfsdca_stepsize(&[0.0, 1.0], &[1.0, 1.0], 1.0).is_err());
        // theta / p_j never exceeds one
        let p = importance_probs(&v, nlg);
        assert!(p.iter().all(|q| imp / q <= 1.0 + 1e-15));
    }

    #[test]
    fn dfsdca_fixed_point() {
        let p = problem(5, 12, 0.1, 3);
        let w = ridge(&p);
        let a = p.dual_from_primal(&w);
        let o = RunOptions {
            init: Some(a.clone()),
            max_epochs: 3.0,
            ..Default::default()
        };
        let t = dfsdca_run(&p, &Sampling::uniform(12), &o).unwrap();
        for r in &t.rows {
            assert!(r.gap.unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn dfsdca_converges_and_potential_decays() {
        let p = problem(8, 30, 1.0 / 30.0, 5);
        let w = ridge(&p);
        let a = p.dual_from_primal(&w);
        let v = eso::v_serial(&p.data.x);
        let s = Sampling::serial(importance_probs(&v, p.nlg())).unwrap();
        let o = RunOptions {
            max_epochs: 200.0,
            optimum: Some(Optimum { w, alpha: a }),
            ..Default::default()
        };
        let t = dfsdca_run(&p, &s, &o).unwrap();
        let pot = t.extra_series("potential");
        assert!(pot.last().unwrap() < &(pot[0] * 1e-6), "{:?}", pot.last());
        for r in &t.rows {
            if let Some(d) = r.extra.get("drift") {
                assert!(*d < 1e-8);
            }
        }
    }

    #[test]
    fn nsync_fixed_point_and_one_dimension() {
        let p = problem(5, 12, 0.1, 6);
        let w = ridge(&p);
        let o = RunOptions {
            init: Some(w),
            max_epochs: 3.0,
            ..Default::default()
        };
        let t = nsync_run(&p, &Sampling::uniform(5), &o).unwrap();
        for r in &t.rows {
            assert!(r.gap.unwrap().abs() < 1e-9);
        }
        let one = problem(1, 10, 0.2, 7);
        let o = RunOptions {
            max_epochs: 20.0,
            checkpoint_iters: Some(1),
            ..Default::default()
        };
        let t = nsync_run(&one, &Sampling::uniform(1), &o).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].primal <= w[0].primal + 1e-15);
        }
    }

    #[test]
    fn nsync_full_batch_and_serial_converge() {
        let p = problem(10, 30, 0.05, 8);
        let pstar = p.primal_value(&ridge(&p));
        for s in [
            Sampling::tau_nice(10, 10).unwrap(),
            Sampling::uniform(10),
            Sampling::tau_nice(10, 3).unwrap(),
        ] {
            let o = RunOptions {
                max_epochs: 300.0,
                ..Default::default()
            };
            let t = nsync_run(&p, &s, &o).unwrap();
            assert!(
                t.last().primal - pstar < 1e-8,
                "{} {}",
                s.name(),
                t.last().primal - pstar
            );
            for w in t.rows.windows(2) {
                assert!(w[1].effective_passes > w[0].effective_passes);
            }
        }
    }

    #[test]
    fn full_batch_u_is_lambda_max() {
        let p = problem(4, 9, 0.1, 9);
        let u = nsync_u(&p, &Sampling::tau_nice(4, 4).unwrap()).unwrap();
        let xd = p.data.x.to_dense();
        let lm = eso::lambda_max_dense(&(&xd * xd.transpose()));
        assert!(u.iter().all(|&x| (x - lm).abs() < 1e-9));
    }

    #[test]
    fn parallel_cost_examples() {
        let nnz = [100, 1, 1, 1];
        let b = Block {
            units: vec![vec![0], vec![1]],
            heuristic: false,
        };
        assert_eq!(
            simulated_parallel_cost(&[b], &nnz, ParallelMode::Standard),
            vec![100.0]
        );
        let eq = [3, 3, 3, 3];
        let blocks = vec![
            Block {
                units: vec![vec![0], vec![2]],
                heuristic: false,
            },
            Block {
                units: vec![vec![1], vec![3]],
                heuristic: false,
            },
        ];
        assert_eq!(
            simulated_parallel_cost(&blocks, &eq, ParallelMode::Standard),
            simulated_parallel_cost(&blocks, &eq, ParallelMode::Chunked)
        );
        let nnz = [3, 1, 1, 1, 3, 2, 1];
        let g = naive_chunks(&nnz).unwrap();
        let s = Sampling::chunked(g, 2).unwrap();
        let mut sm = Sampler::new(&s).unwrap();
        let mut r = rng::stream(0, 1);
        let blocks: Vec<Block> = (0..50)
            .map(|_| sm.draw(Context::None, &mut r).unwrap())
            .collect();
        let c = simulated_parallel_cost(&blocks, &nnz, ParallelMode::Chunked);
        let mut prev = 0.0;
        for x in c {
            assert!(x - prev <= 3.0);
            prev = x;
        }
    }

    #[test]
    fn chunked_dfsdca_runs() {
        let p = problem(6, 24, 0.05, 10);
        let nnz: Vec<usize> = (0..24).map(|j| p.data.x.col_nnz(j)).collect();
        let s = Sampling::chunked(naive_chunks(&nnz).unwrap(), 2).unwrap();
        let t = dfsdca_run(
            &p,
            &s,
            &RunOptions {
                max_epochs: 300.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(t.last().gap.unwrap() < 1e-8, "{:?}", t.last().gap);
        let b = Sampling::bucket(Partition::singletons(24), vec![1.0; 24]).unwrap();
        assert!(dfsdca_run(
            &p,
            &b,
            &RunOptions {
                max_epochs: 5.0,
                ..Default::default()
            }
        )
        .is_ok());
    }
}
