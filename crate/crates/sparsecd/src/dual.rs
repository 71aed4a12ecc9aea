//! Dual coordinate ascent: SDCA with fixed probabilities, the adaptive
//! AdaSDCA and AdaSDCA+, and Quartz with arbitrary sampling.
//!
//! All of them keep `w = X alpha / (lambda n)` (L2 regularizer, so `w` is
//! also the aggregate `alpha bar`) and share one loop.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eso;
use crate::loss::{dual_delta, Problem};
use crate::rng::{self, purpose};
use crate::sampling::{
    adasdca_weights, importance_probs, Block, Context, ProbabilityTree, Sampler, Sampling,
};
use crate::trace::{Recorder, RunOptions, Status, Trace};

/// `alpha` and `w = X alpha / (lambda n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
}

impl DualState {
    pub fn new(problem: &Problem, init: Option<Vec<f64>>) -> Result<Self> {
        let alpha = init.unwrap_or_else(|| vec![0.0; problem.n()]);
        if alpha.len() != problem.n() {
            return Err(Error::invalid("initial alpha has the wrong length"));
        }
        let w = problem.primal_from_dual(&alpha);
        Ok(Self { alpha, w })
    }

    /// `kappa_j = alpha_j + phi_j'(X_j^T w)`
    pub fn residues(&self, problem: &Problem) -> Vec<f64> {
        residues(problem, &self.alpha, &self.w)
    }

    /// Closed-form (or damped, for logistic) step on coordinate `j` with ESO weight `v_j`.
    pub fn coordinate_step(&mut self, problem: &Problem, j: usize, v_j: f64) -> Result<f64> {
        let x = &problem.data.x;
        let ln = problem.lambda * problem.n() as f64;
        let inner = x.col_dot(j, &self.w);
        let d = dual_delta(
            &problem.loss,
            self.alpha[j],
            inner,
            coeff(v_j, ln),
            problem.data.y[j],
        )?;
        self.alpha[j] += d;
        x.col_axpy(j, d / ln, &mut self.w);
        Ok(d)
    }

    /// Recomputes `w` from `alpha`; returns the relative drift that was removed.
    pub fn refresh(&mut self, problem: &Problem) -> f64 {
        let fresh = problem.primal_from_dual(&self.alpha);
        let diff = fresh
            .iter()
            .zip(&self.w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm = fresh.iter().map(|a| a * a).sum::<f64>().sqrt();
        self.w = fresh;
        diff / (1.0 + norm)
    }
}

// v_j = 0 happens only for empty columns, which datasets exclude; keep the
// step well defined anyway
fn coeff(v_j: f64, ln: f64) -> f64 {
    (v_j / ln).max(f64::MIN_POSITIVE)
}

pub fn residues(problem: &Problem, alpha: &[f64], w: &[f64]) -> Vec<f64> {
    let x = &problem.data.x;
    (0..problem.n())
        .map(|j| alpha[j] + problem.loss.deriv(x.col_dot(j, w), problem.data.y[j]))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlusOption {
    /// Reset to the optimal adaptive probabilities from fresh residues.
    I,
    /// Reset to the importance probabilities.
    II,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaPlus {
    /// The sampled coordinate's weight is divided by `m`.
    pub m: f64,
    pub option: PlusOption,
    #[doc(hidden)]
    pub disable_decay: bool,
}

impl Default for AdaPlus {
    fn default() -> Self {
        AdaPlus {
            m: 10.0,
            option: PlusOption::II,
            disable_decay: false,
        }
    }
}

enum Kind<'a> {
    Fixed {
        sampler: Sampler<'a>,
        v: Vec<f64>,
    },
    Ada,
    Plus {
        cfg: AdaPlus,
        tree: Option<ProbabilityTree>,
    },
}

/// SDCA with fixed serial probabilities `p`.
pub fn sdca_run(problem: &Problem, p: Vec<f64>, opts: &RunOptions) -> Result<Trace> {
    let s = Sampling::serial(p)?;
    quartz_run(problem, &s, opts)
}

/// Quartz with any sampling that has an ESO vector.
pub fn quartz_run(problem: &Problem, sampling: &Sampling, opts: &RunOptions) -> Result<Trace> {
    let v = eso::v_for(&problem.data.x, sampling)?;
    quartz_run_with(problem, sampling, v, opts)
}

/// Quartz with a caller-supplied ESO vector.
pub fn quartz_run_with(
    problem: &Problem,
    sampling: &Sampling,
    v: Vec<f64>,
    opts: &RunOptions,
) -> Result<Trace> {
    let p = sampling
        .marginals()
        .ok_or_else(|| Error::invalid("Quartz needs a sampling with known marginals"))?;
    if v.len() != problem.n() || sampling.n() != problem.n() {
        return Err(Error::invalid(
            "sampling does not match the number of examples",
        ));
    }
    let nlg = problem.nlg();
    let theta = (0..p.len())
        .map(|j| p[j] * nlg / (v[j] + nlg))
        .fold(f64::INFINITY, f64::min);
    let zero_p = p.iter().any(|&q| q == 0.0);
    let sampler = Sampler::new(sampling)?;
    let mut t = run(problem, Kind::Fixed { sampler, v }, opts)?;
    t.theta = Some(theta);
    t.notes.insert("method".into(), "quartz".into());
    t.notes.insert("sampling".into(), sampling.name().into());
    if zero_p {
        t.notes.insert(
            "warning".into(),
            "some coordinate has zero probability".into(),
        );
    }
    Ok(t)
}

/// AdaSDCA: fresh residues and optimal adaptive probabilities every iteration.
pub fn adasdca_run(problem: &Problem, opts: &RunOptions) -> Result<Trace> {
    let mut t = run(problem, Kind::Ada, opts)?;
    t.notes.insert("method".into(), "adasdca".into());
    Ok(t)
}

/// AdaSDCA+: probabilities reset once per epoch, sampled weights decay by `m`.
pub fn adasdca_plus_run(problem: &Problem, cfg: AdaPlus, opts: &RunOptions) -> Result<Trace> {
    if !(cfg.m > 1.0) {
        return Err(Error::invalid(format!("decay m = {} must exceed 1", cfg.m)));
    }
    let mut t = run(problem, Kind::Plus { cfg, tree: None }, opts)?;
    t.notes.insert("method".into(), "adasdca_plus".into());
    Ok(t)
}

fn log2_ceil(n: usize) -> u64 {
    (usize::BITS - n.next_power_of_two().leading_zeros()) as u64
}

fn run(problem: &Problem, mut kind: Kind<'_>, opts: &RunOptions) -> Result<Trace> {
    problem.require_l2()?;
    let x = &problem.data.x;
    let n = problem.n();
    let nlg = problem.nlg();
    let v_serial = eso::v_serial(x);
    let mut st = DualState::new(problem, opts.init.clone())?;
    let expected = match &kind {
        Kind::Fixed { sampler, .. } => sampler.sampling().expected_size(),
        _ => 1.0,
    };
    let mut rec = Recorder::new(opts, x.nnz(), expected, n);
    let mut rng = rng::stream(opts.seed, purpose::SAMPLING);
    let logn = log2_ceil(n);
    let col_nnz = |j: usize| x.col_nnz(j);

    let checkpoint = |rec: &mut Recorder, st: &DualState, iter: u64, drift: Option<f64>| {
        let primal = problem.primal_value(&st.w);
        let dual = problem.dual_value_with(&st.alpha, &st.w);
        let mut extra = BTreeMap::new();
        if let Some(d) = drift {
            extra.insert("drift".to_string(), d);
        }
        rec.record(iter, primal, Some(dual), extra)
    };

    if let Some(s) = checkpoint(&mut rec, &st, 0, None) {
        return Ok(rec.finish(s));
    }
    let mut deltas: Vec<(usize, f64)> = Vec::new();
    for iter in 1..=rec.max_iters {
        let block: Block = match &mut kind {
            Kind::Fixed { sampler, .. } => {
                let b = sampler.draw(Context::None, &mut rng)?;
                rec.meter.ops(logn * b.len() as u64);
                b
            }
            Kind::Ada => {
                let kappa = st.residues(problem);
                rec.meter.visit(x.nnz());
                let w = adasdca_weights(&kappa, &v_serial, nlg);
                if w.iter().all(|&q| q == 0.0) {
                    return Ok(finish_optimal(rec, &st, iter - 1, &checkpoint));
                }
                let tree = ProbabilityTree::new(&w)?;
                rec.meter.ops(2 * n as u64 + logn);
                Block {
                    units: vec![vec![tree.sample(&mut rng)]],
                    heuristic: false,
                }
            }
            Kind::Plus { cfg, tree } => {
                if (iter - 1) % n as u64 == 0 {
                    let w = match cfg.option {
                        PlusOption::I => {
                            let kappa = st.residues(problem);
                            rec.meter.visit(x.nnz());
                            let w = adasdca_weights(&kappa, &v_serial, nlg);
                            let s: f64 = w.iter().sum();
                            if s == 0.0 {
                                return Ok(finish_optimal(rec, &st, iter - 1, &checkpoint));
                            }
                            w.into_iter().map(|q| q / s).collect()
                        }
                        PlusOption::II => importance_probs(&v_serial, nlg),
                    };
                    *tree = Some(ProbabilityTree::new(&w)?);
                    rec.meter.ops(n as u64 * logn);
                }
                let t = tree.as_mut().expect("tree is set at the first iteration");
                let j = t.sample(&mut rng);
                if !cfg.disable_decay {
                    let nw = t.weight(j) / cfg.m;
                    // an underflowed total would leave nothing to sample
                    if t.update(j, nw).is_err() {
                        t.update(j, t.weight(j))?;
                    }
                }
                rec.meter.ops(2 * logn);
                Block {
                    units: vec![vec![j]],
                    heuristic: false,
                }
            }
        };

        let v: &[f64] = match &kind {
            Kind::Fixed { v, .. } => v,
            _ => &v_serial,
        };
        let ln = problem.lambda * n as f64;
        deltas.clear();
        for j in block.indices() {
            let inner = x.col_dot(j, &st.w);
            rec.meter.visit(x.col_nnz(j));
            let d = dual_delta(
                &problem.loss,
                st.alpha[j],
                inner,
                coeff(v[j], ln),
                problem.data.y[j],
            )?;
            deltas.push((j, d));
        }
        for &(j, d) in &deltas {
            st.alpha[j] += d;
            x.col_axpy(j, d / ln, &mut st.w);
            rec.meter.ops(x.col_nnz(j) as u64);
        }
        rec.meter.parallel(&block, col_nnz);
        let bad = deltas.iter().any(|(_, d)| !d.is_finite());

        if rec.due(iter) || bad {
            let drift = (iter % rec.epoch_len == 0).then(|| st.refresh(problem));
            if let Some(s) = checkpoint(&mut rec, &st, iter, drift) {
                return Ok(rec.finish(s));
            }
            if bad {
                return Ok(rec.finish(Status::NonFinite));
            }
        }
    }
    Ok(rec.finish(Status::BudgetExhausted))
}

fn finish_optimal(
    mut rec: Recorder,
    st: &DualState,
    iter: u64,
    checkpoint: &impl Fn(&mut Recorder, &DualState, u64, Option<f64>) -> Option<Status>,
) -> Trace {
    if rec.trace.iterations != iter {
        checkpoint(&mut rec, st, iter, None);
    }
    rec.finish(Status::Optimal)
}
