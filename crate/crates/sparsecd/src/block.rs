//! Proximal block descent on `F = f + g` with `f` M-smooth and `g`
//! separable: forcing and proportion functions, per-rule proportion bounds,
//! predicted iteration counts, and a handful of test objectives.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eso::{l_tau, lambda_max_dense, LTau};
use crate::loss::{prox_model_1d, reg_prox_1d, Regularizer};
use crate::rng::{self, purpose, Rng};
use crate::sampling::{binomial, Context, Rule, Sampler, Sampling};
use crate::trace::{Status, Trace, TraceRow, SECONDS_PER_OP};

/// `g(x) = scale * sum_i r(x_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separable {
    pub reg: Regularizer,
    pub scale: f64,
}

impl Separable {
    pub const NONE: Separable = Separable {
        reg: Regularizer::Zero,
        scale: 0.0,
    };

    pub fn l1(weight: f64) -> Self {
        Separable {
            reg: Regularizer::L1 { weight: 1.0 },
            scale: weight,
        }
    }

    pub fn l2(lambda: f64) -> Self {
        Separable {
            reg: Regularizer::L2,
            scale: lambda,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.reg == Regularizer::Zero || self.scale == 0.0
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.scale * x.iter().map(|&v| self.reg.value_1d(v)).sum::<f64>()
        }
    }
}

pub trait Objective {
    fn dim(&self) -> usize;
    fn f(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;

    fn block_grad(&self, x: &[f64], s: &[usize]) -> Vec<f64> {
        let g = self.grad(x);
        s.iter().map(|&i| g[i]).collect()
    }

    /// Smoothness matrix: `f(x+h) <= f(x) + <grad f(x), h> + h^T M h / 2`.
    fn m(&self) -> &DMatrix<f64>;
    fn g(&self) -> Separable;

    fn f_star(&self) -> Option<f64> {
        None
    }

    fn x_star(&self) -> Option<&[f64]> {
        None
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.f(x) + self.g().value(x)
    }
}

/// `lambda(x)` and its per-coordinate parts `lambda_i(x)`. With `g = 0` this
/// is `||grad f||^2 / 2` whatever `l` is.
pub fn forcing_lambda(obj: &dyn Objective, x: &[f64], l: f64) -> (f64, Vec<f64>) {
    forcing_from_grad(&obj.g(), x, &obj.grad(x), l)
}

fn forcing_from_grad(g: &Separable, x: &[f64], grad: &[f64], l: f64) -> (f64, Vec<f64>) {
    let parts: Vec<f64> = x
        .iter()
        .zip(grad)
        .map(|(&xi, &gi)| {
            if g.is_zero() {
                0.5 * gi * gi
            } else {
                (-l * prox_model_1d(&g.reg, g.scale, xi, gi, l).1).max(0.0)
            }
        })
        .collect();
    (parts.iter().sum(), parts)
}

/// `mu(x) = lambda(x) / xi(x)`; `Err(Optimal)` when `xi(x) <= 0`.
pub fn forcing_mu(obj: &dyn Objective, x: &[f64], l: f64) -> Result<f64> {
    let f_star = obj
        .f_star()
        .ok_or_else(|| Error::invalid("forcing mu needs the optimal value"))?;
    let xi = obj.value(x) - f_star;
    if xi <= 0.0 {
        return Err(Error::Optimal);
    }
    Ok(forcing_lambda(obj, x, l).0 / xi)
}

/// How the step and the proportion function see the smoothness of `f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model<'a> {
    Matrix(&'a DMatrix<f64>),
    /// `M = L I`
    Scalar(f64),
}

/// `theta(S, x)`; zero when `lambda(x) = 0`.
pub fn proportion_theta(
    obj: &dyn Objective,
    x: &[f64],
    s: &[usize],
    model: Model<'_>,
) -> Result<f64> {
    let grad = obj.grad(x);
    let l = match model {
        Model::Scalar(l) => l,
        Model::Matrix(_) => 1.0,
    };
    let (lam, parts) = forcing_from_grad(&obj.g(), x, &grad, l);
    theta_from_parts(&grad, lam, &parts, s, model)
}

fn theta_from_parts(
    grad: &[f64],
    lam: f64,
    parts: &[f64],
    s: &[usize],
    model: Model<'_>,
) -> Result<f64> {
    if lam == 0.0 {
        return Ok(0.0);
    }
    match model {
        Model::Matrix(m) => {
            let q = crate::sampling::block_quadratic(grad, m, s)
                .ok_or_else(|| Error::Numerical("M_S is not positive definite".into()))?;
            Ok(0.5 * q / lam)
        }
        Model::Scalar(l) => Ok(s.iter().map(|&i| parts[i]).sum::<f64>() / (l * lam)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum BlockRule {
    FullBatch,
    SerialUniform,
    /// `p_i = M_ii / sum_j M_jj`
    SerialImportance,
    SerialGreedy,
    TauNice {
        tau: usize,
    },
    GreedyMinibatch {
        tau: usize,
    },
}

impl BlockRule {
    pub fn block_size(&self, n: usize) -> usize {
        match *self {
            BlockRule::FullBatch => n,
            BlockRule::TauNice { tau } | BlockRule::GreedyMinibatch { tau } => tau,
            _ => 1,
        }
    }

    pub fn sampling(&self, m: &DMatrix<f64>) -> Result<Sampling> {
        let n = m.nrows();
        match *self {
            BlockRule::FullBatch => Sampling::tau_nice(n, n),
            BlockRule::SerialUniform => Ok(Sampling::uniform(n)),
            BlockRule::SerialImportance => {
                let d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
                let t: f64 = d.iter().sum();
                Sampling::serial(d.into_iter().map(|v| v / t).collect())
            }
            BlockRule::SerialGreedy => Sampling::new(n, Rule::GreedySerial),
            BlockRule::TauNice { tau } => Sampling::tau_nice(n, tau),
            BlockRule::GreedyMinibatch { tau } => Sampling::new(n, Rule::GreedyMinibatch { tau }),
        }
    }
}

/// The scalar `L` a non-smooth run uses: `L_tau` for the rule's block size.
pub fn rule_l(rule: BlockRule, m: &DMatrix<f64>) -> Result<LTau> {
    let n = m.nrows();
    match rule.block_size(n) {
        k if k == n => Ok(LTau {
            value: lambda_max_dense(m),
            exact: true,
        }),
        k => l_tau(m, k),
    }
}

/// A lower bound on `theta` (or its conditional expectation) that holds at
/// every `x`, with `exact = false` when a cruder fallback was needed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaBound {
    pub value: f64,
    pub exact: bool,
}

pub const EXPECTED_INVERSE_ENUM_LIMIT: f64 = 1e4;

/// `E[M_[S]^{-1}]` over tau-nice `S`, by enumeration.
pub fn expected_block_inverse(m: &DMatrix<f64>, tau: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if tau == 0 || tau > n {
        return Err(Error::invalid(format!("tau = {tau} must lie in 1..={n}")));
    }
    let count = binomial(n, tau);
    if count > EXPECTED_INVERSE_ENUM_LIMIT {
        return Err(Error::invalid(format!(
            "{count} subsets is too many to enumerate"
        )));
    }
    let mut acc = DMatrix::zeros(n, n);
    for s in (0..n).combinations(tau) {
        let ms = DMatrix::from_fn(tau, tau, |a, b| m[(s[a], s[b])]);
        let inv = ms
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular M_S".into()))?;
        for (a, &i) in s.iter().enumerate() {
            for (b, &j) in s.iter().enumerate() {
                acc[(i, j)] += inv[(a, b)];
            }
        }
    }
    Ok(acc / count)
}

/// Per-rule proportion constant `c`. Smooth runs use the matrix model,
/// non-smooth runs `M = L_tau I`.
pub fn theta_bound(rule: BlockRule, m: &DMatrix<f64>, smooth: bool) -> Result<ThetaBound> {
    let n = m.nrows();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let max_diag = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let trace: f64 = diag.iter().sum();
    let exact = |value| Ok(ThetaBound { value, exact: true });
    match rule {
        BlockRule::FullBatch => exact(1.0 / lambda_max_dense(m)),
        BlockRule::SerialUniform => exact(1.0 / (n as f64 * max_diag)),
        BlockRule::SerialImportance if smooth => exact(1.0 / trace),
        BlockRule::SerialImportance => Err(Error::invalid(
            "no proportion bound for non-smooth importance sampling",
        )),
        BlockRule::SerialGreedy if smooth => exact(1.0 / trace),
        BlockRule::SerialGreedy => exact(1.0 / (n as f64 * max_diag)),
        BlockRule::TauNice { tau } | BlockRule::GreedyMinibatch { tau } => {
            if smooth {
                if let Ok(e) = expected_block_inverse(m, tau) {
                    return exact(e.symmetric_eigen().eigenvalues.min());
                }
            }
            // M_S^{-1} >= I / L_tau, so E[M_[S]^{-1}] >= tau/(n L_tau) I
            let lt = l_tau(m, tau)?;
            Ok(ThetaBound {
                value: tau as f64 / (n as f64 * lt.value),
                exact: !smooth && lt.exact,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum FunctionClass {
    StronglyPl {
        mu: f64,
    },
    /// `rho` evaluated at the starting point.
    WeaklyPl {
        rho: f64,
    },
    Nonconvex,
}

/// Iterations after which the guarantee for `class` kicks in, given the
/// proportion constant `c` and the initial gap `xi0`.
pub fn predicted_iterations(class: FunctionClass, c: f64, xi0: f64, eps: f64) -> Result<u64> {
    if !(c > 0.0) || !(eps > 0.0) || !(xi0 >= 0.0) {
        return Err(Error::invalid("need c > 0, eps > 0 and xi0 >= 0"));
    }
    if xi0 <= eps {
        return Ok(0);
    }
    let log = (xi0 / eps).ln();
    let k = match class {
        FunctionClass::StronglyPl { mu } if mu > 0.0 => log / (c * mu),
        FunctionClass::WeaklyPl { rho } if rho > 0.0 => 1.0 / (rho * c * eps),
        FunctionClass::Nonconvex => xi0 / (c * eps) * log,
        _ => return Err(Error::invalid("class constant must be positive")),
    };
    Ok(k.ceil() as u64)
}

/// One iteration, enough to check `F(x+) <= F(x) - theta lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Step {
    pub iter: u64,
    pub f: f64,
    pub lambda: f64,
    pub theta: f64,
    pub f_next: f64,
}

impl Step {
    /// Excess of `xi(x+)` over `(1 - theta mu) xi(x)`; `<= 0` when the
    /// one-step bound holds. `F*` cancels, so none is needed.
    pub fn excess(&self) -> f64 {
        self.f_next - (self.f - self.theta * self.lambda)
    }
}

#[derive(Clone, Debug)]
pub struct BlockOptions {
    pub seed: u64,
    pub max_iters: u64,
    /// Stop once `xi(x) <= target` (needs `F*`).
    pub target: Option<f64>,
    pub log_every: u64,
    pub init: Option<Vec<f64>>,
}

impl Default for BlockOptions {
    fn default() -> Self {
        BlockOptions {
            seed: 0,
            max_iters: 1000,
            target: None,
            log_every: 1,
            init: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockRun {
    pub trace: Trace,
    pub x: Vec<f64>,
    /// One entry per iteration.
    pub steps: Vec<Step>,
    /// The `L` of the scalar model, for non-smooth runs.
    pub l: Option<f64>,
}

/// Proximal arbitrary-block descent. Smooth objectives (`g = 0`) solve
/// `M_S u = -grad_S f`; otherwise each selected coordinate takes a prox step
/// with the rule's `L_tau`.
pub fn block_descent_run(
    obj: &dyn Objective,
    rule: BlockRule,
    opts: &BlockOptions,
) -> Result<BlockRun> {
    let n = obj.dim();
    let m = obj.m();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::invalid("smoothness matrix has the wrong shape"));
    }
    let g = obj.g();
    let smooth = g.is_zero();
    let l = if smooth {
        None
    } else {
        Some(rule_l(rule, m)?.value)
    };
    let model = l.map_or(Model::Matrix(m), Model::Scalar);
    let sampling = rule.sampling(m)?;
    let mut sampler = Sampler::new(&sampling)?;
    let mut rng = rng::stream(opts.seed, purpose::SAMPLING);
    let greedy = matches!(
        rule,
        BlockRule::SerialGreedy | BlockRule::GreedyMinibatch { .. }
    );

    let mut x = opts.init.clone().unwrap_or_else(|| vec![0.0; n]);
    if x.len() != n {
        return Err(Error::invalid("initial point has the wrong length"));
    }
    let every = opts.log_every.max(1);
    let block = rule.block_size(n) as f64;
    let mut trace = Trace::new();
    let mut steps = Vec::new();
    let (mut touched, mut ops) = (0u64, 0u64);
    let mut status = Status::BudgetExhausted;
    let mut f_cur = obj.value(&x);

    for k in 0..=opts.max_iters {
        let grad = obj.grad(&x);
        let (lam, parts) = forcing_from_grad(&g, &x, &grad, l.unwrap_or(1.0));
        let xi = obj.f_star().map(|s| f_cur - s);
        let mut row = TraceRow {
            epoch: k as f64 * block / n as f64,
            effective_passes: touched as f64 / n as f64,
            wall_seconds: ops as f64 * SECONDS_PER_OP,
            simulated_parallel_cost: k as f64 * n as f64,
            primal: f_cur,
            dual: None,
            gap: xi,
            extra: BTreeMap::from([("lambda".to_string(), lam)]),
        };
        let stop = if !f_cur.is_finite() || !lam.is_finite() {
            Some(Status::NonFinite)
        } else if matches!((opts.target, xi), (Some(t), Some(e)) if e <= t) {
            Some(Status::Converged)
        } else if lam == 0.0 {
            Some(if xi.is_some_and(|e| e <= 0.0) {
                Status::Optimal
            } else {
                Status::Stationary
            })
        } else if k == opts.max_iters {
            Some(Status::BudgetExhausted)
        } else {
            None
        };
        if let Some(s) = stop {
            trace.rows.push(row);
            trace.iterations = k;
            status = s;
            break;
        }

        let ctx = match (greedy, model) {
            (false, _) => Context::None,
            (true, Model::Matrix(m)) => Context::Quadratic { grad: &grad, m },
            (true, Model::Scalar(_)) => Context::Scores(&parts),
        };
        let s = sampler.draw(ctx, &mut rng)?.indices();
        let theta = theta_from_parts(&grad, lam, &parts, &s, model)?;
        if k % every == 0 {
            row.extra.insert("theta".to_string(), theta);
            trace.rows.push(row);
        }

        match model {
            Model::Matrix(m) => {
                let ms = DMatrix::from_fn(s.len(), s.len(), |a, b| m[(s[a], s[b])]);
                let gs = DVector::from_iterator(s.len(), s.iter().map(|&i| -grad[i]));
                let u = ms
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("M_S is not positive definite".into()))?
                    .solve(&gs);
                for (a, &i) in s.iter().enumerate() {
                    x[i] += u[a];
                }
                ops += (s.len() * s.len() * s.len()) as u64;
            }
            Model::Scalar(l) => {
                for &i in &s {
                    x[i] += reg_prox_1d(&g.reg, g.scale, x[i], grad[i], l);
                }
            }
        }
        touched += s.len() as u64;
        ops += (s.len() * n) as u64;
        let f_next = obj.value(&x);
        steps.push(Step {
            iter: k,
            f: f_cur,
            lambda: lam,
            theta,
            f_next,
        });
        f_cur = f_next;
    }
    trace.status = status;
    trace.notes.insert("method".into(), "block_descent".into());
    trace.notes.insert("rule".into(), format!("{rule:?}"));
    Ok(BlockRun { trace, x, steps, l })
}

/// Best of `starts` full-batch runs: one from the origin, the rest from
/// standard Gaussian points.
pub fn reference_optimum(
    obj: &dyn Objective,
    starts: usize,
    max_iters: u64,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let n = obj.dim();
    let mut rng = rng::stream(seed, purpose::INIT);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..starts.max(1) {
        let init = if s == 0 {
            vec![0.0; n]
        } else {
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        };
        let opts = BlockOptions {
            max_iters,
            log_every: u64::MAX,
            init: Some(init),
            ..Default::default()
        };
        let run = block_descent_run(obj, BlockRule::FullBatch, &opts)?;
        let v = obj.value(&run.x);
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, run.x));
        }
    }
    Ok(best.expect("at least one start"))
}

#[derive(Clone, Debug)]
enum Form {
    /// `x^T Q x / 2 - lin^T x + c0`, optionally plus `cos(<c, x>) / m`.
    Quadratic {
        q: DMatrix<f64>,
        lin: DVector<f64>,
        c0: f64,
        cos: Option<(DVector<f64>, f64)>,
    },
    /// `(x - pi/c)^2 / 2 + cos(c x) + 1`
    Plateau { c: f64 },
    /// `x1^2 x2^2`
    WplProduct,
    /// `H(x1) H(x2)`
    HuberProduct,
}

#[derive(Clone, Debug)]
pub struct TestObjective {
    form: Form,
    m: DMatrix<f64>,
    g: Separable,
    f_star: Option<f64>,
    x_star: Option<Vec<f64>>,
    /// The smoothness matrix only holds on `[-r, r]^n`.
    pub box_radius: Option<f64>,
}

/// `z^2` inside `(-1, 1)`, `2|z| - 1` outside.
pub fn huber(z: f64) -> f64 {
    if z.abs() < 1.0 {
        z * z
    } else {
        2.0 * z.abs() - 1.0
    }
}

pub fn huber_deriv(z: f64) -> f64 {
    if z.abs() < 1.0 {
        2.0 * z
    } else {
        2.0 * z.signum()
    }
}

/// The `c` giving `(x - pi/c)^2/2 + cos(cx)` a flat inflection point:
/// the root of `-cos(sqrt(c^4 - 1)) = 1/c^2` near 2.15.
pub fn plateau_constant() -> f64 {
    let h = |c: f64| -(c.powi(4) - 1.0).sqrt().cos() - 1.0 / (c * c);
    let (mut a, mut b) = (2.0, 2.3);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if h(a).signum() == h(mid).signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn gaussian_vec(n: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

fn orthonormal(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    a.qr().q()
}

impl TestObjective {
    /// `f = x^T Q x / 2 - b^T x`. The optimum is closed-form for `g = 0`
    /// and for `g = L2`.
    pub fn quadratic(q: DMatrix<f64>, b: DVector<f64>, g: Separable) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n || b.len() != n {
            return Err(Error::invalid("Q must be square and match b"));
        }
        if q.clone().cholesky().is_none() {
            return Err(Error::invalid("Q must be positive definite"));
        }
        let shift = match g.reg {
            _ if g.is_zero() => Some(0.0),
            Regularizer::L2 => Some(g.scale),
            _ => None,
        };
        let mut obj = TestObjective {
            form: Form::Quadratic {
                q: q.clone(),
                lin: b.clone(),
                c0: 0.0,
                cos: None,
            },
            m: q.clone(),
            g,
            f_star: None,
            x_star: None,
            box_radius: None,
        };
        if let Some(s) = shift {
            let h = &q + DMatrix::identity(n, n) * s;
            let xs = h.cholesky().expect("shifted PD").solve(&b);
            let xs: Vec<f64> = xs.iter().copied().collect();
            obj.f_star = Some(obj.value(&xs));
            obj.x_star = Some(xs);
        }
        Ok(obj)
    }

    /// `f = ||A x - b||^2 / (2m)`.
    pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, g: Separable) -> Result<Self> {
        let m = a.nrows() as f64;
        let q = a.transpose() * a / m;
        let lin = a.transpose() * b / m;
        let mut obj = Self::quadratic(q, lin, g)?;
        let c0 = b.norm_squared() / (2.0 * m);
        if let Form::Quadratic { c0: slot, .. } = &mut obj.form {
            *slot = c0;
        }
        obj.f_star = obj.f_star.map(|v| v + c0);
        Ok(obj)
    }

    /// Least squares with a Gaussian `2n x n` design.
    pub fn random_least_squares(n: usize, g: Separable, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, purpose::DATA);
        let a = DMatrix::from_fn(2 * n, n, |_, _| StandardNormal.sample(&mut rng));
        let b = gaussian_vec(2 * n, &mut rng);
        Self::least_squares(&a, &b, g)
    }

    /// `f = ||A x - b||^2/(2m) + cos(<c, x>)/m`, `g = l1 ||x||_1`, with `A`
    /// having singular values evenly spaced on `[1/m, 1]`, `b = A y` and
    /// `y`, `c` standard Gaussian. `M = A^T A/m + (||c||^2/m) I`.
    pub fn cos_quadratic(m: usize, n: usize, l1: f64, seed: u64) -> Result<Self> {
        if m < n || n == 0 {
            return Err(Error::invalid("need m >= n >= 1"));
        }
        let mut rng = rng::stream(seed, purpose::DATA);
        let u = orthonormal(m, n, &mut rng);
        let v = orthonormal(n, n, &mut rng);
        let mf = m as f64;
        let sv = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                if n == 1 {
                    1.0
                } else {
                    1.0 / mf + (1.0 - 1.0 / mf) * i as f64 / (n - 1) as f64
                }
            }),
        );
        let a = u * DMatrix::from_diagonal(&sv) * v.transpose();
        let y = gaussian_vec(n, &mut rng);
        let c = gaussian_vec(n, &mut rng);
        let b = &a * y;
        let q = a.transpose() * &a / mf;
        let lin = a.transpose() * &b / mf;
        let mm = &q + DMatrix::identity(n, n) * (c.norm_squared() / mf);
        Ok(TestObjective {
            form: Form::Quadratic {
                q,
                lin,
                c0: b.norm_squared() / (2.0 * mf),
                cos: Some((c, 1.0 / mf)),
            },
            m: mm,
            g: if l1 > 0.0 {
                Separable::l1(l1)
            } else {
                Separable::NONE
            },
            f_star: None,
            x_star: None,
            box_radius: None,
        })
    }

    /// One-dimensional objective with a flat inflection point; optimum 0 at `pi/c`.
    pub fn plateau() -> Self {
        let c = plateau_constant();
        TestObjective {
            form: Form::Plateau { c },
            m: DMatrix::from_element(1, 1, 1.0 + c * c),
            g: Separable::NONE,
            f_star: Some(0.0),
            x_star: Some(vec![PI / c]),
            box_radius: None,
        }
    }

    /// `x1^2 x2^2`; `M = 6 r^2 I` bounds the Hessian on `[-r, r]^2`.
    pub fn wpl_product(r: f64) -> Self {
        TestObjective {
            form: Form::WplProduct,
            m: DMatrix::identity(2, 2) * (6.0 * r * r),
            g: Separable::NONE,
            f_star: Some(0.0),
            x_star: Some(vec![0.0, 0.0]),
            box_radius: Some(r),
        }
    }

    /// `H(x1) H(x2)`; `M = (4r + 2) I` bounds the Hessian on `[-r, r]^2`, `r >= 1`.
    pub fn huber_product(r: f64) -> Self {
        let r = r.max(1.0);
        TestObjective {
            form: Form::HuberProduct,
            m: DMatrix::identity(2, 2) * (4.0 * r + 2.0),
            g: Separable::NONE,
            f_star: Some(0.0),
            x_star: Some(vec![0.0, 0.0]),
            box_radius: Some(r),
        }
    }

    pub fn with_optimum(mut self, f_star: f64, x_star: Option<Vec<f64>>) -> Self {
        self.f_star = Some(f_star);
        self.x_star = x_star;
        self
    }

    pub fn with_g(mut self, g: Separable) -> Self {
        if g != self.g {
            self.f_star = None;
            self.x_star = None;
        }
        self.g = g;
        self
    }
}

impl Objective for TestObjective {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn f(&self, x: &[f64]) -> f64 {
        match &self.form {
            Form::Quadratic { q, lin, c0, cos } => {
                let xv = DVector::from_column_slice(x);
                let mut v = 0.5 * xv.dot(&(q * &xv)) - lin.dot(&xv) + c0;
                if let Some((c, w)) = cos {
                    v += w * c.dot(&xv).cos();
                }
                v
            }
            Form::Plateau { c } => 0.5 * (x[0] - PI / c).powi(2) + (c * x[0]).cos() + 1.0,
            Form::WplProduct => x[0] * x[0] * x[1] * x[1],
            Form::HuberProduct => huber(x[0]) * huber(x[1]),
        }
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        match &self.form {
            Form::Quadratic { q, lin, cos, .. } => {
                let xv = DVector::from_column_slice(x);
                let mut g = q * &xv - lin;
                if let Some((c, w)) = cos {
                    g -= c * (w * c.dot(&xv).sin());
                }
                g.iter().copied().collect()
            }
            Form::Plateau { c } => vec![x[0] - PI / c - c * (c * x[0]).sin()],
            Form::WplProduct => vec![2.0 * x[0] * x[1] * x[1], 2.0 * x[0] * x[0] * x[1]],
            Form::HuberProduct => {
                vec![
                    huber_deriv(x[0]) * huber(x[1]),
                    huber(x[0]) * huber_deriv(x[1]),
                ]
            }
        }
    }

    fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    fn g(&self) -> Separable {
        self.g
    }

    fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }
}

/// Random symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn random_pd(n: usize, lo: f64, hi: f64, rng: &mut Rng) -> DMatrix<f64> {
    let u = orthonormal(n, n, rng);
    let ev = DVector::from_iterator(n, (0..n).map(|_| rng.random_range(lo..=hi)));
    let m = &u * DMatrix::from_diagonal(&ev) * u.transpose();
    (&m + m.transpose()) * 0.5
}
