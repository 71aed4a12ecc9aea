//! Losses, regularizers and the regularized ERM problem.
//!
//! Primal: `P(w) = (1/n) sum_j phi_j(X_j^T w) + lambda r(w)`.
//! Dual (L2 only): `D(a) = -(1/n) sum_j phi_j^*(-a_j) - (lambda/2) ||X a / (lambda n)||^2`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    Quadratic,
    Logistic,
    SmoothedHinge { gamma: f64 },
}

impl Loss {
    /// The loss is `1/gamma`-smooth.
    pub fn gamma(&self) -> f64 {
        match *self {
            Loss::Quadratic => 1.0,
            Loss::Logistic => 4.0,
            Loss::SmoothedHinge { gamma } => gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Loss::SmoothedHinge { gamma } = *self {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::invalid(format!(
                    "smoothed hinge gamma {gamma} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        match self {
            Loss::Quadratic if y.is_finite() => Ok(()),
            Loss::Logistic | Loss::SmoothedHinge { .. } if y == 1.0 || y == -1.0 => Ok(()),
            _ => Err(Error::invalid(format!(
                "label {y} not allowed for {self:?}"
            ))),
        }
    }

    pub fn value(&self, s: f64, y: f64) -> f64 {
        match *self {
            Loss::Quadratic => 0.5 * (s - y) * (s - y),
            Loss::Logistic => softplus(-y * s),
            Loss::SmoothedHinge { gamma } => {
                let m = s * y;
                if m >= 1.0 {
                    0.0
                } else if m <= 1.0 - gamma {
                    1.0 - m - 0.5 * gamma
                } else {
                    (1.0 - m) * (1.0 - m) / (2.0 * gamma)
                }
            }
        }
    }

    /// Derivative in `s`.
    pub fn deriv(&self, s: f64, y: f64) -> f64 {
        match *self {
            Loss::Quadratic => s - y,
            Loss::Logistic => -y * sigmoid(-y * s),
            Loss::SmoothedHinge { gamma } => {
                let m = s * y;
                if m >= 1.0 {
                    0.0
                } else if m <= 1.0 - gamma {
                    -y
                } else {
                    -y * (1.0 - m) / gamma
                }
            }
        }
    }

    /// `phi^*(-u)`, `+inf` outside the conjugate domain.
    pub fn conj_neg(&self, u: f64, y: f64) -> f64 {
        match *self {
            Loss::Quadratic => -u * y + 0.5 * u * u,
            Loss::Logistic => {
                let a = u * y;
                if !(0.0..=1.0).contains(&a) {
                    return f64::INFINITY;
                }
                xlogx(a) + xlogx(1.0 - a)
            }
            Loss::SmoothedHinge { gamma } => {
                let a = u * y;
                if !(0.0..=1.0).contains(&a) {
                    return f64::INFINITY;
                }
                -a + 0.5 * gamma * u * u
            }
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn xlogx(a: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * a.ln()
    }
}

/// Step on one dual coordinate.
///
/// Maximizes `-phi^*(-(a + D)) - inner D - (coeff/2) D^2` in closed form for
/// the quadratic and smoothed hinge losses. Logistic has no closed form and
/// takes the damped step `D = -eta (phi'(inner) + a)` with
/// `eta = gamma / (gamma + coeff)`.
pub fn dual_delta(loss: &Loss, alpha: f64, inner: f64, coeff: f64, y: f64) -> Result<f64> {
    if !(coeff > 0.0) {
        return Err(Error::invalid(format!(
            "dual step coefficient {coeff} must be positive"
        )));
    }
    Ok(match *loss {
        Loss::Quadratic => (y - alpha - inner) / (1.0 + coeff),
        Loss::SmoothedHinge { gamma } => {
            let d = (y - inner - gamma * alpha) / (gamma + coeff);
            // a y must stay in [0, 1]
            let t = ((alpha + d) * y).clamp(0.0, 1.0);
            t * y - alpha
        }
        Loss::Logistic => {
            let eta = 4.0 / (4.0 + coeff);
            -eta * (loss.deriv(inner, y) + alpha)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    /// `||w||^2 / 2`
    L2,
    /// `weight ||w||_1`
    L1 {
        weight: f64,
    },
    /// Indicator of `|w_i| <= bound`.
    Box {
        bound: f64,
    },
    Zero,
}

impl Regularizer {
    pub fn strongly_convex(&self) -> bool {
        matches!(self, Regularizer::L2)
    }

    pub fn value_1d(&self, x: f64) -> f64 {
        match *self {
            Regularizer::L2 => 0.5 * x * x,
            Regularizer::L1 { weight } => weight * x.abs(),
            Regularizer::Box { bound } => {
                if x.abs() <= bound {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::Zero => 0.0,
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        w.iter().map(|&x| self.value_1d(x)).sum()
    }

    pub fn conj_1d(&self, v: f64) -> f64 {
        match *self {
            Regularizer::L2 => 0.5 * v * v,
            Regularizer::L1 { weight } => {
                if v.abs() <= weight {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::Box { bound } => bound * v.abs(),
            Regularizer::Zero => {
                if v == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Minimizer `u` of `grad u + (l/2) u^2 + s r(x + u) - s r(x)` where `s = scale`.
pub fn reg_prox_1d(reg: &Regularizer, scale: f64, x: f64, grad: f64, l: f64) -> f64 {
    match *reg {
        Regularizer::Zero => -grad / l,
        Regularizer::L2 => -(grad + scale * x) / (l + scale),
        Regularizer::L1 { weight } => {
            let z = x - grad / l;
            let t = weight * scale / l;
            let s = if z > t {
                z - t
            } else if z < -t {
                z + t
            } else {
                0.0
            };
            s - x
        }
        Regularizer::Box { bound } => {
            if scale == 0.0 {
                -grad / l
            } else {
                (x - grad / l).clamp(-bound, bound) - x
            }
        }
    }
}

/// The prox step together with its model value
/// `grad u + (l/2) u^2 + s r(x+u) - s r(x)` (always `<= 0`).
pub fn prox_model_1d(reg: &Regularizer, scale: f64, x: f64, grad: f64, l: f64) -> (f64, f64) {
    let u = reg_prox_1d(reg, scale, x, grad, l);
    let dg = if scale == 0.0 {
        0.0
    } else {
        scale * (reg.value_1d(x + u) - reg.value_1d(x))
    };
    (u, grad * u + 0.5 * l * u * u + dg)
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub data: Dataset,
    pub loss: Loss,
    pub reg: Regularizer,
    pub lambda: f64,
}

impl Problem {
    pub fn new(data: Dataset, loss: Loss, reg: Regularizer, lambda: f64) -> Result<Self> {
        loss.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda {lambda} must be positive")));
        }
        for &y in &data.y {
            loss.check_label(y)?;
        }
        Ok(Self {
            data,
            loss,
            reg,
            lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn gamma(&self) -> f64 {
        self.loss.gamma()
    }

    /// `n lambda gamma`, the constant that appears in every rate.
    pub fn nlg(&self) -> f64 {
        self.n() as f64 * self.lambda * self.gamma()
    }

    pub fn require_l2(&self) -> Result<()> {
        if self.reg != Regularizer::L2 {
            return Err(Error::invalid("dual methods require the L2 regularizer"));
        }
        Ok(())
    }

    pub fn primal_value(&self, w: &[f64]) -> f64 {
        let z = self.data.x.tmul_vec(w);
        self.primal_value_from_margins(&z, w)
    }

    /// `P(w)` given the cached margins `z = X^T w`.
    pub fn primal_value_from_margins(&self, z: &[f64], w: &[f64]) -> f64 {
        let n = self.n() as f64;
        let fit: f64 = z
            .iter()
            .zip(&self.data.y)
            .map(|(&s, &y)| self.loss.value(s, y))
            .sum();
        fit / n + self.lambda * self.reg.value(w)
    }

    /// `X a / (lambda n)`
    pub fn primal_from_dual(&self, alpha: &[f64]) -> Vec<f64> {
        let c = 1.0 / (self.lambda * self.n() as f64);
        self.data
            .x
            .mul_vec(alpha)
            .into_iter()
            .map(|v| v * c)
            .collect()
    }

    /// `a_j = -phi_j'(X_j^T w)`
    pub fn dual_from_primal(&self, w: &[f64]) -> Vec<f64> {
        let z = self.data.x.tmul_vec(w);
        z.iter()
            .zip(&self.data.y)
            .map(|(&s, &y)| -self.loss.deriv(s, y))
            .collect()
    }

    pub fn dual_value(&self, alpha: &[f64]) -> Result<f64> {
        self.require_l2()?;
        let w = self.primal_from_dual(alpha);
        Ok(self.dual_value_with(alpha, &w))
    }

    /// `D(a)` given `w = X a / (lambda n)` already at hand.
    pub fn dual_value_with(&self, alpha: &[f64], w: &[f64]) -> f64 {
        let n = self.n() as f64;
        let conj: f64 = alpha
            .iter()
            .zip(&self.data.y)
            .map(|(&a, &y)| self.loss.conj_neg(a, y))
            .sum();
        let wsq: f64 = w.iter().map(|v| v * v).sum();
        -conj / n - 0.5 * self.lambda * wsq
    }

    pub fn duality_gap(&self, w: &[f64], alpha: &[f64]) -> Result<f64> {
        Ok(self.primal_value(w) - self.dual_value(alpha)?)
    }

    /// Primal gradient `(1/n) X phi'(X^T w) + lambda w` (L2 only).
    pub fn primal_gradient(&self, w: &[f64]) -> Vec<f64> {
        let z = self.data.x.tmul_vec(w);
        let n = self.n() as f64;
        let dz: Vec<f64> = z
            .iter()
            .zip(&self.data.y)
            .map(|(&s, &y)| self.loss.deriv(s, y) / n)
            .collect();
        let mut g = self.data.x.mul_vec(&dz);
        for (gi, &wi) in g.iter_mut().zip(w) {
            *gi += self.lambda * wi;
        }
        g
    }
}
