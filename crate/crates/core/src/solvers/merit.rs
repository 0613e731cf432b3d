//! Unconstrained merit functions of the baseline methods.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lagrangian::HessianMode;
use crate::newton::{Model, Objective};
use crate::problem::{ConstrainedProblem, PointValues, ProblemEval};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeritKind {
    /// `f - tau sum log(-g) + nu sum h^2`; `+inf` unless `g < 0`.
    Barrier { tau: f64, nu: f64 },
    /// `f + mu sum [g]_+^2 + nu sum h^2`.
    Quadratic { mu: f64, nu: f64 },
}

impl MeritKind {
    pub fn value(&self, f: f64, g: &DVector<f64>, h: &DVector<f64>) -> f64 {
        match *self {
            MeritKind::Barrier { tau, nu } => {
                if g.iter().any(|gi| !(*gi < 0.0)) {
                    return f64::INFINITY;
                }
                f - tau * g.iter().map(|gi| (-gi).ln()).sum::<f64>() + nu * h.norm_squared()
            }
            MeritKind::Quadratic { mu, nu } => {
                f + mu * g.iter().map(|gi| gi.max(0.0).powi(2)).sum::<f64>() + nu * h.norm_squared()
            }
        }
    }

    /// Per-row `(gradient weight, Gauss-Newton weight)` for inequality `i`:
    /// the gradient gets `w grad g_i`, the Hessian `c grad g_i grad g_i^T`
    /// plus `w hess g_i` in full mode.
    fn ineq_weights(&self, gi: f64) -> (f64, f64) {
        match *self {
            MeritKind::Barrier { tau, .. } => (tau / -gi, tau / (gi * gi)),
            MeritKind::Quadratic { mu, .. } if gi > 0.0 => (2.0 * mu * gi, 2.0 * mu),
            MeritKind::Quadratic { .. } => (0.0, 0.0),
        }
    }

    fn nu(&self) -> f64 {
        match *self {
            MeritKind::Barrier { nu, .. } | MeritKind::Quadratic { nu, .. } => nu,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeritEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub source: ProblemEval,
}

impl MeritEval {
    pub fn new(source: ProblemEval, kind: MeritKind, mode: HessianMode) -> Result<Self> {
        let value = kind.value(source.f, &source.g, &source.h);
        if value.is_nan() || value == f64::NEG_INFINITY {
            return Err(Error::NonFinite {
                what: "merit value",
                coordinate: None,
            });
        }
        let full = mode == HessianMode::Full && !source.affine;
        if full && (source.hess_g.is_none() || source.hess_h.is_none()) {
            return Err(Error::Config(
                "full Hessian mode needs constraint Hessians for non-affine problems".into(),
            ));
        }
        let mut gradient = source.grad_f.clone();
        let mut hessian = source.hess_f.clone();
        for i in 0..source.dim_g() {
            let (w, c) = kind.ineq_weights(source.g[i]);
            if w == 0.0 && c == 0.0 {
                continue;
            }
            let row = source.jac_g.row(i).transpose();
            gradient.axpy(w, &row, 1.0);
            hessian.ger(c, &row, &row, 1.0);
            if full {
                hessian += &source.hess_g.as_ref().expect("checked")[i] * w;
            }
        }
        let nu = kind.nu();
        for j in 0..source.dim_h() {
            let row = source.jac_h.row(j).transpose();
            gradient.axpy(2.0 * nu * source.h[j], &row, 1.0);
            hessian.ger(2.0 * nu, &row, &row, 1.0);
            if full {
                hessian += &source.hess_h.as_ref().expect("checked")[j] * (2.0 * nu * source.h[j]);
            }
        }
        Ok(Self {
            value,
            gradient,
            hessian,
            source,
        })
    }
}

impl Model for MeritEval {
    fn point(&self) -> &DVector<f64> {
        &self.source.x
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn gradient(&self) -> &DVector<f64> {
        &self.gradient
    }
    fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }
}

pub struct MeritObjective<'a> {
    pub problem: &'a ConstrainedProblem,
    pub kind: MeritKind,
    pub mode: HessianMode,
}

impl Objective for MeritObjective<'_> {
    type Trial = (PointValues, f64);
    type Eval = MeritEval;

    fn evaluate(&self, x: &DVector<f64>) -> Result<MeritEval> {
        MeritEval::new(self.problem.evaluate(x)?, self.kind, self.mode)
    }

    fn trial(&self, x: &DVector<f64>) -> Result<Self::Trial> {
        let values = self.problem.evaluate_values(x)?;
        let value = self.kind.value(values.f, &values.g, &values.h);
        Ok((values, value))
    }

    fn trial_value(&self, trial: &Self::Trial) -> f64 {
        trial.1
    }

    fn accept(&self, trial: Self::Trial) -> Result<MeritEval> {
        MeritEval::new(self.problem.complete(trial.0)?, self.kind, self.mode)
    }
}
