//! Newton's method with adaptive step size and Levenberg-Marquardt damping.
//!
//! Each iteration solves `(H + beta I) delta = -grad`, then backtracks on the
//! step size `alpha` until the sufficient-decrease test
//! `f(x + alpha delta) <= f(x) + rho alpha grad^T delta` holds. Accepted steps
//! grow `alpha` towards 1, rejected ones shrink it. The iteration stops once
//! `beta <= 1` and `|delta|_inf < tol`.
//!
//! The driver is resumable: [`newton_step`] performs exactly one trial
//! evaluation, so outer loops can interleave dual updates between steps and
//! swap the cached model with [`NewtonState::replace_cached_eval`].

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{value_from, HessianMode, LagrangianEval};
use crate::problem::{inf_norm, ConstrainedProblem, DualState, PointValues};

/// A rejected trial with `alpha |delta|_inf` below this fraction of the
/// tolerance aborts: the search direction is not a descent direction.
pub const GRADIENT_FAILURE_RATIO: f64 = 1e-3;

/// Cholesky retries with a tenfold damping bump before giving up.
const MAX_DAMPING_BUMPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonParams {
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub rho: f64,
    /// Stopping tolerance on `|delta|_inf`. Read on every step, so callers
    /// may change it between steps.
    pub delta: f64,
    /// Evaluation budget for one run.
    pub max_evals: u64,
    /// Relative roundoff allowance of the decrease test. A trial whose
    /// predicted decrease is below `noise_floor (1 + |f|)` is accepted when
    /// it raises `f` by no more than that amount. Zero gives the exact test.
    pub noise_floor: f64,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            beta0: 1.0,
            alpha_plus: 2.0,
            alpha_minus: 0.1,
            beta_plus: 1.0,
            beta_minus: 1.0,
            rho: 0.01,
            delta: 1e-6,
            max_evals: 10_000,
            noise_floor: 1e-13,
        }
    }
}

impl NewtonParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.alpha_minus
            && self.alpha_minus < 1.0
            && 1.0 < self.alpha_plus
            && 0.0 < self.rho
            && self.rho < 0.5
            && self.beta_plus >= 1.0
            && 1.0 >= self.beta_minus
            && self.beta_minus > 0.0
            && self.alpha0 > 0.0
            && self.alpha0 <= 1.0
            && self.beta0 > 0.0
            && self.delta > 0.0
            && self.max_evals > 0
            && self.noise_floor >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Newton parameters: {self:?}")))
        }
    }
}

/// Local quadratic model data at the current iterate.
pub trait Model {
    fn point(&self) -> &DVector<f64>;
    fn value(&self) -> f64;
    fn gradient(&self) -> &DVector<f64>;
    fn hessian(&self) -> &DMatrix<f64>;
}

impl Model for LagrangianEval {
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

/// The function being minimized. Trial points are evaluated for their value
/// only; derivatives are computed once a trial is accepted.
pub trait Objective {
    type Trial;
    type Eval: Model;

    /// Full evaluation, used to start a run.
    fn evaluate(&self, x: &DVector<f64>) -> Result<Self::Eval>;

    fn trial(&self, x: &DVector<f64>) -> Result<Self::Trial>;

    /// `+inf` marks a point outside the domain.
    fn trial_value(&self, trial: &Self::Trial) -> f64;

    fn accept(&self, trial: Self::Trial) -> Result<Self::Eval>;
}

/// `x -> L(x, lambda, kappa)` for fixed duals.
pub struct LagrangianObjective<'a> {
    pub problem: &'a ConstrainedProblem,
    pub dual: &'a DualState,
    pub mode: HessianMode,
}

impl<'a> LagrangianObjective<'a> {
    pub fn new(problem: &'a ConstrainedProblem, dual: &'a DualState, mode: HessianMode) -> Self {
        Self {
            problem,
            dual,
            mode,
        }
    }
}

impl Objective for LagrangianObjective<'_> {
    type Trial = (PointValues, f64);
    type Eval = LagrangianEval;

    fn evaluate(&self, x: &DVector<f64>) -> Result<LagrangianEval> {
        LagrangianEval::new(self.problem.evaluate(x)?, self.dual, self.mode)
    }

    fn trial(&self, x: &DVector<f64>) -> Result<Self::Trial> {
        let values = self.problem.evaluate_values(x)?;
        let value = value_from(values.f, &values.g, &values.h, self.dual)?;
        Ok((values, value))
    }

    fn trial_value(&self, trial: &Self::Trial) -> f64 {
        trial.1
    }

    fn accept(&self, trial: Self::Trial) -> Result<LagrangianEval> {
        LagrangianEval::new(self.problem.complete(trial.0)?, self.dual, self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Accepted,
    Rejected,
    /// `beta <= 1` and `|delta|_inf < tol`.
    Converged,
    /// Evaluation budget used up before the trial.
    Exhausted,
    /// A rejected step shrank below `GRADIENT_FAILURE_RATIO * tol`.
    GradientFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTraceRow {
    pub iteration: usize,
    pub alpha: f64,
    pub beta: f64,
    pub step_norm: f64,
    pub value: f64,
    pub outcome: StepOutcome,
}

/// Writes trace rows as CSV with header
/// `iteration,alpha,beta,step_norm,value,outcome`.
pub fn write_trace_csv<W: Write>(mut out: W, rows: &[NewtonTraceRow]) -> std::io::Result<()> {
    writeln!(out, "iteration,alpha,beta,step_norm,value,outcome")?;
    for r in rows {
        let outcome = serde_json::to_value(r.outcome).expect("outcome serializes");
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{}",
            r.iteration,
            r.alpha,
            r.beta,
            r.step_norm,
            r.value,
            outcome.as_str().unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Resumable solver state. `eval` is always the model at the current
/// iterate.
#[derive(Debug, Clone)]
pub struct NewtonState<E> {
    eval: E,
    pub alpha: f64,
    pub beta: f64,
    /// Objective evaluations made through this state, including the initial
    /// one when the state was started with [`NewtonState::start`].
    pub eval_count: u64,
    /// `|delta|_inf` of the most recent search direction.
    pub last_step_norm: f64,
    /// Trial iterations performed.
    pub iterations: usize,
    /// Tenfold damping bumps needed to factorize `H + beta I`.
    pub damping_bumps: usize,
    direction: Option<DVector<f64>>,
    trace: Option<Vec<NewtonTraceRow>>,
}

impl<E: Model> NewtonState<E> {
    /// Evaluates the objective at `x0` and starts from there.
    pub fn start<O: Objective<Eval = E>>(
        objective: &O,
        x0: &DVector<f64>,
        params: &NewtonParams,
    ) -> Result<Self> {
        let mut s = Self::from_eval(objective.evaluate(x0)?, params);
        s.eval_count = 1;
        Ok(s)
    }

    /// Starts from an evaluation the caller already has.
    pub fn from_eval(eval: E, params: &NewtonParams) -> Self {
        Self {
            eval,
            alpha: params.alpha0,
            beta: params.beta0,
            eval_count: 0,
            last_step_norm: f64::INFINITY,
            iterations: 0,
            damping_bumps: 0,
            direction: None,
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn trace(&self) -> &[NewtonTraceRow] {
        self.trace.as_deref().unwrap_or_default()
    }

    pub fn eval(&self) -> &E {
        &self.eval
    }

    pub fn into_eval(self) -> E {
        self.eval
    }

    pub fn x(&self) -> &DVector<f64> {
        self.eval.point()
    }

    /// Swaps the cached model for one evaluated at the same point under new
    /// parameters (for example after a dual update). Step size and damping
    /// are kept; the search direction is recomputed on the next step.
    pub fn replace_cached_eval(&mut self, new_eval: E) -> Result<()> {
        if new_eval.point() != self.eval.point() {
            return Err(Error::CacheMismatch);
        }
        self.eval = new_eval;
        self.direction = None;
        Ok(())
    }

    /// Resets step size and damping to their initial values.
    pub fn reset_step(&mut self, params: &NewtonParams) {
        self.alpha = params.alpha0;
        self.beta = params.beta0;
        self.direction = None;
    }

    fn direction(&mut self) -> Result<DVector<f64>> {
        if let Some(d) = &self.direction {
            return Ok(d.clone());
        }
        let n = self.eval.point().len();
        let rhs = -self.eval.gradient();
        let mut damping = self.beta;
        for _ in 0..=MAX_DAMPING_BUMPS {
            let mut m = self.eval.hessian().clone();
            for i in 0..n {
                m[(i, i)] += damping;
            }
            if let Some(chol) = m.cholesky() {
                let d = chol.solve(&rhs);
                if d.iter().all(|v| v.is_finite()) {
                    self.direction = Some(d.clone());
                    return Ok(d);
                }
            }
            damping *= 10.0;
            self.damping_bumps += 1;
        }
        Err(Error::SingularSystem)
    }

    fn record(&mut self, step_norm: f64, outcome: StepOutcome) {
        if let Some(t) = &mut self.trace {
            t.push(NewtonTraceRow {
                iteration: self.iterations,
                alpha: self.alpha,
                beta: self.beta,
                step_norm,
                value: self.eval.value(),
                outcome,
            });
        }
    }
}

/// One trial iteration: at most one objective evaluation.
pub fn newton_step<O: Objective>(
    state: &mut NewtonState<O::Eval>,
    objective: &O,
    params: &NewtonParams,
) -> Result<StepOutcome> {
    if state.eval_count >= params.max_evals {
        state.record(state.last_step_norm, StepOutcome::Exhausted);
        return Ok(StepOutcome::Exhausted);
    }
    let delta = state.direction()?;
    let step_norm = inf_norm(&delta);
    state.last_step_norm = step_norm;
    state.iterations += 1;

    let f = state.eval.value();
    let slope = state.eval.gradient().dot(&delta);
    let x_trial = state.eval.point() + &delta * state.alpha;
    let trial = objective.trial(&x_trial)?;
    state.eval_count += 1;
    let f_trial = objective.trial_value(&trial);

    let decrease = params.rho * state.alpha * slope;
    let noise = params.noise_floor * (1.0 + f.abs());
    let accepted = f_trial.is_finite()
        && (f_trial <= f + decrease || (decrease.abs() <= noise && f_trial <= f + noise));
    let small = state.beta <= 1.0 && step_norm < params.delta;

    let outcome = if accepted {
        state.eval = objective.accept(trial)?;
        state.beta *= params.beta_minus;
        state.alpha = (params.alpha_plus * state.alpha).min(1.0);
        state.direction = None;
        if small {
            StepOutcome::Converged
        } else {
            StepOutcome::Accepted
        }
    } else if small {
        // The step is below tolerance; a rejection here is roundoff.
        StepOutcome::Converged
    } else if state.alpha * step_norm < GRADIENT_FAILURE_RATIO * params.delta {
        StepOutcome::GradientFailure
    } else {
        state.beta *= params.beta_plus;
        state.alpha *= params.alpha_minus;
        if params.beta_plus != 1.0 {
            state.direction = None;
        }
        StepOutcome::Rejected
    };
    state.record(step_norm, outcome);
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonStatus {
    Converged,
    Exhausted,
    GradientFailure,
}

/// Steps until convergence, budget exhaustion or failure.
pub fn run_to_convergence<O: Objective>(
    state: &mut NewtonState<O::Eval>,
    objective: &O,
    params: &NewtonParams,
) -> Result<NewtonStatus> {
    loop {
        match newton_step(state, objective, params)? {
            StepOutcome::Accepted | StepOutcome::Rejected => continue,
            StepOutcome::Converged => return Ok(NewtonStatus::Converged),
            StepOutcome::Exhausted => return Ok(NewtonStatus::Exhausted),
            StepOutcome::GradientFailure => return Ok(NewtonStatus::GradientFailure),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonRun<E> {
    pub state: NewtonState<E>,
    pub status: NewtonStatus,
}

/// Minimizes `objective` from `x0`.
pub fn newton_minimize<O: Objective>(
    objective: &O,
    x0: &DVector<f64>,
    params: &NewtonParams,
) -> Result<NewtonRun<O::Eval>> {
    params.validate()?;
    let mut state = NewtonState::start(objective, x0, params)?;
    let status = run_to_convergence(&mut state, objective, params)?;
    Ok(NewtonRun { state, status })
}
