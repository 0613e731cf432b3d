//! Outer-loop drivers.
//!
//! All four methods share [`SolverOptions`] and report a [`Solution`] whose
//! `f_evals` is the change of the problem's evaluation counter during the
//! solve. Numerical breakdowns inside a solve (non-finite values, a singular
//! Newton system) end the solve with a failed status instead of an error, so
//! a benchmark sweep can record them.

mod anytime;
mod aula;
mod barrier;
mod merit;
mod penalty;

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dual::RowSelection;
use crate::error::{Error, Result};
use crate::lagrangian::HessianMode;
use crate::newton::{newton_step, NewtonParams, NewtonState, NewtonStatus, Objective, StepOutcome};
use crate::problem::{inf_norm, kkt_residuals, ConstrainedProblem, DualState, KktResiduals, ProblemEval};

pub use anytime::solve_any_aula;
pub use aula::solve_aula;
pub use barrier::solve_logbarrier;
pub use merit::{MeritEval, MeritKind, MeritObjective};
pub use penalty::solve_sqrpenalty;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Aula,
    AnyAula,
    LogBarrier,
    SqrPenalty,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::AnyAula, Method::Aula, Method::LogBarrier, Method::SqrPenalty];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Aula => "aula",
            Method::AnyAula => "any_aula",
            Method::LogBarrier => "log_barrier",
            Method::SqrPenalty => "sqr_penalty",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// How many Newton steps AnyAula takes between dual updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// One accepted step (rejected trials do not trigger an update).
    #[default]
    SingleStep,
    /// Steps until Newton's stopping test holds, with the tolerance
    /// multiplied by `delta_double` after every accepted step.
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub method: Method,
    pub mu0: f64,
    pub nu0: f64,
    /// Penalty growth per outer iteration. `None` picks the method default:
    /// 1 for the Lagrangian methods, 2 for the squared penalty.
    pub mu_growth: Option<f64>,
    pub barrier_mu0: f64,
    pub barrier_shrink: f64,
    pub newton: NewtonParams,
    pub outer_tol: f64,
    pub delta_double: f64,
    pub max_outer: usize,
    pub cadence: Cadence,
    /// Restore the Newton tolerance after every any-time update.
    pub reset_delta: bool,
    pub row_selection: RowSelection,
    pub hessian: HessianMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Aula,
            mu0: 1.0,
            nu0: 1.0,
            mu_growth: None,
            barrier_mu0: 1.0,
            barrier_shrink: 0.5,
            newton: NewtonParams::default(),
            outer_tol: 1e-4,
            delta_double: 2.0,
            max_outer: 1000,
            cadence: Cadence::SingleStep,
            reset_delta: true,
            row_selection: RowSelection::Mask,
            hessian: HessianMode::GaussNewton,
        }
    }
}

impl SolverOptions {
    pub fn for_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn mu_growth(&self) -> f64 {
        self.mu_growth.unwrap_or(match self.method {
            Method::SqrPenalty => 2.0,
            _ => 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.newton.validate()?;
        let checks = [
            (self.mu0 > 0.0 && self.mu0.is_finite(), "mu0 must be positive"),
            (self.nu0 > 0.0 && self.nu0.is_finite(), "nu0 must be positive"),
            (self.mu_growth() >= 1.0 && self.mu_growth().is_finite(), "mu_growth must be at least 1"),
            (self.barrier_mu0 > 0.0 && self.barrier_mu0.is_finite(), "barrier_mu0 must be positive"),
            (
                self.barrier_shrink > 0.0 && self.barrier_shrink < 1.0,
                "barrier_shrink must lie in (0, 1)",
            ),
            (self.outer_tol > 0.0, "outer_tol must be positive"),
            (self.delta_double >= 1.0 && self.delta_double.is_finite(), "delta_double must be at least 1"),
            (self.max_outer > 0, "max_outer must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    InfeasibleStart,
    GradientFailure,
    Singular,
    Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Failed(FailureKind),
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Failed(FailureKind::InfeasibleStart) => "failed_infeasible_start",
            Status::Failed(FailureKind::GradientFailure) => "failed_gradient",
            Status::Failed(FailureKind::Singular) => "failed_singular",
            Status::Failed(FailureKind::Evaluation) => "failed_evaluation",
        }
    }

    pub fn is_converged(self) -> bool {
        self == Status::Converged
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    NewtonStep,
    DualUpdate,
    MuUpdate,
    /// The any-time system was singular; the centered update was used.
    Fallback,
    /// A multiplier went from positive to zero.
    ActivityFlip,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::NewtonStep => "newton_step",
            TraceEvent::DualUpdate => "dual_update",
            TraceEvent::MuUpdate => "mu_update",
            TraceEvent::Fallback => "fallback",
            TraceEvent::ActivityFlip => "activity_flip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer_iter: usize,
    /// Evaluations since the solve started.
    pub inner_evals: u64,
    /// Value of the function the inner solver is minimizing.
    pub value: f64,
    pub kkt: Option<KktResiduals>,
    pub lambda_inf: f64,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn count(&self, event: TraceEvent) -> usize {
        self.records.iter().filter(|r| r.event == event).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "outer_iter,inner_evals,value,stationarity,primal_ineq,primal_eq,complementarity,lambda_inf,event"
        )?;
        for r in &self.records {
            let k = |f: fn(&KktResiduals) -> f64| r.kkt.as_ref().map(|k| format!("{:e}", f(k))).unwrap_or_default();
            writeln!(
                out,
                "{},{},{:e},{},{},{},{},{:e},{}",
                r.outer_iter,
                r.inner_evals,
                r.value,
                k(|k| k.stationarity),
                k(|k| k.primal_ineq),
                k(|k| k.primal_eq),
                k(|k| k.complementarity),
                r.lambda_inf,
                r.event.as_str()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DVector<f64>,
    pub dual: DualState,
    pub kkt: KktResiduals,
    pub f_final: f64,
    /// `sum [g]_+ + sum |h|` at `x`.
    pub violation: f64,
    pub f_evals: u64,
    /// Dual updates for the Lagrangian methods, penalty or barrier updates
    /// for the baselines.
    pub dual_updates: usize,
    pub trace: SolveTrace,
    pub status: Status,
}

/// Solves with the method named in `opts`.
pub fn solve(problem: &ConstrainedProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Result<Solution> {
    match opts.method {
        Method::Aula => solve_aula(problem, x0, opts),
        Method::AnyAula => solve_any_aula(problem, x0, opts),
        Method::LogBarrier => solve_logbarrier(problem, x0, opts),
        Method::SqrPenalty => solve_sqrpenalty(problem, x0, opts),
    }
}

/// Bookkeeping shared by the drivers.
pub(crate) struct Progress<'a> {
    problem: &'a ConstrainedProblem,
    start_evals: u64,
    pub x: DVector<f64>,
    pub dual: DualState,
    pub eval: Option<ProblemEval>,
    pub outer: usize,
    pub dual_updates: usize,
    pub trace: SolveTrace,
}

impl<'a> Progress<'a> {
    pub fn new(problem: &'a ConstrainedProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Result<Self> {
        opts.validate()?;
        if x0.len() != problem.dim_x() {
            return Err(Error::DimensionMismatch {
                what: "x0",
                expected: problem.dim_x(),
                found: x0.len(),
            });
        }
        Ok(Self {
            problem,
            start_evals: problem.evaluations(),
            x: x0.clone(),
            dual: DualState::zeros(problem.dim_g(), problem.dim_h(), opts.mu0, opts.nu0)?,
            eval: None,
            outer: 0,
            dual_updates: 0,
            trace: SolveTrace::default(),
        })
    }

    pub fn evals(&self) -> u64 {
        self.problem.evaluations() - self.start_evals
    }

    pub fn record(&mut self, value: f64, kkt: Option<KktResiduals>, event: TraceEvent) {
        let lambda_inf = inf_norm(self.dual.lambda());
        self.trace.records.push(TraceRecord {
            outer_iter: self.outer,
            inner_evals: self.evals(),
            value,
            kkt,
            lambda_inf,
            event,
        });
    }

    /// Steps until the inner solver stops, recording every step.
    pub fn run_inner<O: Objective>(
        &mut self,
        state: &mut NewtonState<O::Eval>,
        objective: &O,
        params: &NewtonParams,
    ) -> Result<NewtonStatus>
    where
        O::Eval: crate::newton::Model,
    {
        use crate::newton::Model;
        loop {
            let outcome = newton_step(state, objective, params)?;
            self.record(state.eval().value(), None, TraceEvent::NewtonStep);
            match outcome {
                StepOutcome::Accepted | StepOutcome::Rejected => {}
                StepOutcome::Converged => return Ok(NewtonStatus::Converged),
                StepOutcome::Exhausted => return Ok(NewtonStatus::Exhausted),
                StepOutcome::GradientFailure => return Ok(NewtonStatus::GradientFailure),
            }
        }
    }

    pub fn kkt(&self) -> Result<KktResiduals> {
        match &self.eval {
            Some(e) => kkt_residuals(e, &self.dual),
            None => Ok(KktResiduals {
                stationarity: f64::NAN,
                primal_ineq: f64::NAN,
                primal_eq: f64::NAN,
                complementarity: f64::NAN,
            }),
        }
    }

    /// Turns the body's outcome into a solution; numerical breakdowns become
    /// a failed status.
    pub fn finish(self, outcome: Result<Status>) -> Result<Solution> {
        let status = match outcome {
            Ok(s) => s,
            Err(Error::NonFinite { .. }) => Status::Failed(FailureKind::Evaluation),
            Err(Error::SingularSystem) => Status::Failed(FailureKind::Singular),
            Err(e) => return Err(e),
        };
        let kkt = self.kkt()?;
        let (f_final, violation) = match &self.eval {
            Some(e) => (e.f, e.violation()),
            None => (f64::NAN, f64::NAN),
        };
        let f_evals = self.evals();
        Ok(Solution {
            x: self.eval.as_ref().map(|e| e.x.clone()).unwrap_or(self.x),
            dual: self.dual,
            kkt,
            f_final,
            violation,
            f_evals,
            dual_updates: self.dual_updates,
            trace: self.trace,
            status,
        })
    }
}

pub(crate) fn newton_status(status: NewtonStatus) -> Option<Status> {
    match status {
        NewtonStatus::Converged => None,
        NewtonStatus::Exhausted => Some(Status::MaxIter),
        NewtonStatus::GradientFailure => Some(Status::Failed(FailureKind::GradientFailure)),
    }
}

#[cfg(test)]
pub(crate) mod test_problems {
    use nalgebra::{dvector, DMatrix, DVector};

    use crate::linear::LinearProblem;
    use crate::problem::ConstrainedProblem;

    /// min x  s.t.  1 - x <= 0
    pub fn at_least_one() -> ConstrainedProblem {
        LinearProblem::lp(
            dvector![1.0],
            DMatrix::from_element(1, 1, -1.0),
            dvector![1.0],
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap()
        .into_problem()
    }

    /// min x^2  s.t.  x - 3 = 0
    pub fn pinned_at_three() -> ConstrainedProblem {
        LinearProblem::lp(
            dvector![0.0],
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            DMatrix::from_element(1, 1, 1.0),
            dvector![-3.0],
        )
        .unwrap()
        .with_quadratic(DMatrix::from_element(1, 1, 2.0))
        .unwrap()
        .into_problem()
    }

    /// min (x0 - 1)^2 + (x1 + 2)^2 without constraints
    pub fn bowl() -> ConstrainedProblem {
        LinearProblem::lp(
            dvector![-2.0, 4.0],
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap()
        .with_quadratic(DMatrix::identity(2, 2) * 2.0)
        .unwrap()
        .with_constant(5.0)
        .into_problem()
    }
}
