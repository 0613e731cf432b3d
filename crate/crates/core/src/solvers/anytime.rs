use nalgebra::DVector;

use super::{Cadence, Progress, Solution, SolverOptions, Status, TraceEvent};
use crate::dual::anytime_update_with;
use crate::error::Result;
use crate::lagrangian::LagrangianEval;
use crate::newton::{newton_step, LagrangianObjective, NewtonState, StepOutcome};
use crate::problem::{kkt_residuals, ConstrainedProblem};

/// Interleaved augmented Lagrangian: a short Newton phase on
/// `L(., lambda, kappa)`, then the any-time dual update at the current
/// iterate, with the cached Newton model rebuilt under the new duals at the
/// same point (no extra evaluation).
pub fn solve_any_aula(
    problem: &ConstrainedProblem,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<Solution> {
    let mut progress = Progress::new(problem, x0, opts)?;
    let outcome = run(&mut progress, problem, x0, opts);
    progress.finish(outcome)
}

fn run(progress: &mut Progress, problem: &ConstrainedProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Result<Status> {
    let source = problem.evaluate(x0)?;
    progress.eval = Some(source.clone());
    let mut state = NewtonState::from_eval(
        LagrangianEval::new(source, &progress.dual, opts.hessian)?,
        &opts.newton,
    );
    // the budget covers the whole solve, including the start
    state.eval_count = 1;
    let mut params = opts.newton;
    let growth = opts.mu_growth();

    while progress.outer < opts.max_outer {
        // inner phase
        loop {
            let objective = LagrangianObjective::new(problem, &progress.dual, opts.hessian);
            let outcome = newton_step(&mut state, &objective, &params);
            progress.eval = Some(state.eval().source.clone());
            let outcome = outcome?;
            progress.record(state.eval().value, None, TraceEvent::NewtonStep);
            match outcome {
                StepOutcome::Rejected => {}
                StepOutcome::Accepted => {
                    params.delta *= opts.delta_double;
                    if opts.cadence == Cadence::SingleStep {
                        break;
                    }
                }
                StepOutcome::Converged => break,
                StepOutcome::Exhausted => return Ok(Status::MaxIter),
                StepOutcome::GradientFailure => {
                    return Ok(Status::Failed(super::FailureKind::GradientFailure))
                }
            }
        }

        progress.outer += 1;
        let update = anytime_update_with(state.eval(), &progress.dual, opts.row_selection)?;
        let flips = progress
            .dual
            .lambda()
            .iter()
            .zip(update.lambda.iter())
            .filter(|(old, new)| **old > 0.0 && **new == 0.0)
            .count();
        progress.dual = update.apply(&progress.dual)?;
        progress.dual_updates += 1;
        let source = state.eval().source.clone();
        state.replace_cached_eval(LagrangianEval::new(source.clone(), &progress.dual, opts.hessian)?)?;
        if opts.reset_delta {
            params.delta = opts.newton.delta;
        }

        if update.fallback {
            progress.record(state.eval().value, None, TraceEvent::Fallback);
        }
        for _ in 0..flips {
            progress.record(state.eval().value, None, TraceEvent::ActivityFlip);
        }
        let kkt = kkt_residuals(&source, &progress.dual)?;
        progress.record(state.eval().value, Some(kkt), TraceEvent::DualUpdate);
        if kkt.within(opts.outer_tol) {
            return Ok(Status::Converged);
        }
        if growth != 1.0 {
            progress.dual = progress
                .dual
                .with_penalties(progress.dual.mu() * growth, progress.dual.nu() * growth)?;
            state.replace_cached_eval(LagrangianEval::new(source, &progress.dual, opts.hessian)?)?;
            progress.record(state.eval().value, None, TraceEvent::MuUpdate);
        }
    }
    Ok(Status::MaxIter)
}
