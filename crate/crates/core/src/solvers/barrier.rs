use nalgebra::DVector;

use super::merit::{MeritEval, MeritKind, MeritObjective};
use super::{newton_status, FailureKind, Progress, Solution, SolverOptions, Status, TraceEvent};
use crate::error::Result;
use crate::newton::NewtonState;
use crate::problem::{kkt_residuals, ConstrainedProblem, ProblemEval};

/// Log-barrier method: minimize `f - tau sum log(-g) + nu sum h^2`, then
/// shrink `tau` (and grow `nu` by the same factor) until `tau m` and the
/// equality violation are below `outer_tol`. Needs a strictly feasible start.
pub fn solve_logbarrier(
    problem: &ConstrainedProblem,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<Solution> {
    let mut progress = Progress::new(problem, x0, opts)?;
    let outcome = run(&mut progress, problem, x0, opts);
    progress.finish(outcome)
}

fn barrier_duals(source: &ProblemEval, tau: f64, nu: f64) -> (DVector<f64>, DVector<f64>) {
    (source.g.map(|gi| tau / -gi), &source.h * (2.0 * nu))
}

fn run(progress: &mut Progress, problem: &ConstrainedProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Result<Status> {
    let values = problem.evaluate_values(x0)?;
    let feasible = values.g.iter().all(|gi| *gi < 0.0);
    let mut source = problem.complete(values)?;
    progress.eval = Some(source.clone());
    if !feasible {
        return Ok(Status::Failed(FailureKind::InfeasibleStart));
    }

    let m = problem.dim_g() as f64;
    let mut tau = opts.barrier_mu0;
    let mut nu = opts.nu0;
    while progress.outer < opts.max_outer {
        let kind = MeritKind::Barrier { tau, nu };
        let objective = MeritObjective {
            problem,
            kind,
            mode: opts.hessian,
        };
        let mut state = NewtonState::from_eval(MeritEval::new(source, kind, opts.hessian)?, &opts.newton);
        let inner = progress.run_inner(&mut state, &objective, &opts.newton);
        let eval = state.into_eval();
        source = eval.source;
        progress.eval = Some(source.clone());
        let inner = inner?;

        progress.outer += 1;
        let (lambda, kappa) = barrier_duals(&source, tau, nu);
        progress.dual = progress.dual.with_multipliers(lambda, kappa)?;
        let kkt = kkt_residuals(&source, &progress.dual)?;
        if let Some(stop) = newton_status(inner) {
            return Ok(stop);
        }
        if tau * m < opts.outer_tol && kkt.primal_eq < opts.outer_tol {
            progress.record(eval.value, Some(kkt), TraceEvent::MuUpdate);
            return Ok(Status::Converged);
        }
        tau *= opts.barrier_shrink;
        if problem.dim_h() > 0 {
            nu /= opts.barrier_shrink;
        }
        progress.dual_updates += 1;
        progress.dual = progress.dual.with_penalties(progress.dual.mu(), nu)?;
        progress.record(eval.value, Some(kkt), TraceEvent::MuUpdate);
    }
    Ok(Status::MaxIter)
}

#[cfg(test)]
mod tests {
    use super::super::test_problems::*;
    use super::super::Method;
    use super::*;
    use nalgebra::dvector;

    fn opts() -> SolverOptions {
        SolverOptions::for_method(Method::LogBarrier)
    }

    #[test]
    fn infeasible_start_fails_with_its_own_status() {
        let p = at_least_one();
        let s = solve_logbarrier(&p, &dvector![0.0], &opts()).unwrap();
        assert_eq!(s.status, Status::Failed(FailureKind::InfeasibleStart));
        assert_eq!(s.f_evals, 1);
        assert_eq!(s.x, dvector![0.0]);
    }

    #[test]
    fn boundary_start_is_infeasible() {
        let p = at_least_one();
        let s = solve_logbarrier(&p, &dvector![1.0], &opts()).unwrap();
        assert_eq!(s.status, Status::Failed(FailureKind::InfeasibleStart));
    }

    #[test]
    fn interior_start_converges() {
        // x + tau log-barrier has minimizer 1 + tau
        let p = at_least_one();
        let s = solve_logbarrier(&p, &dvector![3.0], &opts()).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert!((s.x[0] - 1.0).abs() < 1e-4, "{}", s.x);
        // tau / (x - 1) with x - 1 of the order of the final tau
        assert!((s.dual.lambda()[0] - 1.0).abs() < 0.05, "{}", s.dual.lambda());
        assert_eq!(s.violation, 0.0);
        assert_eq!(s.dual_updates, s.trace.count(TraceEvent::MuUpdate) - 1);
    }

    #[test]
    fn equality_only_reduces_to_penalty() {
        let p = pinned_at_three();
        let s = solve_logbarrier(&p, &dvector![0.0], &opts()).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert!((s.x[0] - 3.0).abs() < 1e-4);
    }
}
