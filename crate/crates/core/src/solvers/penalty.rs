use nalgebra::DVector;

use super::merit::{MeritEval, MeritKind, MeritObjective};
use super::{newton_status, Progress, Solution, SolverOptions, Status, TraceEvent};
use crate::error::Result;
use crate::newton::{NewtonState, NewtonStatus};
use crate::problem::{kkt_residuals, ConstrainedProblem};

/// Quadratic penalty method: minimize `f + mu sum [g]_+^2 + nu sum h^2`,
/// then multiply `mu` and `nu` by the growth factor, until the violation is
/// below `outer_tol`.
pub fn solve_sqrpenalty(
    problem: &ConstrainedProblem,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<Solution> {
    let mut progress = Progress::new(problem, x0, opts)?;
    let outcome = run(&mut progress, problem, x0, opts);
    progress.finish(outcome)
}

fn run(progress: &mut Progress, problem: &ConstrainedProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Result<Status> {
    let mut source = problem.evaluate(x0)?;
    progress.eval = Some(source.clone());
    let growth = opts.mu_growth();
    let (mut mu, mut nu) = (opts.mu0, opts.nu0);

    while progress.outer < opts.max_outer {
        let kind = MeritKind::Quadratic { mu, nu };
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
        let lambda = source.g.map(|gi| 2.0 * mu * gi.max(0.0));
        let kappa = &source.h * (2.0 * nu);
        progress.dual = progress.dual.with_multipliers(lambda, kappa)?;
        let kkt = kkt_residuals(&source, &progress.dual)?;
        if let Some(stop) = newton_status(inner) {
            return Ok(stop);
        }
        if inner == NewtonStatus::Converged && source.violation() < opts.outer_tol {
            progress.record(eval.value, Some(kkt), TraceEvent::MuUpdate);
            return Ok(Status::Converged);
        }
        mu *= growth;
        nu *= growth;
        progress.dual_updates += 1;
        progress.dual = progress.dual.with_penalties(mu, nu)?;
        progress.record(eval.value, Some(kkt), TraceEvent::MuUpdate);
    }
    Ok(Status::MaxIter)
}

#[cfg(test)]
mod tests {
    use super::super::test_problems::*;
    use super::super::Method;
    use super::*;
    use crate::newton::NewtonParams;
    use nalgebra::dvector;

    fn opts() -> SolverOptions {
        SolverOptions::for_method(Method::SqrPenalty)
    }

    #[test]
    fn inner_minimizer_is_one_minus_half_over_mu() {
        // x + mu (1 - x)^2 is minimized at 1 - 1/(2 mu)
        for mu in [1.0, 4.0, 50.0] {
            let p = at_least_one();
            let o = SolverOptions {
                mu0: mu,
                max_outer: 1,
                newton: NewtonParams {
                    delta: 1e-12,
                    ..NewtonParams::default()
                },
                ..opts()
            };
            let s = solve_sqrpenalty(&p, &dvector![0.0], &o).unwrap();
            assert!((s.x[0] - (1.0 - 0.5 / mu)).abs() < 1e-9, "mu {mu}: {}", s.x);
        }
    }

    #[test]
    fn converges_slightly_infeasible() {
        let p = at_least_one();
        let s = solve_sqrpenalty(&p, &dvector![0.0], &opts()).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert!(s.violation > 0.0 && s.violation < 1e-4, "{}", s.violation);
        assert!((s.dual.lambda()[0] - 1.0).abs() < 1e-3);
        assert_eq!(s.dual_updates, s.trace.count(TraceEvent::MuUpdate) - 1);
    }

    #[test]
    fn unconstrained_needs_one_solve() {
        let p = bowl();
        let s = solve_sqrpenalty(&p, &dvector![0.0, 0.0], &opts()).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert_eq!(s.dual_updates, 0);
    }
}
