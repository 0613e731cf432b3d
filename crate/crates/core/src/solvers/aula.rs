use nalgebra::DVector;

use super::{newton_status, Progress, Solution, SolverOptions, Status, TraceEvent};
use crate::dual::centered_update;
use crate::error::Result;
use crate::lagrangian::LagrangianEval;
use crate::newton::{LagrangianObjective, NewtonState};
use crate::problem::{kkt_residuals, ConstrainedProblem};

/// Nested augmented Lagrangian: minimize `L(., lambda, kappa)` to tolerance,
/// apply the centered update, repeat until the KKT residuals fall below
/// `outer_tol`.
pub fn solve_aula(problem: &ConstrainedProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Result<Solution> {
    let mut progress = Progress::new(problem, x0, opts)?;
    let outcome = run(&mut progress, problem, x0, opts);
    progress.finish(outcome)
}

fn run(progress: &mut Progress, problem: &ConstrainedProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Result<Status> {
    let constrained = problem.dim_g() + problem.dim_h() > 0;
    let mut source = problem.evaluate(x0)?;
    progress.eval = Some(source.clone());
    let growth = opts.mu_growth();

    while progress.outer < opts.max_outer {
        let dual = progress.dual.clone();
        let objective = LagrangianObjective::new(problem, &dual, opts.hessian);
        let start = LagrangianEval::new(source, &dual, opts.hessian)?;
        let mut state = NewtonState::from_eval(start, &opts.newton);
        let inner = progress.run_inner(&mut state, &objective, &opts.newton);
        source = state.into_eval().source;
        progress.eval = Some(source.clone());
        if let Some(stop) = newton_status(inner?) {
            return Ok(stop);
        }

        progress.outer += 1;
        if constrained {
            let update = centered_update(&source.g, &source.h, &progress.dual)?;
            let flips = progress
                .dual
                .lambda()
                .iter()
                .zip(update.lambda.iter())
                .filter(|(old, new)| **old > 0.0 && **new == 0.0)
                .count();
            progress.dual = update.apply(&progress.dual)?;
            progress.dual_updates += 1;
            for _ in 0..flips {
                progress.record(f64::NAN, None, TraceEvent::ActivityFlip);
            }
        }

        let kkt = kkt_residuals(&source, &progress.dual)?;
        let value = LagrangianEval::new(source.clone(), &progress.dual, opts.hessian)?.value;
        progress.record(value, Some(kkt), TraceEvent::DualUpdate);
        if kkt.within(opts.outer_tol) {
            return Ok(Status::Converged);
        }
        if growth != 1.0 {
            progress.dual = progress
                .dual
                .with_penalties(progress.dual.mu() * growth, progress.dual.nu() * growth)?;
            progress.record(value, None, TraceEvent::MuUpdate);
        }
    }
    Ok(Status::MaxIter)
}

#[cfg(test)]
mod tests {
    use super::super::test_problems::*;
    use super::*;
    use crate::newton::NewtonParams;
    use nalgebra::dvector;

    fn tight() -> SolverOptions {
        SolverOptions {
            newton: NewtonParams {
                delta: 1e-10,
                ..NewtonParams::default()
            },
            ..SolverOptions::default()
        }
    }

    #[test]
    fn one_dim_two_updates() {
        // x + (1 - x)^2 is minimized at 1/2, giving lambda = 2 * 1/2 = 1; the
        // next inner minimum of x + (1 - x)^2 + (1 - x) is x = 1.
        let p = at_least_one();
        let s = solve_aula(&p, &dvector![0.0], &tight()).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert_eq!(s.dual_updates, 2);
        assert!((s.x[0] - 1.0).abs() < 1e-8);
        assert!((s.dual.lambda()[0] - 1.0).abs() < 1e-8);
        let first = s
            .trace
            .records
            .iter()
            .find(|r| r.event == TraceEvent::DualUpdate)
            .unwrap();
        assert_eq!(first.outer_iter, 1);
        assert!((first.lambda_inf - 1.0).abs() < 1e-8);
    }

    #[test]
    fn first_inner_minimum_is_one_half() {
        let p = at_least_one();
        let o = SolverOptions {
            max_outer: 1,
            ..tight()
        };
        let s = solve_aula(&p, &dvector![0.0], &o).unwrap();
        assert_eq!(s.status, Status::MaxIter);
        assert!((s.x[0] - 0.5).abs() < 1e-9);
        assert!((s.dual.lambda()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_multiplier_converges() {
        let p = pinned_at_three();
        let s = solve_aula(&p, &dvector![0.0], &SolverOptions::default()).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert!((s.x[0] - 3.0).abs() < 1e-4, "{}", s.x);
        assert!((s.dual.kappa()[0] + 6.0).abs() < 1e-3, "{}", s.dual.kappa());
    }

    #[test]
    fn unconstrained_is_one_newton_run() {
        let p = bowl();
        let s = solve_aula(&p, &dvector![0.0, 0.0], &SolverOptions::default()).unwrap();
        let run = crate::newton::newton_minimize(
            &LagrangianObjective::new(&bowl(), &crate::problem::DualState::zeros(0, 0, 1.0, 1.0).unwrap(), Default::default()),
            &dvector![0.0, 0.0],
            &NewtonParams::default(),
        )
        .unwrap();
        assert_eq!(&s.x, run.state.x());
        assert_eq!(s.dual_updates, 0);
        assert_eq!(s.f_evals, run.state.eval_count);
    }

    #[test]
    fn counter_delta_excludes_earlier_work() {
        let p = at_least_one();
        p.evaluate(&dvector![5.0]).unwrap();
        let s = solve_aula(&p, &dvector![0.0], &SolverOptions::default()).unwrap();
        assert_eq!(s.f_evals, p.evaluations() - 1);
    }

    #[test]
    fn penalty_growth_is_recorded() {
        let p = at_least_one();
        let o = SolverOptions {
            mu_growth: Some(3.0),
            ..SolverOptions::default()
        };
        let s = solve_aula(&p, &dvector![0.0], &o).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert!(s.trace.count(TraceEvent::MuUpdate) >= 1);
        assert!(s.dual.mu() > 1.0);
    }
}
