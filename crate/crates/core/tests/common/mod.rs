#![allow(dead_code)]

use aula::bench::{gen_random_lp, RandomLpSpec};
use aula::newton::{LagrangianObjective, NewtonStatus};
use aula::{activity_indicator, newton_minimize, ConstrainedProblem, DualState, HessianMode, LagrangianEval, LinearProblem, NewtonParams, ProblemEval};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| -> f64 { StandardNormal.sample(rng) })
}

/// Half the entries zero, the rest uniform in `(0, 2)`.
pub fn sparse_multipliers(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0) })
}

/// Strictly convex QP on top of a random LP's inequalities, with `l`
/// random equality rows.
pub fn random_qp(n: usize, l: usize, seed: u64) -> LinearProblem {
    let lp = gen_random_lp(&RandomLpSpec::new(n, 3 * n, seed)).unwrap();
    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let b = normal_mat(&mut r, n, n);
    let q = b.transpose() * &b + DMatrix::identity(n, n);
    let q = (&q + q.transpose()) * 0.5;
    LinearProblem::lp(
        normal_vec(&mut r, n, 1.0),
        lp.ineq_matrix().clone(),
        lp.ineq_offset().clone(),
        normal_mat(&mut r, l, n),
        normal_vec(&mut r, l, 1.0),
    )
    .unwrap()
    .with_quadratic(q)
    .unwrap()
}

/// Large budget: with unit damping, nearly flat pieces of a penalized LP
/// take thousands of small steps.
pub fn tight_params(delta: f64) -> NewtonParams {
    NewtonParams {
        delta,
        max_evals: 1_000_000,
        ..NewtonParams::default()
    }
}

/// Minimizes `L(., dual)` from `x0` with the Gauss-Newton Hessian.
pub fn minimize_lagrangian(
    problem: &ConstrainedProblem,
    dual: &DualState,
    x0: &DVector<f64>,
    params: &NewtonParams,
) -> (LagrangianEval, NewtonStatus) {
    let obj = LagrangianObjective::new(problem, dual, HessianMode::GaussNewton);
    let run = newton_minimize(&obj, x0, params).unwrap();
    (run.state.into_eval(), run.status)
}

/// Rows of `I_lambda(x) grad g` together with all rows of `grad h` are
/// linearly independent (relative singular value threshold `tol`).
pub fn active_rows_independent(eval: &ProblemEval, lambda: &DVector<f64>, tol: f64) -> bool {
    let mask = activity_indicator(&eval.g, lambda);
    let n = eval.dim_x();
    let rows: Vec<_> = (0..eval.dim_g())
        .filter(|&i| mask.is_active(i))
        .map(|i| eval.jac_g.row(i).into_owned())
        .chain((0..eval.dim_h()).map(|j| eval.jac_h.row(j).into_owned()))
        .collect();
    if rows.is_empty() {
        return true;
    }
    if rows.len() > n {
        return false;
    }
    let sv = DMatrix::from_rows(&rows).singular_values();
    sv.min() > tol * sv.max()
}
