//! Augmented Lagrangian with activity-switched squared penalties on the
//! inequalities:
//!
//! ```text
//! L(x, lambda, kappa) = f + mu sum_i [g_i >= 0 or lambda_i > 0] g_i^2 + lambda^T g
//!                         + nu sum_j h_j^2 + kappa^T h
//! ```
//!
//! An inequality carries its squared penalty whenever it is violated or its
//! multiplier is positive, so a constraint with `lambda_i > 0` is pulled
//! towards `g_i = 0` from both sides, exactly like an equality.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::problem::{DualState, ProblemEval};

/// Which inequalities carry a squared penalty at the current state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityMask {
    active: Vec<bool>,
}

impl ActivityMask {
    pub fn from_flags(active: Vec<bool>) -> Self {
        Self { active }
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// `1.0` for active rows, `0.0` otherwise.
    fn weight(&self, i: usize) -> f64 {
        if self.active[i] {
            1.0
        } else {
            0.0
        }
    }
}

/// Boundary convention for `g_i = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActivityRule {
    /// `g_i >= 0 or lambda_i > 0`
    #[default]
    Inclusive,
    /// `g_i > 0 or lambda_i > 0`
    Strict,
}

pub fn activity_indicator(g: &DVector<f64>, lambda: &DVector<f64>) -> ActivityMask {
    activity_indicator_with(g, lambda, ActivityRule::Inclusive)
}

pub fn activity_indicator_with(
    g: &DVector<f64>,
    lambda: &DVector<f64>,
    rule: ActivityRule,
) -> ActivityMask {
    assert_eq!(g.len(), lambda.len(), "constraint and multiplier lengths differ");
    let active = g
        .iter()
        .zip(lambda.iter())
        .map(|(&gi, &li)| {
            let violated = match rule {
                ActivityRule::Inclusive => gi >= 0.0,
                ActivityRule::Strict => gi > 0.0,
            };
            violated || li > 0.0
        })
        .collect();
    ActivityMask { active }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// Drop constraint curvature; keeps the model convex whenever `f` is.
    #[default]
    GaussNewton,
    Full,
}

fn check_dual(eval: &ProblemEval, dual: &DualState) -> Result<()> {
    check_len("lambda", eval.dim_g(), dual.lambda().len())?;
    check_len("kappa", eval.dim_h(), dual.kappa().len())
}

/// Value of `L` from zeroth-order data only.
pub(crate) fn value_from(
    f: f64,
    g: &DVector<f64>,
    h: &DVector<f64>,
    dual: &DualState,
) -> Result<f64> {
    check_len("lambda", g.len(), dual.lambda().len())?;
    check_len("kappa", h.len(), dual.kappa().len())?;
    let mask = activity_indicator(g, dual.lambda());
    let mut value = f;
    for (i, (&gi, &li)) in g.iter().zip(dual.lambda().iter()).enumerate() {
        value += (dual.mu() * mask.weight(i) * gi + li) * gi;
    }
    for (&hj, &kj) in h.iter().zip(dual.kappa().iter()) {
        value += (dual.nu() * hj + kj) * hj;
    }
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            what: "Lagrangian",
            coordinate: None,
        })
    }
}

pub fn lagrangian_value(eval: &ProblemEval, dual: &DualState) -> Result<f64> {
    value_from(eval.f, &eval.g, &eval.h, dual)
}

/// Per-row weights `2 mu I g + lambda` and `2 nu h + kappa`.
fn constraint_weights(
    eval: &ProblemEval,
    dual: &DualState,
    mask: &ActivityMask,
) -> (DVector<f64>, DVector<f64>) {
    let wg = DVector::from_fn(eval.dim_g(), |i, _| {
        2.0 * dual.mu() * mask.weight(i) * eval.g[i] + dual.lambda()[i]
    });
    let wh = DVector::from_fn(eval.dim_h(), |j, _| 2.0 * dual.nu() * eval.h[j] + dual.kappa()[j]);
    (wg, wh)
}

fn gradient_with(eval: &ProblemEval, dual: &DualState, mask: &ActivityMask) -> DVector<f64> {
    let (wg, wh) = constraint_weights(eval, dual, mask);
    &eval.grad_f + eval.jac_g.tr_mul(&wg) + eval.jac_h.tr_mul(&wh)
}

/// `grad f + [2 mu I g + lambda]^T grad g + [2 nu h + kappa]^T grad h`.
pub fn lagrangian_gradient(eval: &ProblemEval, dual: &DualState) -> Result<DVector<f64>> {
    check_dual(eval, dual)?;
    let mask = activity_indicator(&eval.g, dual.lambda());
    Ok(gradient_with(eval, dual, &mask))
}

fn hessian_with(
    eval: &ProblemEval,
    dual: &DualState,
    mask: &ActivityMask,
    mode: HessianMode,
) -> Result<DMatrix<f64>> {
    let n = eval.dim_x();
    let mut hess = eval.hess_f.clone();
    for i in 0..eval.dim_g() {
        if mask.is_active(i) {
            let row = eval.jac_g.row(i);
            hess.ger(2.0 * dual.mu(), &row.transpose(), &row.transpose(), 1.0);
        }
    }
    for j in 0..eval.dim_h() {
        let row = eval.jac_h.row(j);
        hess.ger(2.0 * dual.nu(), &row.transpose(), &row.transpose(), 1.0);
    }
    if mode == HessianMode::Full && !eval.affine {
        let (wg, wh) = constraint_weights(eval, dual, mask);
        let missing = || {
            Error::Config("full Hessian mode needs constraint Hessians for non-affine constraints".into())
        };
        if eval.dim_g() > 0 {
            let hg = eval.hess_g.as_ref().ok_or_else(missing)?;
            for (w, hi) in wg.iter().zip(hg) {
                hess += hi * *w;
            }
        }
        if eval.dim_h() > 0 {
            let hh = eval.hess_h.as_ref().ok_or_else(missing)?;
            for (w, hj) in wh.iter().zip(hh) {
                hess += hj * *w;
            }
        }
    }
    debug_assert_eq!(hess.nrows(), n);
    Ok(hess)
}

pub fn lagrangian_hessian(
    eval: &ProblemEval,
    dual: &DualState,
    mode: HessianMode,
) -> Result<DMatrix<f64>> {
    check_dual(eval, dual)?;
    let mask = activity_indicator(&eval.g, dual.lambda());
    hessian_with(eval, dual, &mask, mode)
}

/// `L`, its gradient and Hessian, all computed from one [`ProblemEval`] and
/// one dual state so they stay mutually consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub mask: ActivityMask,
    pub source: ProblemEval,
}

impl LagrangianEval {
    pub fn new(source: ProblemEval, dual: &DualState, mode: HessianMode) -> Result<Self> {
        check_dual(&source, dual)?;
        let mask = activity_indicator(&source.g, dual.lambda());
        let value = lagrangian_value(&source, dual)?;
        let gradient = gradient_with(&source, dual, &mask);
        let hessian = hessian_with(&source, dual, &mask, mode)?;
        Ok(Self {
            value,
            gradient,
            hessian,
            mask,
            source,
        })
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.source.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcheck::{fd_gradient, relative_error};
    use crate::linear::LinearProblem;
    use crate::problem::{ConstrainedProblem, Derivatives, Evaluator, PointValues};
    use nalgebra::dvector;

    fn bare_eval(f: f64, g: DVector<f64>, h: DVector<f64>) -> ProblemEval {
        let (m, l) = (g.len(), h.len());
        ProblemEval {
            x: dvector![0.0],
            f,
            grad_f: dvector![0.0],
            hess_f: DMatrix::zeros(1, 1),
            g,
            jac_g: DMatrix::zeros(m, 1),
            h,
            jac_h: DMatrix::zeros(l, 1),
            hess_g: None,
            hess_h: None,
            affine: true,
        }
    }

    fn dual(lambda: DVector<f64>, kappa: DVector<f64>) -> DualState {
        DualState::new(lambda, kappa, 1.0, 1.0).unwrap()
    }

    #[test]
    fn indicator_cases() {
        assert_eq!(activity_indicator(&dvector![-0.5], &dvector![0.0]).flags(), &[false]);
        assert_eq!(activity_indicator(&dvector![-0.5], &dvector![0.1]).flags(), &[true]);
        assert_eq!(activity_indicator(&dvector![0.0], &dvector![0.0]).flags(), &[true]);
        let strict = activity_indicator_with(&dvector![0.0], &dvector![0.0], ActivityRule::Strict);
        assert_eq!(strict.flags(), &[false]);
    }

    #[test]
    fn value_by_substitution() {
        let e = bare_eval(0.0, dvector![-1.0], DVector::zeros(0));
        assert_eq!(lagrangian_value(&e, &dual(dvector![0.0], DVector::zeros(0))).unwrap(), 0.0);

        // mu g^2 + lambda g = 0.25 + 0.5
        let e = bare_eval(0.0, dvector![0.5], DVector::zeros(0));
        let v = lagrangian_value(&e, &dual(dvector![1.0], DVector::zeros(0))).unwrap();
        assert!((v - 0.75).abs() < 1e-15);

        // f + nu h^2 + kappa h = 2 + 0.09 + 0.12
        let e = bare_eval(2.0, DVector::zeros(0), dvector![0.3]);
        let v = lagrangian_value(&e, &dual(DVector::zeros(0), dvector![0.4])).unwrap();
        assert!((v - 2.21).abs() < 1e-14);
    }

    #[test]
    fn inactive_and_zero_duals_leave_f() {
        let e = bare_eval(3.25, dvector![-1.0, -2.0], dvector![]);
        assert_eq!(lagrangian_value(&e, &dual(dvector![0.0, 0.0], dvector![])).unwrap(), 3.25);
    }

    fn one_row_lp() -> (ConstrainedProblem, DVector<f64>) {
        // min (1, -2) x  s.t.  (0.5, 1) x - 1 <= 0
        let lp = LinearProblem::lp(
            dvector![1.0, -2.0],
            DMatrix::from_row_slice(1, 2, &[0.5, 1.0]),
            dvector![-1.0],
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        (lp.into_problem(), dvector![0.5, 1.0])
    }

    #[test]
    fn lp_active_gradient_and_hessian() {
        let (p, a) = one_row_lp();
        let e = p.evaluate(&dvector![1.0, 2.0]).unwrap();
        assert!(e.g[0] > 0.0);
        let d = dual(dvector![0.0], DVector::zeros(0));
        let grad = lagrangian_gradient(&e, &d).unwrap();
        let expected = e.grad_f.clone() + &a * (2.0 * e.g[0]);
        assert!((grad - expected).amax() < 1e-15);

        let hess = lagrangian_hessian(&e, &d, HessianMode::GaussNewton).unwrap();
        assert!((hess.clone() - &a * a.transpose() * 2.0).amax() < 1e-15);
        assert_eq!(hess, lagrangian_hessian(&e, &d, HessianMode::Full).unwrap());
    }

    #[test]
    fn inactive_hessian_is_hess_f() {
        let (p, _) = one_row_lp();
        let e = p.evaluate(&dvector![0.0, 0.0]).unwrap();
        let h = lagrangian_hessian(&e, &dual(dvector![0.0], DVector::zeros(0)), HessianMode::GaussNewton)
            .unwrap();
        assert_eq!(h, e.hess_f);
    }

    /// Unit circle constraint without supplied Hessians.
    struct Disk {
        with_hessians: bool,
    }

    impl Evaluator for Disk {
        fn dim_x(&self) -> usize {
            2
        }
        fn dim_g(&self) -> usize {
            1
        }
        fn dim_h(&self) -> usize {
            1
        }
        fn values(&self, x: &DVector<f64>) -> PointValues {
            PointValues {
                x: x.clone(),
                f: x[0].exp() + x[1] * x[1],
                g: dvector![x.dot(x) - 1.0],
                h: dvector![x[0] * x[1] - 0.2],
            }
        }
        fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
            Derivatives {
                grad_f: dvector![x[0].exp(), 2.0 * x[1]],
                hess_f: DMatrix::from_row_slice(2, 2, &[x[0].exp(), 0.0, 0.0, 2.0]),
                jac_g: DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]),
                jac_h: DMatrix::from_row_slice(1, 2, &[x[1], x[0]]),
                hess_g: self.with_hessians.then(|| vec![DMatrix::identity(2, 2) * 2.0]),
                hess_h: self
                    .with_hessians
                    .then(|| vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])]),
            }
        }
    }

    #[test]
    fn full_mode_requires_constraint_hessians() {
        let p = ConstrainedProblem::new(Disk { with_hessians: false });
        let e = p.evaluate(&dvector![0.9, 0.8]).unwrap();
        let d = dual(dvector![0.3], dvector![0.1]);
        assert!(matches!(lagrangian_hessian(&e, &d, HessianMode::Full), Err(Error::Config(_))));
        assert!(lagrangian_hessian(&e, &d, HessianMode::GaussNewton).is_ok());
    }

    #[test]
    fn full_hessian_matches_fd_of_gradient() {
        let p = ConstrainedProblem::new(Disk { with_hessians: true });
        let d = dual(dvector![0.3], dvector![-0.4]);
        let x = dvector![0.9, 0.8];
        let e = p.evaluate(&x).unwrap();
        let hess = lagrangian_hessian(&e, &d, HessianMode::Full).unwrap();
        for k in 0..2 {
            let col = fd_gradient(
                |y| {
                    let ey = p.evaluate(y).unwrap();
                    lagrangian_gradient(&ey, &d).unwrap()[k]
                },
                &x,
                1e-6,
            );
            assert!(relative_error(&hess.row(k).transpose(), &col) < 1e-6);
        }
    }

    #[test]
    fn gradient_matches_fd_away_from_boundaries() {
        let p = ConstrainedProblem::new(Disk { with_hessians: true });
        let d = dual(dvector![0.0], dvector![0.7]);
        for x in [dvector![0.9, 0.8], dvector![0.1, -0.3], dvector![-1.5, 0.2]] {
            let e = p.evaluate(&x).unwrap();
            let grad = lagrangian_gradient(&e, &d).unwrap();
            let fd = fd_gradient(
                |y| lagrangian_value(&p.evaluate(y).unwrap(), &d).unwrap(),
                &x,
                1e-6,
            );
            assert!(relative_error(&grad, &fd) < 1e-5, "{x}");
        }
    }

    #[test]
    fn eval_bundle_is_consistent() {
        let p = ConstrainedProblem::new(Disk { with_hessians: true });
        let d = dual(dvector![0.5], dvector![0.2]);
        let e = p.evaluate(&dvector![0.2, 0.1]).unwrap();
        let le = LagrangianEval::new(e.clone(), &d, HessianMode::GaussNewton).unwrap();
        assert_eq!(le.value, lagrangian_value(&e, &d).unwrap());
        assert_eq!(le.gradient, lagrangian_gradient(&e, &d).unwrap());
        assert_eq!(le.mask.flags(), &[true]);
        assert_eq!(le.x(), &e.x);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_state() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)> {
            (1usize..5, 0usize..3).prop_flat_map(|(m, l)| {
                (
                    proptest::collection::vec(-2.0f64..2.0, m),
                    proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], m),
                    proptest::collection::vec(-2.0f64..2.0, l),
                    proptest::collection::vec(-2.0f64..2.0, l),
                    0.1f64..10.0,
                    0.1f64..10.0,
                )
            })
        }

        proptest! {
            #[test]
            fn mask_invariants((g, lam, _, _, _, _) in arb_state()) {
                let mask = activity_indicator(&DVector::from_vec(g.clone()), &DVector::from_vec(lam.clone()));
                for i in 0..g.len() {
                    if lam[i] > 0.0 || g[i] >= 0.0 {
                        prop_assert!(mask.is_active(i));
                    } else {
                        prop_assert!(!mask.is_active(i));
                    }
                }
            }

            #[test]
            fn multiplier_sensitivity_is_g((g, lam, h, kap, mu, nu) in arb_state(), i in 0usize..5, step in 0.01f64..1.0) {
                let i = i % g.len();
                let g = DVector::from_vec(g);
                let h = DVector::from_vec(h);
                let mut lam = DVector::from_vec(lam);
                // keep the mask fixed: the perturbed multiplier stays positive
                lam[i] += 0.5;
                let d0 = DualState::new(lam.clone(), DVector::from_vec(kap.clone()), mu, nu).unwrap();
                lam[i] += step;
                let d1 = DualState::new(lam, DVector::from_vec(kap), mu, nu).unwrap();
                let l0 = value_from(1.0, &g, &h, &d0).unwrap();
                let l1 = value_from(1.0, &g, &h, &d1).unwrap();
                prop_assert!(((l1 - l0) - step * g[i]).abs() < 1e-12 * (1.0 + l0.abs()));
            }

            #[test]
            fn gauss_newton_psd_for_convex_f(rows in proptest::collection::vec(prop::array::uniform3(-2.0f64..2.0), 1..6),
                                             lam in proptest::collection::vec(0.0f64..2.0, 6),
                                             xs in prop::array::uniform3(-2.0f64..2.0)) {
                let m = rows.len();
                let lp = LinearProblem::lp(
                    DVector::from_element(3, 1.0),
                    DMatrix::from_fn(m, 3, |i, j| rows[i][j]),
                    DVector::zeros(m),
                    DMatrix::zeros(0, 3),
                    DVector::zeros(0),
                ).unwrap().with_quadratic(DMatrix::identity(3, 3)).unwrap();
                let p = lp.into_problem();
                let e = p.evaluate(&DVector::from_row_slice(&xs)).unwrap();
                let d = DualState::new(DVector::from_fn(m, |i, _| lam[i]), DVector::zeros(0), 1.0, 1.0).unwrap();
                let hess = lagrangian_hessian(&e, &d, HessianMode::GaussNewton).unwrap();
                let eig = hess.symmetric_eigenvalues();
                prop_assert!(eig.min() > -1e-10);
            }
        }
    }
}
