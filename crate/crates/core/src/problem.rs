//! Constrained problem abstraction:
//!
//! ```text
//! min_x f(x)  s.t.  g(x) <= 0,  h(x) = 0
//! ```
//!
//! with `x` in R^n, `g` in R^m and `h` in R^l. Problems are evaluated through
//! [`ConstrainedProblem`], which counts every point evaluation; solvers derive
//! their reported evaluation counts from that counter only.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Lp,
    Qp,
    Custom,
}

/// Zeroth-order data at a point: objective and constraint values.
#[derive(Debug, Clone, PartialEq)]
pub struct PointValues {
    pub x: DVector<f64>,
    pub f: f64,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
}

/// First- and second-order data at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub grad_f: DVector<f64>,
    pub hess_f: DMatrix<f64>,
    /// `m x n`, row `i` is the gradient of `g_i`.
    pub jac_g: DMatrix<f64>,
    /// `l x n`, row `j` is the gradient of `h_j`.
    pub jac_h: DMatrix<f64>,
    pub hess_g: Option<Vec<DMatrix<f64>>>,
    pub hess_h: Option<Vec<DMatrix<f64>>>,
}

/// One full evaluation of a problem at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemEval {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_f: DVector<f64>,
    pub hess_f: DMatrix<f64>,
    pub g: DVector<f64>,
    pub jac_g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub jac_h: DMatrix<f64>,
    pub hess_g: Option<Vec<DMatrix<f64>>>,
    pub hess_h: Option<Vec<DMatrix<f64>>>,
    /// The problem declared `g` and `h` affine.
    pub affine: bool,
}

impl ProblemEval {
    pub fn from_parts(values: PointValues, d: Derivatives, affine: bool) -> Self {
        Self {
            x: values.x,
            f: values.f,
            grad_f: d.grad_f,
            hess_f: d.hess_f,
            g: values.g,
            jac_g: d.jac_g,
            h: values.h,
            jac_h: d.jac_h,
            hess_g: d.hess_g,
            hess_h: d.hess_h,
            affine,
        }
    }

    pub fn dim_x(&self) -> usize {
        self.x.len()
    }

    pub fn dim_g(&self) -> usize {
        self.g.len()
    }

    pub fn dim_h(&self) -> usize {
        self.h.len()
    }

    pub fn values(&self) -> PointValues {
        PointValues {
            x: self.x.clone(),
            f: self.f,
            g: self.g.clone(),
            h: self.h.clone(),
        }
    }

    /// `sum_i max(0, g_i) + sum_j |h_j|`.
    pub fn violation(&self) -> f64 {
        violation(&self.g, &self.h)
    }
}

/// Total constraint violation `sum_i max(0, g_i) + sum_j |h_j|`.
pub fn violation(g: &DVector<f64>, h: &DVector<f64>) -> f64 {
    g.iter().map(|v| v.max(0.0)).sum::<f64>() + h.iter().map(|v| v.abs()).sum::<f64>()
}

/// User-supplied problem definition.
///
/// Implementations must be deterministic: the same `x` yields identical
/// output. Dimension and finiteness checks happen in [`ConstrainedProblem`].
pub trait Evaluator: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_g(&self) -> usize;
    fn dim_h(&self) -> usize;

    fn kind(&self) -> ProblemKind {
        ProblemKind::Custom
    }

    /// Whether `g` and `h` are affine, so their Hessians vanish.
    fn affine_constraints(&self) -> bool {
        false
    }

    fn values(&self, x: &DVector<f64>) -> PointValues;

    fn derivatives(&self, x: &DVector<f64>) -> Derivatives;
}

/// An [`Evaluator`] together with a thread-safe evaluation counter.
pub struct ConstrainedProblem {
    evaluator: Arc<dyn Evaluator>,
    evaluations: AtomicU64,
}

impl fmt::Debug for ConstrainedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstrainedProblem")
            .field("dim_x", &self.dim_x())
            .field("dim_g", &self.dim_g())
            .field("dim_h", &self.dim_h())
            .field("kind", &self.kind())
            .field("evaluations", &self.evaluations())
            .finish()
    }
}

impl ConstrainedProblem {
    pub fn new<E: Evaluator + 'static>(evaluator: E) -> Self {
        Self::from_arc(Arc::new(evaluator))
    }

    pub fn from_arc(evaluator: Arc<dyn Evaluator>) -> Self {
        Self {
            evaluator,
            evaluations: AtomicU64::new(0),
        }
    }

    /// Same evaluator, fresh counter.
    pub fn duplicate(&self) -> Self {
        Self::from_arc(Arc::clone(&self.evaluator))
    }

    pub fn dim_x(&self) -> usize {
        self.evaluator.dim_x()
    }

    pub fn dim_g(&self) -> usize {
        self.evaluator.dim_g()
    }

    pub fn dim_h(&self) -> usize {
        self.evaluator.dim_h()
    }

    pub fn kind(&self) -> ProblemKind {
        self.evaluator.kind()
    }

    pub fn affine_constraints(&self) -> bool {
        self.evaluator.affine_constraints() || self.kind() != ProblemKind::Custom
    }

    /// Number of point evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Full evaluation at `x`. Counts as one evaluation.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<ProblemEval> {
        let values = self.evaluate_values(x)?;
        self.complete(values)
    }

    /// Values only (`f`, `g`, `h`) at `x`. Counts as one evaluation.
    pub fn evaluate_values(&self, x: &DVector<f64>) -> Result<PointValues> {
        check_len("point", self.dim_x(), x.len())?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let values = self.evaluator.values(x);
        check_len("g", self.dim_g(), values.g.len())?;
        check_len("h", self.dim_h(), values.h.len())?;
        finite_scalar("f", values.f)?;
        finite_vec("g", &values.g)?;
        finite_vec("h", &values.h)?;
        Ok(values)
    }

    /// Attaches derivatives to values previously obtained from
    /// [`evaluate_values`](Self::evaluate_values). The point was already
    /// counted, so this does not touch the counter.
    pub fn complete(&self, values: PointValues) -> Result<ProblemEval> {
        let (n, m, l) = (self.dim_x(), self.dim_g(), self.dim_h());
        let d = self.evaluator.derivatives(&values.x);
        check_len("grad_f", n, d.grad_f.len())?;
        check_shape("hess_f", &d.hess_f, n, n)?;
        check_shape("jac_g", &d.jac_g, m, n)?;
        check_shape("jac_h", &d.jac_h, l, n)?;
        finite_vec("grad_f", &d.grad_f)?;
        finite_mat("hess_f", &d.hess_f)?;
        finite_mat("jac_g", &d.jac_g)?;
        finite_mat("jac_h", &d.jac_h)?;
        if let Some(hg) = &d.hess_g {
            check_len("hess_g", m, hg.len())?;
            for hi in hg {
                check_shape("hess_g", hi, n, n)?;
            }
        }
        if let Some(hh) = &d.hess_h {
            check_len("hess_h", l, hh.len())?;
            for hj in hh {
                check_shape("hess_h", hj, n, n)?;
            }
        }
        Ok(ProblemEval::from_parts(values, d, self.affine_constraints()))
    }
}

fn check_shape(what: &'static str, a: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    check_len(what, rows, a.nrows())?;
    check_len(what, cols, a.ncols())
}

fn finite_scalar(what: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what,
            coordinate: None,
        })
    }
}

fn finite_vec(what: &'static str, v: &DVector<f64>) -> Result<()> {
    match v.iter().position(|e| !e.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite {
            what,
            coordinate: Some(i),
        }),
    }
}

fn finite_mat(what: &'static str, a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|e| e.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what,
            coordinate: None,
        })
    }
}

/// Multipliers and penalty weights. `lambda >= 0` holds for every value of
/// this type; the only way to set multipliers is through checked
/// constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    lambda: DVector<f64>,
    kappa: DVector<f64>,
    mu: f64,
    nu: f64,
}

impl DualState {
    /// Zero multipliers.
    pub fn zeros(m: usize, l: usize, mu: f64, nu: f64) -> Result<Self> {
        Self::new(DVector::zeros(m), DVector::zeros(l), mu, nu)
    }

    pub fn new(lambda: DVector<f64>, kappa: DVector<f64>, mu: f64, nu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite() && nu > 0.0 && nu.is_finite()) {
            return Err(Error::Config(format!(
                "penalty weights must be positive and finite (mu = {mu}, nu = {nu})"
            )));
        }
        check_multipliers(&lambda)?;
        Ok(Self {
            lambda,
            kappa,
            mu,
            nu,
        })
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn kappa(&self) -> &DVector<f64> {
        &self.kappa
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Replaces the multipliers, keeping the penalty weights.
    pub fn with_multipliers(&self, lambda: DVector<f64>, kappa: DVector<f64>) -> Result<Self> {
        check_len("lambda", self.lambda.len(), lambda.len())?;
        check_len("kappa", self.kappa.len(), kappa.len())?;
        Self::new(lambda, kappa, self.mu, self.nu)
    }

    pub fn with_penalties(&self, mu: f64, nu: f64) -> Result<Self> {
        Self::new(self.lambda.clone(), self.kappa.clone(), mu, nu)
    }

    pub(crate) fn check_dims(&self, m: usize, l: usize) -> Result<()> {
        check_len("lambda", m, self.lambda.len())?;
        check_len("kappa", l, self.kappa.len())
    }
}

fn check_multipliers(lambda: &DVector<f64>) -> Result<()> {
    for (index, &value) in lambda.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeMultiplier { index, value });
        }
    }
    Ok(())
}

/// Violation of each KKT condition, all in the infinity norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `|grad f + lambda^T grad g + kappa^T grad h|_inf`
    pub stationarity: f64,
    /// `max_i max(0, g_i)`
    pub primal_ineq: f64,
    /// `max_j |h_j|`
    pub primal_eq: f64,
    /// `max_i |lambda_i g_i|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_ineq)
            .max(self.primal_eq)
            .max(self.complementarity)
    }

    /// All four residuals at or below `tol`.
    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// KKT residuals of the state `(eval.x, lambda, kappa)`. Dual feasibility is
/// not measured: `DualState` cannot hold negative multipliers.
pub fn kkt_residuals(eval: &ProblemEval, dual: &DualState) -> Result<KktResiduals> {
    dual.check_dims(eval.dim_g(), eval.dim_h())?;
    let grad = &eval.grad_f + eval.jac_g.tr_mul(dual.lambda()) + eval.jac_h.tr_mul(dual.kappa());
    Ok(KktResiduals {
        stationarity: inf_norm(&grad),
        primal_ineq: eval.g.iter().fold(0.0, |a, &v| a.max(v)),
        primal_eq: inf_norm(&eval.h),
        complementarity: eval
            .g
            .iter()
            .zip(dual.lambda().iter())
            .fold(0.0, |a, (gi, li)| a.max((gi * li).abs())),
    })
}

pub(crate) fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, e| a.max(e.abs()))
}
