//! Dual parameter updates.
//!
//! The centered update `lambda' = max(0, lambda + 2 mu g)`,
//! `kappa' = kappa + 2 nu h` is meant to be applied at a minimizer of `L`.
//! The any-time update works at arbitrary `x`: it picks the multipliers whose
//! linear terms best reproduce the gradient currently generated by the
//! squared penalties, minus whatever `grad L` is still left over. It is
//! solved in closed form on the active rows and then clipped to
//! `lambda' >= 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lagrangian::{activity_indicator, LagrangianEval};
use crate::problem::DualState;

/// Relative ridge on `A A^T` in the any-time solve.
pub const RIDGE_SCALE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DualUpdateResult {
    pub lambda: DVector<f64>,
    pub kappa: DVector<f64>,
    /// Inequality rows that entered the least-squares system.
    pub active_rows: Vec<bool>,
    /// Rows whose multiplier was truncated to zero.
    pub clipped: Vec<bool>,
    /// Any-time objective before clipping (squared norm); zero for centered
    /// updates.
    pub residual: f64,
    /// The any-time system was singular and the centered update was used.
    pub fallback: bool,
}

impl DualUpdateResult {
    pub fn any_clipped(&self) -> bool {
        self.clipped.iter().any(|c| *c)
    }

    /// The updated dual state with the penalty weights of `dual`.
    pub fn apply(&self, dual: &DualState) -> Result<DualState> {
        dual.with_multipliers(self.lambda.clone(), self.kappa.clone())
    }
}

/// `lambda' = max(0, lambda + 2 mu g)`, `kappa' = kappa + 2 nu h`.
pub fn centered_update(
    g: &DVector<f64>,
    h: &DVector<f64>,
    dual: &DualState,
) -> Result<DualUpdateResult> {
    check_len("lambda", g.len(), dual.lambda().len())?;
    check_len("kappa", h.len(), dual.kappa().len())?;
    let raw = dual.lambda() + g * (2.0 * dual.mu());
    let clipped: Vec<bool> = raw.iter().map(|v| *v < 0.0).collect();
    let lambda = raw.map(|v| v.max(0.0));
    let kappa = dual.kappa() + h * (2.0 * dual.nu());
    Ok(DualUpdateResult {
        active_rows: vec![true; g.len()],
        lambda,
        kappa,
        clipped,
        residual: 0.0,
        fallback: false,
    })
}

/// Which inequality rows enter the any-time least-squares system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSelection {
    /// Rows flagged by the activity mask: `g_i >= 0` or `lambda_i > 0`.
    /// Violated rows with zero multiplier can acquire one.
    #[default]
    Mask,
    /// Only rows with `lambda_i > 0`.
    PositiveMultipliers,
}

pub fn anytime_update(leval: &LagrangianEval, dual: &DualState) -> Result<DualUpdateResult> {
    anytime_update_with(leval, dual, RowSelection::Mask)
}

pub fn anytime_update_with(
    leval: &LagrangianEval,
    dual: &DualState,
    selection: RowSelection,
) -> Result<DualUpdateResult> {
    let e = &leval.source;
    check_len("lambda", e.dim_g(), dual.lambda().len())?;
    check_len("kappa", e.dim_h(), dual.kappa().len())?;
    if activity_indicator(&e.g, dual.lambda()) != leval.mask {
        return Err(Error::Config(
            "Lagrangian evaluation was computed with different multipliers".into(),
        ));
    }
    let (n, m, l) = (e.dim_x(), e.dim_g(), e.dim_h());
    let (mu, nu) = (dual.mu(), dual.nu());

    let rows: Vec<usize> = (0..m)
        .filter(|&i| match selection {
            RowSelection::Mask => leval.mask.is_active(i),
            RowSelection::PositiveMultipliers => dual.lambda()[i] > 0.0,
        })
        .collect();
    let k = rows.len() + l;

    let mut a = DMatrix::zeros(k, n);
    let mut y = DVector::zeros(k);
    for (r, &i) in rows.iter().enumerate() {
        a.set_row(r, &e.jac_g.row(i));
        y[r] = dual.lambda()[i] + 2.0 * mu * e.g[i];
    }
    for j in 0..l {
        a.set_row(rows.len() + j, &e.jac_h.row(j));
        y[rows.len() + j] = dual.kappa()[j] + 2.0 * nu * e.h[j];
    }

    let mut active_rows = vec![false; m];
    for &i in &rows {
        active_rows[i] = true;
    }

    let solution = if k == 0 {
        Some(DVector::zeros(0))
    } else {
        let mut gram = &a * a.transpose();
        let trace = gram.trace();
        if trace > 0.0 && trace.is_finite() {
            let ridge = RIDGE_SCALE * trace / k as f64;
            for d in 0..k {
                gram[(d, d)] += ridge;
            }
            gram.cholesky()
                .map(|c| {
                    let z = &y - c.solve(&(&a * &leval.gradient));
                    // one refinement step removes most of the ridge bias
                    // when the rows are well conditioned
                    let r = a.tr_mul(&(&z - &y)) + &leval.gradient;
                    z - c.solve(&(&a * r))
                })
                .filter(|s| s.iter().all(|v| v.is_finite()))
        } else {
            None
        }
    };

    let Some(solution) = solution else {
        let mut fb = centered_update(&e.g, &e.h, dual)?;
        fb.fallback = true;
        fb.active_rows = active_rows;
        return Ok(fb);
    };

    let mut lambda = DVector::zeros(m);
    for (r, &i) in rows.iter().enumerate() {
        lambda[i] = solution[r];
    }
    let kappa = solution.rows(rows.len(), l).into_owned();
    let residual = residual_of(leval, dual, &lambda, &kappa);

    let clipped: Vec<bool> = lambda.iter().map(|v| *v < 0.0).collect();
    lambda.apply(|v| *v = v.max(0.0));
    Ok(DualUpdateResult {
        lambda,
        kappa,
        active_rows,
        clipped,
        residual,
        fallback: false,
    })
}

/// `|[(lh; kh) - (lambda + 2 mu I g; kappa + 2 nu h)]^T (grad g; grad h) + grad L|^2`
fn residual_of(
    leval: &LagrangianEval,
    dual: &DualState,
    lambda_hat: &DVector<f64>,
    kappa_hat: &DVector<f64>,
) -> f64 {
    let e = &leval.source;
    let (mu, nu) = (dual.mu(), dual.nu());
    let dg = DVector::from_fn(e.dim_g(), |i, _| {
        let switched = if leval.mask.is_active(i) { e.g[i] } else { 0.0 };
        lambda_hat[i] - (dual.lambda()[i] + 2.0 * mu * switched)
    });
    let dh = DVector::from_fn(e.dim_h(), |j, _| kappa_hat[j] - (dual.kappa()[j] + 2.0 * nu * e.h[j]));
    let r = e.jac_g.tr_mul(&dg) + e.jac_h.tr_mul(&dh) + &leval.gradient;
    r.norm_squared()
}

/// Exact objective of the bound-constrained any-time problem at a candidate
/// `(lambda_hat, kappa_hat)` with `lambda_hat >= 0`.
pub fn anytime_residual(
    leval: &LagrangianEval,
    dual: &DualState,
    lambda_hat: &DVector<f64>,
    kappa_hat: &DVector<f64>,
) -> Result<f64> {
    check_len("lambda", leval.source.dim_g(), dual.lambda().len())?;
    check_len("kappa", leval.source.dim_h(), dual.kappa().len())?;
    check_len("candidate lambda", dual.lambda().len(), lambda_hat.len())?;
    check_len("candidate kappa", dual.kappa().len(), kappa_hat.len())?;
    if let Some(index) = lambda_hat.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::NegativeMultiplier {
            index,
            value: lambda_hat[index],
        });
    }
    Ok(residual_of(leval, dual, lambda_hat, kappa_hat))
}
