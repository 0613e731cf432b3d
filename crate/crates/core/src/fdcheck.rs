//! Central finite-difference verification of user-supplied derivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{inf_norm, ConstrainedProblem};

pub const DEFAULT_FD_EPS: f64 = 1e-6;

/// Max relative errors `|analytic - fd|_inf / (1 + |analytic|_inf)` per block.
///
/// Hessians are checked against finite differences of the analytic gradients
/// (`n` gradient sweeps instead of `n^2` function sweeps).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradientReport {
    pub grad_f: f64,
    pub jac_g: f64,
    pub jac_h: f64,
    pub hess_f: f64,
    /// `None` when the problem supplies no constraint Hessians.
    pub hess_g: Option<f64>,
    pub hess_h: Option<f64>,
}

impl GradientReport {
    pub fn max(&self) -> f64 {
        [
            self.grad_f,
            self.jac_g,
            self.jac_h,
            self.hess_f,
            self.hess_g.unwrap_or(0.0),
            self.hess_h.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn rel_err(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    if analytic.is_empty() {
        return 0.0;
    }
    (analytic - fd).amax() / (1.0 + analytic.amax())
}

fn at_coordinate(err: Error, k: usize) -> Error {
    match err {
        Error::NonFinite { what, .. } => Error::NonFinite {
            what,
            coordinate: Some(k),
        },
        other => other,
    }
}

/// Compares analytic derivatives of `problem` at `x` with central
/// differences of step `eps`.
pub fn check_gradients_fd(
    problem: &ConstrainedProblem,
    x: &DVector<f64>,
    eps: f64,
) -> Result<GradientReport> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {eps}")));
    }
    let base = problem.evaluate(x)?;
    let (n, m, l) = (base.dim_x(), base.dim_g(), base.dim_h());

    let mut grad_fd = DMatrix::zeros(n, 1);
    let mut jac_g_fd = DMatrix::zeros(m, n);
    let mut jac_h_fd = DMatrix::zeros(l, n);
    let mut hess_fd = DMatrix::zeros(n, n);
    let mut hess_g_fd = vec![DMatrix::zeros(n, n); if base.hess_g.is_some() { m } else { 0 }];
    let mut hess_h_fd = vec![DMatrix::zeros(n, n); if base.hess_h.is_some() { l } else { 0 }];

    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += eps;
        xm[k] -= eps;
        let ep = problem.evaluate(&xp).map_err(|e| at_coordinate(e, k))?;
        let em = problem.evaluate(&xm).map_err(|e| at_coordinate(e, k))?;
        let s = 0.5 / eps;

        grad_fd[(k, 0)] = (ep.f - em.f) * s;
        jac_g_fd.set_column(k, &((&ep.g - &em.g) * s));
        jac_h_fd.set_column(k, &((&ep.h - &em.h) * s));
        hess_fd.set_column(k, &((&ep.grad_f - &em.grad_f) * s));
        for (i, hg) in hess_g_fd.iter_mut().enumerate() {
            let col = (ep.jac_g.row(i) - em.jac_g.row(i)).transpose() * s;
            hg.set_column(k, &col);
        }
        for (j, hh) in hess_h_fd.iter_mut().enumerate() {
            let col = (ep.jac_h.row(j) - em.jac_h.row(j)).transpose() * s;
            hh.set_column(k, &col);
        }
    }

    let blockwise = |analytic: &Option<Vec<DMatrix<f64>>>, fd: &[DMatrix<f64>]| {
        analytic.as_ref().map(|a| {
            a.iter()
                .zip(fd)
                .map(|(ai, fi)| rel_err(ai, fi))
                .fold(0.0, f64::max)
        })
    };

    Ok(GradientReport {
        grad_f: rel_err(&DMatrix::from_column_slice(n, 1, base.grad_f.as_slice()), &grad_fd),
        jac_g: rel_err(&base.jac_g, &jac_g_fd),
        jac_h: rel_err(&base.jac_h, &jac_h_fd),
        hess_f: rel_err(&base.hess_f, &hess_fd),
        hess_g: blockwise(&base.hess_g, &hess_g_fd),
        hess_h: blockwise(&base.hess_h, &hess_h_fd),
    })
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, eps: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |k, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += eps;
        xm[k] -= eps;
        (f(&xp) - f(&xm)) / (2.0 * eps)
    })
}

/// `|a - b|_inf / (1 + |a|_inf)`.
pub fn relative_error(analytic: &DVector<f64>, fd: &DVector<f64>) -> f64 {
    inf_norm(&(analytic - fd)) / (1.0 + inf_norm(analytic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Derivatives, Evaluator, PointValues};
    use nalgebra::dvector;

    /// `f = sin(x0) x1^2`, `g = x0^2 + x1 - 1`, with a switchable sign error
    /// in the objective gradient.
    struct Wavy {
        broken: bool,
    }

    impl Evaluator for Wavy {
        fn dim_x(&self) -> usize {
            2
        }
        fn dim_g(&self) -> usize {
            1
        }
        fn dim_h(&self) -> usize {
            0
        }
        fn values(&self, x: &DVector<f64>) -> PointValues {
            PointValues {
                x: x.clone(),
                f: x[0].sin() * x[1] * x[1],
                g: dvector![x[0] * x[0] + x[1] - 1.0],
                h: DVector::zeros(0),
            }
        }
        fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
            let sign = if self.broken { -1.0 } else { 1.0 };
            let (s, c) = x[0].sin_cos();
            Derivatives {
                grad_f: dvector![sign * c * x[1] * x[1], 2.0 * s * x[1]],
                hess_f: DMatrix::from_row_slice(
                    2,
                    2,
                    &[-s * x[1] * x[1], 2.0 * c * x[1], 2.0 * c * x[1], 2.0 * s],
                ),
                jac_g: DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 1.0]),
                jac_h: DMatrix::zeros(0, 2),
                hess_g: Some(vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])]),
                hess_h: Some(vec![]),
            }
        }
    }

    #[test]
    fn correct_derivatives_pass() {
        let p = ConstrainedProblem::new(Wavy { broken: false });
        let r = check_gradients_fd(&p, &dvector![0.3, -1.2], DEFAULT_FD_EPS).unwrap();
        assert!(r.max() < 1e-7, "{r:?}");
        assert!(r.hess_g.is_some());
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let p = ConstrainedProblem::new(Wavy { broken: true });
        let r = check_gradients_fd(&p, &dvector![0.3, -1.2], DEFAULT_FD_EPS).unwrap();
        assert!(r.grad_f > 1e-2, "{r:?}");
    }

    #[test]
    fn rejects_nonpositive_step() {
        let p = ConstrainedProblem::new(Wavy { broken: false });
        assert!(check_gradients_fd(&p, &dvector![0.0, 0.0], 0.0).is_err());
    }

    struct BlowsUp;

    impl Evaluator for BlowsUp {
        fn dim_x(&self) -> usize {
            2
        }
        fn dim_g(&self) -> usize {
            0
        }
        fn dim_h(&self) -> usize {
            0
        }
        fn values(&self, x: &DVector<f64>) -> PointValues {
            PointValues {
                x: x.clone(),
                f: (x[1] - 1e-7).ln(),
                g: DVector::zeros(0),
                h: DVector::zeros(0),
            }
        }
        fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
            Derivatives {
                grad_f: dvector![0.0, 1.0 / (x[1] - 1e-7)],
                hess_f: DMatrix::zeros(2, 2),
                jac_g: DMatrix::zeros(0, 2),
                jac_h: DMatrix::zeros(0, 2),
                hess_g: None,
                hess_h: None,
            }
        }
    }

    #[test]
    fn non_finite_neighbour_names_coordinate() {
        let p = ConstrainedProblem::new(BlowsUp);
        let err = check_gradients_fd(&p, &dvector![0.0, 1e-6], 1e-6).unwrap_err();
        assert!(matches!(err, Error::NonFinite { coordinate: Some(1), .. }), "{err}");
    }
}
