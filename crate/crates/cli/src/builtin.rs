use aula::bench::{gen_toy_trajectory, random_toy_spec, ToyTrajectorySpec};
use aula::problem::{Derivatives, PointValues};
use aula::{ConstrainedProblem, Evaluator};
use nalgebra::{DMatrix, DVector};

/// Problems available without an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Builtin {
    /// Random obstacle-avoidance trajectory (T = 40, 1 to 3 obstacles).
    ToyTraj,
    /// Quadratic whose reported gradient drops the cross term. Negative
    /// control for `check-grad`.
    BrokenGradient,
}

pub fn toy_spec(seed: u64) -> aula::Result<ToyTrajectorySpec> {
    random_toy_spec(40, 1 + (seed % 3) as usize, 1.0, seed)
}

impl Builtin {
    /// The problem and its natural starting point.
    pub fn build(self, seed: u64) -> aula::Result<(ConstrainedProblem, DVector<f64>)> {
        match self {
            Builtin::ToyTraj => {
                let spec = toy_spec(seed)?;
                Ok((gen_toy_trajectory(&spec)?, spec.straight_line()))
            }
            // the dropped cross term vanishes at the origin, so start away from it
            Builtin::BrokenGradient => Ok((ConstrainedProblem::new(BrokenGradient), DVector::from_vec(vec![1.0, -0.5, 0.25]))),
        }
    }
}

/// `f = |x|^2 + 3 x_0 x_1`, `g = x_0 + x_1 - 1`, with `grad f` reported as
/// `2 x`.
struct BrokenGradient;

impl Evaluator for BrokenGradient {
    fn dim_x(&self) -> usize {
        3
    }

    fn dim_g(&self) -> usize {
        1
    }

    fn dim_h(&self) -> usize {
        0
    }

    fn affine_constraints(&self) -> bool {
        true
    }

    fn values(&self, x: &DVector<f64>) -> PointValues {
        PointValues {
            x: x.clone(),
            f: x.norm_squared() + 3.0 * x[0] * x[1],
            g: DVector::from_element(1, x[0] + x[1] - 1.0),
            h: DVector::zeros(0),
        }
    }

    fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
        Derivatives {
            grad_f: x * 2.0,
            hess_f: DMatrix::identity(3, 3) * 2.0,
            jac_g: DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]),
            jac_h: DMatrix::zeros(0, 3),
            hess_g: None,
            hess_h: None,
        }
    }
}
