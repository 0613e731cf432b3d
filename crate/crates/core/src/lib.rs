//! Augmented Lagrangian solvers with centered and any-time dual updates.

pub mod bench;
pub mod dual;
pub mod error;
pub mod fdcheck;
pub mod lagrangian;
pub mod linear;
pub mod newton;
pub mod problem;
pub mod solvers;

pub use dual::{anytime_residual, anytime_update, anytime_update_with, centered_update, DualUpdateResult, RowSelection};
pub use error::{Error, Result};
pub use fdcheck::{check_gradients_fd, GradientReport};
pub use lagrangian::{
    activity_indicator, lagrangian_gradient, lagrangian_hessian, lagrangian_value, ActivityMask,
    HessianMode, LagrangianEval,
};
pub use linear::{LinearProblem, ProblemFile};
pub use newton::{newton_minimize, newton_step, NewtonParams, NewtonState, StepOutcome};
pub use problem::{
    kkt_residuals, ConstrainedProblem, DualState, Evaluator, KktResiduals, ProblemEval, ProblemKind,
};
pub use solvers::{solve, Method, Solution, SolverOptions, Status};
