//! Problem generators, the LP reference oracle and the benchmark runner.

pub mod oracle;
pub mod random_lp;
pub mod runner;
pub mod toy;

pub use oracle::{lp_oracle, LpOracleResult, OracleStatus};
pub use random_lp::{gen_random_lp, OffsetMode, RandomLpSpec};
pub use runner::{run_benchmark, BenchConfig, BenchReport, BenchRow, Family, RandomLpFamily, ToyTrajFamily};
pub use toy::{gen_toy_trajectory, random_toy_spec, Obstacle, ToyTrajectorySpec};
