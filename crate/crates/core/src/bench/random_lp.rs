//! Random LPs `min sum x_i  s.t.  G (1; x) <= 0`.
//!
//! Entries of `G` are standard normal draws (ziggurat sampler over
//! ChaCha8 seeded with the instance seed, row-major order). Column 0 is then
//! made non-positive so that `x = 0` is feasible and pushed away from zero.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::LinearProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetMode {
    /// `G_i1 <- -|G_i1| - 1`: every offset is at most -1.
    #[default]
    NegateAbs,
    /// Flip positive offsets, then `G_i1 <- -G_i1 - 1`. The result can be
    /// positive, leaving `x = 0` infeasible.
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomLpSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub offset_mode: OffsetMode,
}

impl RandomLpSpec {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            seed,
            offset_mode: OffsetMode::NegateAbs,
        }
    }
}

/// The `m x (n + 1)` matrix `G`.
pub fn random_lp_matrix(spec: &RandomLpSpec) -> Result<DMatrix<f64>> {
    if spec.n == 0 || spec.m == 0 {
        return Err(Error::Config(format!(
            "random LP needs n >= 1 and m >= 1, got n = {}, m = {}",
            spec.n, spec.m
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut g: DMatrix<f64> = DMatrix::from_row_iterator(
        spec.m,
        spec.n + 1,
        (0..spec.m * (spec.n + 1)).map(|_| StandardNormal.sample(&mut rng)),
    );
    for i in 0..spec.m {
        let v = g[(i, 0)];
        g[(i, 0)] = match spec.offset_mode {
            OffsetMode::NegateAbs => -v.abs() - 1.0,
            OffsetMode::Shift => {
                let flipped = if v > 0.0 { -v } else { v };
                -flipped - 1.0
            }
        };
    }
    Ok(g)
}

pub fn gen_random_lp(spec: &RandomLpSpec) -> Result<LinearProblem> {
    LinearProblem::from_augmented(DVector::from_element(spec.n, 1.0), &random_lp_matrix(spec)?)
}
