//! Point-robot trajectories through circular keep-out zones.
//!
//! The decision variable stacks `T` configurations `q_1..q_T` of dimension
//! `d`. The cost is `w sum_t |q_{t+1} - q_t|^2`; the endpoints are pinned by
//! equalities and every configuration must stay outside every obstacle,
//! `r^2 - |q_t - c|^2 <= 0`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{ConstrainedProblem, Derivatives, Evaluator, PointValues};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyTrajectorySpec {
    #[serde(rename = "T")]
    pub t: usize,
    pub d: usize,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub obstacles: Vec<Obstacle>,
    pub smoothness_weight: f64,
}

impl ToyTrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.t < 3 {
            return bad(format!("a trajectory needs T >= 3 slices, got {}", self.t));
        }
        if self.d == 0 || self.start.len() != self.d || self.goal.len() != self.d {
            return bad(format!("start and goal must have dimension d = {}", self.d));
        }
        if !(self.smoothness_weight > 0.0) {
            return bad("smoothness_weight must be positive".into());
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if o.center.len() != self.d || !(o.radius > 0.0) {
                return bad(format!("obstacle {k} needs a {}-dimensional center and positive radius", self.d));
            }
        }
        Ok(())
    }

    pub fn dim_x(&self) -> usize {
        self.t * self.d
    }

    /// Equally spaced configurations from start to goal.
    pub fn straight_line(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim_x());
        for s in 0..self.t {
            let a = s as f64 / (self.t - 1) as f64;
            for k in 0..self.d {
                x[s * self.d + k] = (1.0 - a) * self.start[k] + a * self.goal[k];
            }
        }
        x
    }

    /// Straight-line cost `w |goal - start|^2 / (T - 1)`, the optimum
    /// without obstacles.
    pub fn straight_line_cost(&self) -> f64 {
        let dist2: f64 = self.start.iter().zip(&self.goal).map(|(a, b)| (b - a).powi(2)).sum();
        self.smoothness_weight * dist2 / (self.t - 1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct ToyTrajectory {
    spec: ToyTrajectorySpec,
}

impl ToyTrajectory {
    pub fn new(spec: ToyTrajectorySpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &ToyTrajectorySpec {
        &self.spec
    }

    fn q<'a>(&self, x: &'a DVector<f64>, s: usize) -> &'a [f64] {
        &x.as_slice()[s * self.spec.d..(s + 1) * self.spec.d]
    }
}

impl Evaluator for ToyTrajectory {
    fn dim_x(&self) -> usize {
        self.spec.dim_x()
    }
    fn dim_g(&self) -> usize {
        self.spec.t * self.spec.obstacles.len()
    }
    fn dim_h(&self) -> usize {
        2 * self.spec.d
    }

    fn values(&self, x: &DVector<f64>) -> PointValues {
        let sp = &self.spec;
        let mut f = 0.0;
        for s in 0..sp.t - 1 {
            let (a, b) = (self.q(x, s), self.q(x, s + 1));
            f += a.iter().zip(b).map(|(u, v)| (v - u).powi(2)).sum::<f64>();
        }
        let g = DVector::from_fn(self.dim_g(), |i, _| {
            let (s, o) = (i / sp.obstacles.len(), &sp.obstacles[i % sp.obstacles.len()]);
            let q = self.q(x, s);
            o.radius * o.radius - q.iter().zip(&o.center).map(|(a, c)| (a - c).powi(2)).sum::<f64>()
        });
        let last = self.q(x, sp.t - 1);
        let h = DVector::from_fn(self.dim_h(), |j, _| {
            if j < sp.d {
                x[j] - sp.start[j]
            } else {
                last[j - sp.d] - sp.goal[j - sp.d]
            }
        });
        PointValues {
            x: x.clone(),
            f: sp.smoothness_weight * f,
            g,
            h,
        }
    }

    fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
        let sp = &self.spec;
        let (n, d, w) = (self.dim_x(), sp.d, sp.smoothness_weight);
        let mut grad_f = DVector::zeros(n);
        let mut hess_f = DMatrix::zeros(n, n);
        for s in 0..sp.t - 1 {
            for k in 0..d {
                let (i, j) = (s * d + k, (s + 1) * d + k);
                let diff = x[j] - x[i];
                grad_f[i] -= 2.0 * w * diff;
                grad_f[j] += 2.0 * w * diff;
                hess_f[(i, i)] += 2.0 * w;
                hess_f[(j, j)] += 2.0 * w;
                hess_f[(i, j)] -= 2.0 * w;
                hess_f[(j, i)] -= 2.0 * w;
            }
        }

        let n_obs = sp.obstacles.len();
        let mut jac_g = DMatrix::zeros(self.dim_g(), n);
        let mut hess_g = Vec::with_capacity(self.dim_g());
        for i in 0..self.dim_g() {
            let (s, o) = (i / n_obs, &sp.obstacles[i % n_obs]);
            let q = self.q(x, s);
            let mut hg = DMatrix::zeros(n, n);
            for k in 0..d {
                jac_g[(i, s * d + k)] = -2.0 * (q[k] - o.center[k]);
                hg[(s * d + k, s * d + k)] = -2.0;
            }
            hess_g.push(hg);
        }

        let mut jac_h = DMatrix::zeros(self.dim_h(), n);
        for k in 0..d {
            jac_h[(k, k)] = 1.0;
            jac_h[(d + k, (sp.t - 1) * d + k)] = 1.0;
        }
        Derivatives {
            grad_f,
            hess_f,
            jac_g,
            jac_h,
            hess_g: Some(hess_g),
            hess_h: Some(vec![DMatrix::zeros(n, n); self.dim_h()]),
        }
    }
}

pub fn gen_toy_trajectory(spec: &ToyTrajectorySpec) -> Result<ConstrainedProblem> {
    Ok(ConstrainedProblem::new(ToyTrajectory::new(spec.clone())?))
}

/// A random planar instance whose straight-line initialization is
/// infeasible.
///
/// Start and goal sit near `(-10, 0)` and `(10, 0)`. The first obstacle is
/// centered close to the connecting segment, slightly off to one side so
/// the detour direction is well defined; the rest are scattered in the box
/// `[-7, 7] x [-6, 6]` away from the endpoints. Radii are a few units, so
/// keep-out values are large next to a unit penalty weight.
pub fn random_toy_spec(t: usize, obstacles: usize, smoothness_weight: f64, seed: u64) -> Result<ToyTrajectorySpec> {
    if obstacles == 0 {
        return Err(Error::Config("random trajectories need at least one obstacle".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = vec![-10.0, rng.random_range(-3.0..3.0)];
    let goal: Vec<f64> = vec![10.0, rng.random_range(-3.0..3.0)];

    let mut list = Vec::with_capacity(obstacles);
    let a: f64 = rng.random_range(0.35..0.65);
    let radius: f64 = rng.random_range(2.0..3.5);
    let (dx, dy) = (goal[0] - start[0], goal[1] - start[1]);
    let len = (dx * dx + dy * dy).sqrt();
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let offset = side * radius * rng.random_range(0.05..0.4);
    list.push(Obstacle {
        center: vec![
            start[0] + a * dx - offset * dy / len,
            start[1] + a * dy + offset * dx / len,
        ],
        radius,
    });
    while list.len() < obstacles {
        let radius: f64 = rng.random_range(1.0..2.5);
        let center = vec![rng.random_range(-7.0..7.0), rng.random_range(-6.0..6.0)];
        let clear = |p: &[f64]| ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt() > radius + 1.0;
        if clear(&start) && clear(&goal) {
            list.push(Obstacle { center, radius });
        }
    }
    let spec = ToyTrajectorySpec {
        t,
        d: 2,
        start,
        goal,
        obstacles: list,
        smoothness_weight,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdcheck::check_gradients_fd;

    fn spec(obstacles: Vec<Obstacle>) -> ToyTrajectorySpec {
        ToyTrajectorySpec {
            t: 6,
            d: 2,
            start: vec![-1.0, 0.0],
            goal: vec![1.0, 0.5],
            obstacles,
            smoothness_weight: 2.0,
        }
    }

    #[test]
    fn straight_line_cost_matches_evaluation() {
        let s = spec(vec![]);
        let p = gen_toy_trajectory(&s).unwrap();
        let e = p.evaluate(&s.straight_line()).unwrap();
        assert!((e.f - s.straight_line_cost()).abs() < 1e-14);
        assert!(e.h.amax() < 1e-15);
        // the straight line is stationary for the cost on interior slices
        assert!(e.grad_f.rows(2, 8).amax() < 1e-14);
    }

    #[test]
    fn constant_trajectory_has_zero_cost() {
        let s = ToyTrajectorySpec {
            goal: vec![-1.0, 0.0],
            ..spec(vec![])
        };
        let p = gen_toy_trajectory(&s).unwrap();
        assert_eq!(p.evaluate(&s.straight_line()).unwrap().f, 0.0);
    }

    #[test]
    fn derivatives_match_differences() {
        let s = spec(vec![
            Obstacle { center: vec![0.0, 0.2], radius: 0.3 },
            Obstacle { center: vec![0.5, -0.1], radius: 0.2 },
        ]);
        let p = gen_toy_trajectory(&s).unwrap();
        let x = DVector::from_fn(s.dim_x(), |i, _| ((i * 7 % 5) as f64 - 2.0) * 0.3);
        let r = check_gradients_fd(&p, &x, 1e-6).unwrap();
        assert!(r.max() < 1e-6, "{r:?}");
        assert!(r.hess_g.is_some());
    }

    #[test]
    fn constraint_layout_is_slice_major() {
        let s = spec(vec![
            Obstacle { center: vec![0.0, 0.0], radius: 0.5 },
            Obstacle { center: vec![3.0, 0.0], radius: 0.5 },
        ]);
        let p = gen_toy_trajectory(&s).unwrap();
        let mut x = s.straight_line();
        x[4] = 0.0;
        x[5] = 0.0;
        let e = p.evaluate(&x).unwrap();
        assert_eq!(e.dim_g(), 12);
        // slice 2 sits at the first obstacle's center
        assert!((e.g[4] - 0.25).abs() < 1e-15);
        assert!(e.g[5] < 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ToyTrajectorySpec { t: 2, ..spec(vec![]) }.validate().is_err());
        assert!(spec(vec![Obstacle { center: vec![0.0], radius: 1.0 }]).validate().is_err());
        assert!(spec(vec![Obstacle { center: vec![0.0, 0.0], radius: 0.0 }]).validate().is_err());
    }

    #[test]
    fn random_specs_start_infeasible() {
        for seed in 0..20 {
            let s = random_toy_spec(40, 1 + (seed as usize % 3), 1.0, seed).unwrap();
            let p = gen_toy_trajectory(&s).unwrap();
            let e = p.evaluate(&s.straight_line()).unwrap();
            assert!(e.g.max() > 0.0, "seed {seed}");
            assert_eq!(s, random_toy_spec(40, 1 + (seed as usize % 3), 1.0, seed).unwrap());
        }
    }

    #[test]
    fn spec_json_uses_capital_t() {
        let s = spec(vec![]);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"T\":6"));
        let back: ToyTrajectorySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
