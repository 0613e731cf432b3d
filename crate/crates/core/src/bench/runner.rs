//! Benchmark sweeps over instance families and methods.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::is_bounded;
use super::random_lp::{gen_random_lp, OffsetMode, RandomLpSpec};
use super::toy::{gen_toy_trajectory, random_toy_spec, ToyTrajectorySpec};
use crate::error::{Error, Result};
use crate::linear::LinearProblem;
use crate::problem::ConstrainedProblem;
use crate::solvers::{solve, Method, SolverOptions};

pub const CSV_HEADER: &str = "method,family,n,m,seed,f_evals,dual_updates,f_final,suboptimality,violation,status";

/// Number of constraints as a function of the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MRule {
    /// `m = k n`.
    PerN(usize),
    Fixed(usize),
}

impl MRule {
    pub fn m(self, n: usize) -> usize {
        match self {
            MRule::PerN(k) => k * n,
            MRule::Fixed(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomLpFamily {
    pub n_list: Vec<usize>,
    pub m_rule: MRule,
    /// Bounded instances per dimension.
    pub repetitions: usize,
    pub base_seed: u64,
    pub offset_mode: OffsetMode,
}

impl Default for RandomLpFamily {
    fn default() -> Self {
        Self {
            n_list: vec![5, 10, 15, 20],
            m_rule: MRule::PerN(3),
            repetitions: 10,
            base_seed: 0,
            offset_mode: OffsetMode::NegateAbs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyTrajFamily {
    #[serde(rename = "T")]
    pub t: usize,
    /// Inclusive range of obstacle counts; draw `k` uses
    /// `min + k mod (max - min + 1)` obstacles.
    pub obstacles: [usize; 2],
    pub draws: usize,
    pub base_seed: u64,
    pub smoothness_weight: f64,
}

impl Default for ToyTrajFamily {
    fn default() -> Self {
        Self {
            t: 40,
            obstacles: [1, 3],
            draws: 8,
            base_seed: 0,
            smoothness_weight: 1.0,
        }
    }
}

impl ToyTrajFamily {
    pub fn specs(&self) -> Result<Vec<(u64, ToyTrajectorySpec)>> {
        let [lo, hi] = self.obstacles;
        if lo == 0 || hi < lo {
            return Err(Error::Config(format!("bad obstacle range [{lo}, {hi}]")));
        }
        (0..self.draws)
            .map(|k| {
                let seed = self.base_seed + k as u64;
                let count = lo + k % (hi - lo + 1);
                random_toy_spec(self.t, count, self.smoothness_weight, seed).map(|s| (seed, s))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    RandomLp(RandomLpFamily),
    ToyTraj(ToyTrajFamily),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub families: Vec<Family>,
    /// Shared solver settings; `method` is replaced per run.
    pub options: SolverOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            families: Vec::new(),
            options: SolverOptions::default(),
        }
    }
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn random_lp(family: RandomLpFamily) -> Self {
        Self {
            families: vec![Family::RandomLp(family)],
            ..Self::default()
        }
    }

    pub fn toy_traj(family: ToyTrajFamily) -> Self {
        Self {
            families: vec![Family::ToyTraj(family)],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Lp(LinearProblem),
    Toy(ToyTrajectorySpec),
}

/// One problem instance of a sweep.
#[derive(Debug, Clone)]
pub struct Instance {
    pub family: &'static str,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub x0: DVector<f64>,
    source: Source,
}

impl Instance {
    /// A fresh problem with its own evaluation counter.
    pub fn problem(&self) -> Result<ConstrainedProblem> {
        match &self.source {
            Source::Lp(lp) => Ok(lp.clone().into_problem()),
            Source::Toy(spec) => gen_toy_trajectory(spec),
        }
    }

    pub fn linear(&self) -> Option<&LinearProblem> {
        match &self.source {
            Source::Lp(lp) => Some(lp),
            Source::Toy(_) => None,
        }
    }

    pub fn toy_spec(&self) -> Option<&ToyTrajectorySpec> {
        match &self.source {
            Source::Toy(s) => Some(s),
            Source::Lp(_) => None,
        }
    }
}

/// Seed of the `attempt`-th draw for dimension `n`.
pub fn lp_seed(base_seed: u64, n: usize, attempt: u64) -> u64 {
    base_seed
        .wrapping_mul(1_000_003)
        .wrapping_add(n as u64 * 100_000)
        .wrapping_add(attempt)
}

/// Bounded random LPs of one dimension; unbounded draws are skipped.
pub fn random_lp_instances(family: &RandomLpFamily, n: usize) -> Result<Vec<Instance>> {
    let m = family.m_rule.m(n);
    let mut out = Vec::with_capacity(family.repetitions);
    let mut attempt = 0u64;
    while out.len() < family.repetitions {
        if attempt > 100 * family.repetitions as u64 + 100 {
            return Err(Error::Config(format!(
                "could not draw {} bounded LPs with n = {n}, m = {m}",
                family.repetitions
            )));
        }
        let seed = lp_seed(family.base_seed, n, attempt);
        attempt += 1;
        let lp = gen_random_lp(&RandomLpSpec {
            n,
            m,
            seed,
            offset_mode: family.offset_mode,
        })?;
        if is_bounded(&lp)? {
            out.push(Instance {
                family: "random_lp",
                n,
                m,
                seed,
                x0: DVector::zeros(n),
                source: Source::Lp(lp),
            });
        }
    }
    Ok(out)
}

pub fn instances(config: &BenchConfig) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for family in &config.families {
        match family {
            Family::RandomLp(f) => {
                for &n in &f.n_list {
                    out.extend(random_lp_instances(f, n)?);
                }
            }
            Family::ToyTraj(f) => {
                for (seed, spec) in f.specs()? {
                    let problem = gen_toy_trajectory(&spec)?;
                    out.push(Instance {
                        family: "toy_traj",
                        n: problem.dim_x(),
                        m: problem.dim_g(),
                        seed,
                        x0: spec.straight_line(),
                        source: Source::Toy(spec),
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub family: &'static str,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub f_evals: u64,
    pub dual_updates: usize,
    pub f_final: f64,
    pub suboptimality: f64,
    pub violation: f64,
    pub status: String,
    #[serde(skip)]
    pub instance: usize,
    #[serde(skip)]
    pub x: DVector<f64>,
}

impl BenchRow {
    pub fn converged(&self) -> bool {
        self.status == "converged"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: Method,
    pub family: &'static str,
    pub n: usize,
    pub count: usize,
    pub converged: usize,
    pub f_evals: MeanErr,
    pub dual_updates: MeanErr,
    pub suboptimality: MeanErr,
    pub violation: MeanErr,
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanErr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanErr {
    /// Ignores NaN samples; NaN when none remain.
    pub fn of(samples: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = samples.into_iter().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let k = v.len() as f64;
        let mean = v.iter().sum::<f64>() / k;
        let stderr = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

impl std::fmt::Display for MeanErr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.stderr)
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<Aggregate>,
}

fn solve_row(inst: &Instance, index: usize, method: Method, options: &SolverOptions) -> Result<BenchRow> {
    let problem = inst.problem()?;
    let opts = SolverOptions {
        method,
        ..options.clone()
    };
    let s = solve(&problem, &inst.x0, &opts)?;
    Ok(BenchRow {
        method,
        family: inst.family,
        n: inst.n,
        m: inst.m,
        seed: inst.seed,
        f_evals: s.f_evals,
        dual_updates: s.dual_updates,
        f_final: s.f_final,
        suboptimality: f64::NAN,
        violation: s.violation,
        status: s.status.as_str().to_string(),
        instance: index,
        x: s.x,
    })
}

/// Runs every method on every instance with up to `jobs` threads. Row
/// order is (instance, method) regardless of scheduling.
pub fn run_benchmark(config: &BenchConfig, jobs: usize) -> Result<BenchReport> {
    config.options.validate()?;
    if config.methods.is_empty() {
        return Err(Error::Config("no methods to benchmark".into()));
    }
    let insts = instances(config)?;
    let work: Vec<(usize, Method)> = (0..insts.len())
        .flat_map(|i| config.methods.iter().map(move |m| (i, *m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut rows: Vec<BenchRow> = pool.install(|| {
        work.par_iter()
            .map(|&(i, m)| solve_row(&insts[i], i, m, &config.options))
            .collect::<Result<Vec<_>>>()
    })?;

    let tol = config.options.outer_tol;
    for chunk in rows.chunk_by_mut(|a, b| a.instance == b.instance) {
        let best = chunk
            .iter()
            .filter(|r| r.violation < tol && r.f_final.is_finite())
            .map(|r| r.f_final)
            .fold(f64::INFINITY, f64::min);
        for r in chunk.iter_mut() {
            r.suboptimality = if best.is_finite() { r.f_final - best } else { f64::NAN };
        }
    }
    let aggregates = aggregate(&rows);
    Ok(BenchReport { rows, aggregates })
}

/// Mean and standard error per (family, n, method), in first-seen order.
pub fn aggregate(rows: &[BenchRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(&'static str, usize, Method)> = Vec::new();
    for r in rows {
        let k = (r.family, r.n, r.method);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(family, n, method)| {
            let sel: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.family == family && r.n == n && r.method == method)
                .collect();
            Aggregate {
                method,
                family,
                n,
                count: sel.len(),
                converged: sel.iter().filter(|r| r.converged()).count(),
                f_evals: MeanErr::of(sel.iter().map(|r| r.f_evals as f64)),
                dual_updates: MeanErr::of(sel.iter().map(|r| r.dual_updates as f64)),
                suboptimality: MeanErr::of(sel.iter().map(|r| r.suboptimality)),
                violation: MeanErr::of(sel.iter().map(|r| r.violation)),
            }
        })
        .collect()
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.12e}")
    }
}

pub fn write_csv<W: Write>(mut out: W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.family,
            r.n,
            r.m,
            r.seed,
            r.f_evals,
            r.dual_updates,
            num(r.f_final),
            num(r.suboptimality),
            num(r.violation),
            r.status
        )?;
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str = "method,family,n,count,converged,f_evals_mean,f_evals_stderr,dual_updates_mean,dual_updates_stderr,suboptimality_mean,suboptimality_stderr,violation_mean,violation_stderr";

pub fn write_summary_csv<W: Write>(mut out: W, aggregates: &[Aggregate]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for a in aggregates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.method,
            a.family,
            a.n,
            a.count,
            a.converged,
            num(a.f_evals.mean),
            num(a.f_evals.stderr),
            num(a.dual_updates.mean),
            num(a.dual_updates.stderr),
            num(a.suboptimality.mean),
            num(a.suboptimality.stderr),
            num(a.violation.mean),
            num(a.violation.stderr)
        )?;
    }
    Ok(())
}

/// Human-readable table: one line per (family, n, method).
pub fn write_summary_table<W: Write>(mut out: W, aggregates: &[Aggregate]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<12} {:<10} {:>5} {:>9} {:>22} {:>22} {:>26} {:>26}",
        "method", "family", "n", "converged", "updates", "f_evals", "suboptimality", "violation"
    )?;
    for a in aggregates {
        writeln!(
            out,
            "{:<12} {:<10} {:>5} {:>4}/{:<4} {:>22} {:>22} {:>26} {:>26}",
            a.method.as_str(),
            a.family,
            a.n,
            a.converged,
            a.count,
            a.dual_updates.to_string(),
            a.f_evals.to_string(),
            format!("{:.3e} ± {:.1e}", a.suboptimality.mean, a.suboptimality.stderr),
            format!("{:.3e} ± {:.1e}", a.violation.mean, a.violation.stderr),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_lp_config() -> BenchConfig {
        BenchConfig::random_lp(RandomLpFamily {
            n_list: vec![3],
            repetitions: 3,
            ..RandomLpFamily::default()
        })
    }

    #[test]
    fn counts_rows_and_aggregates() {
        let r = run_benchmark(&small_lp_config(), 1).unwrap();
        assert_eq!(r.rows.len(), 3 * 4);
        assert_eq!(r.aggregates.len(), 4);
        assert!(r.aggregates.iter().all(|a| a.count == 3));
    }

    #[test]
    fn rows_are_ordered_by_instance_then_method() {
        let r = run_benchmark(&small_lp_config(), 3).unwrap();
        for (k, row) in r.rows.iter().enumerate() {
            assert_eq!(row.instance, k / 4);
            assert_eq!(row.method, Method::ALL[k % 4]);
        }
        // someone on every instance is feasible, so the best gap is zero
        for chunk in r.rows.chunks(4) {
            let min = chunk.iter().map(|r| r.suboptimality).fold(f64::INFINITY, f64::min);
            assert_eq!(min, 0.0);
        }
    }

    #[test]
    fn csv_is_identical_across_job_counts() {
        let c = small_lp_config();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&mut a, &run_benchmark(&c, 1).unwrap().rows).unwrap();
        write_csv(&mut b, &run_benchmark(&c, 4).unwrap().rows).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().next(), Some(CSV_HEADER));
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn mean_and_standard_error() {
        let m = MeanErr::of([1.0, 2.0, 3.0, f64::NAN]);
        assert_eq!(m.mean, 2.0);
        assert!((m.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(MeanErr::of([]).mean.is_nan());
        assert_eq!(MeanErr::of([4.0]).stderr, 0.0);
    }

    #[test]
    fn config_parses_with_defaults() {
        let c = BenchConfig::parse(
            r#"{"methods": ["aula", "any_aula"],
                "families": [{"random_lp": {"n_list": [5], "m_rule": {"fixed": 7}}},
                             {"toy_traj": {"T": 10, "draws": 2}}],
                "options": {"outer_tol": 1e-5}}"#,
        )
        .unwrap();
        assert_eq!(c.methods, vec![Method::Aula, Method::AnyAula]);
        assert_eq!(c.options.outer_tol, 1e-5);
        match &c.families[0] {
            Family::RandomLp(f) => {
                assert_eq!(f.m_rule.m(5), 7);
                assert_eq!(f.repetitions, 10);
            }
            other => panic!("{other:?}"),
        }
        assert!(BenchConfig::parse(r#"{"familes": []}"#).is_err());
    }

    #[test]
    fn unbounded_draws_are_skipped() {
        let f = RandomLpFamily {
            n_list: vec![6],
            m_rule: MRule::Fixed(7),
            repetitions: 4,
            ..RandomLpFamily::default()
        };
        let insts = random_lp_instances(&f, 6).unwrap();
        assert_eq!(insts.len(), 4);
        for i in &insts {
            assert!(is_bounded(i.linear().unwrap()).unwrap());
        }
    }

    #[test]
    fn toy_family_cycles_obstacle_counts() {
        let specs = ToyTrajFamily {
            t: 8,
            draws: 4,
            ..ToyTrajFamily::default()
        }
        .specs()
        .unwrap();
        let counts: Vec<usize> = specs.iter().map(|(_, s)| s.obstacles.len()).collect();
        assert_eq!(counts, vec![1, 2, 3, 1]);
        assert!(specs.iter().all(|(_, s)| s.smoothness_weight == 1.0));
    }
}
