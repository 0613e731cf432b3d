//! `aula` command-line front end.
//!
//! Exit codes: 0 success or converged, 1 usage, parse or I/O error,
//! 2 failed solve or failed check, 3 iteration limit.

mod builtin;
mod options;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use aula::bench::oracle::{lp_oracle, OracleStatus};
use aula::bench::runner::{write_csv, write_summary_csv, write_summary_table, MRule};
use aula::bench::{gen_toy_trajectory, run_benchmark, BenchConfig, OffsetMode, RandomLpFamily, ToyTrajFamily, ToyTrajectorySpec};
use aula::fdcheck::DEFAULT_FD_EPS;
use aula::{check_gradients_fd, solve, ConstrainedProblem, LinearProblem, ProblemFile, SolverOptions, Status};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use builtin::Builtin;
use options::{parse_list, parse_methods, Floats, Methods, MethodFlag, Sizes, SolverFlags};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_FAILED: u8 = 2;
const EXIT_MAX_ITER: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "aula", version, about = "Augmented Lagrangian solvers, benchmarks and checks")]
struct Cli {
    /// Progress and timing on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and print the solution report.
    Solve(SolveArgs),
    /// Random-LP sweep.
    BenchLp(BenchLpArgs),
    /// Obstacle-avoidance trajectory sweep.
    BenchTraj(BenchTrajArgs),
    /// Compare analytic derivatives with finite differences.
    CheckGrad(CheckGradArgs),
    /// Exact LP solution by vertex enumeration (n <= 12).
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// LP/QP problem file (JSON).
    file: Option<PathBuf>,
    /// Read FILE as a trajectory spec instead of an LP/QP.
    #[arg(long)]
    toy: bool,
    #[arg(long, value_enum, conflicts_with_all = ["file", "toy"])]
    builtin: Option<Builtin>,
    /// Seed for built-in instances and random points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    method: MethodFlag,
    #[command(flatten)]
    flags: SolverFlags,
    /// Starting point, comma separated. Defaults to the file's x0.
    #[arg(long, value_parser = parse_list::<f64>)]
    x0: Option<Floats>,
    /// JSON solver options applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report as JSON here as well.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchCommon {
    /// Benchmark config (JSON). Family flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated methods; default all.
    #[arg(long, value_parser = parse_methods)]
    methods: Option<Methods>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Result CSV; written to stdout when absent, with the summary on
    /// stderr.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-(method, n) aggregates as CSV.
    #[arg(long)]
    summary_csv: Option<PathBuf>,
    #[command(flatten)]
    flags: SolverFlags,
}

#[derive(Debug, Args)]
struct BenchLpArgs {
    #[arg(long, value_parser = parse_list::<usize>)]
    n_list: Option<Sizes>,
    /// Constraints per dimension, `m = k n`.
    #[arg(long, conflicts_with = "m")]
    m_per_n: Option<usize>,
    /// Fixed constraint count.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Literal offset rule `shift` instead of `negate_abs`.
    #[arg(long)]
    shift_offsets: bool,
    #[command(flatten)]
    common: BenchCommon,
}

#[derive(Debug, Args)]
struct BenchTrajArgs {
    #[arg(long = "slices", short = 'T')]
    t: Option<usize>,
    /// Obstacle count range `lo,hi`.
    #[arg(long, value_parser = parse_list::<usize>)]
    obstacles: Option<Sizes>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    smoothness_weight: Option<f64>,
    #[command(flatten)]
    common: BenchCommon,
}

#[derive(Debug, Args)]
struct CheckGradArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Evaluation point, comma separated.
    #[arg(long, value_parser = parse_list::<f64>, conflicts_with = "random")]
    point: Option<Floats>,
    /// Perturb the starting point uniformly in [-1, 1] per coordinate.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = DEFAULT_FD_EPS)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// LP problem file (JSON).
    file: PathBuf,
    /// Write the result as JSON here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Loaded {
    problem: ConstrainedProblem,
    x0: DVector<f64>,
}

fn load_input(input: &InputArgs) -> anyhow::Result<Loaded> {
    if let Some(b) = input.builtin {
        let (problem, x0) = b.build(input.seed)?;
        return Ok(Loaded { problem, x0 });
    }
    let Some(path) = &input.file else {
        bail!("no input: pass a problem file or --builtin");
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if input.toy {
        let spec: ToyTrajectorySpec =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(Loaded {
            problem: gen_toy_trajectory(&spec)?,
            x0: spec.straight_line(),
        });
    }
    let (lp, file) = load_lp_text(&text, path)?;
    let x0 = file.x0().unwrap_or_else(|| DVector::zeros(lp.dim_x()));
    Ok(Loaded {
        problem: lp.into_problem(),
        x0,
    })
}

fn load_lp_text(text: &str, path: &Path) -> anyhow::Result<(LinearProblem, ProblemFile)> {
    let file = ProblemFile::parse(text).with_context(|| format!("parsing {}", path.display()))?;
    let lp = file.build().with_context(|| format!("building {}", path.display()))?;
    Ok((lp, file))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn vec_json(v: &DVector<f64>) -> serde_json::Value {
    serde_json::Value::from(v.as_slice().to_vec())
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.10e}")).collect();
    format!("[{}]", items.join(", "))
}

fn cmd_solve(args: &SolveArgs, verbose: bool) -> anyhow::Result<u8> {
    let loaded = load_input(&args.input)?;
    let mut opts = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SolverOptions>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SolverOptions::default(),
    };
    opts.method = args.method.method;
    let opts = args.flags.apply(opts);
    let x0 = match &args.x0 {
        Some(v) => DVector::from_column_slice(v),
        None => loaded.x0,
    };

    let started = std::time::Instant::now();
    let s = solve(&loaded.problem, &x0, &opts)?;
    if verbose {
        eprintln!("solved in {:.3} s", started.elapsed().as_secs_f64());
    }

    let mut out = io::stdout().lock();
    writeln!(out, "method          {}", opts.method)?;
    writeln!(out, "status          {}", s.status.as_str())?;
    writeln!(out, "f_final         {:.12e}", s.f_final)?;
    writeln!(out, "violation       {:.6e}", s.violation)?;
    writeln!(out, "f_evals         {}", s.f_evals)?;
    writeln!(out, "dual_updates    {}", s.dual_updates)?;
    writeln!(out, "stationarity    {:.6e}", s.kkt.stationarity)?;
    writeln!(out, "primal_ineq     {:.6e}", s.kkt.primal_ineq)?;
    writeln!(out, "primal_eq       {:.6e}", s.kkt.primal_eq)?;
    writeln!(out, "complementarity {:.6e}", s.kkt.complementarity)?;
    writeln!(out, "x               {}", fmt_vec(&s.x))?;
    writeln!(out, "lambda          {}", fmt_vec(s.dual.lambda()))?;
    writeln!(out, "kappa           {}", fmt_vec(s.dual.kappa()))?;
    out.flush()?;

    if let Some(path) = &args.out {
        let report = serde_json::json!({
            "method": opts.method,
            "status": s.status.as_str(),
            "f_final": s.f_final,
            "violation": s.violation,
            "f_evals": s.f_evals,
            "dual_updates": s.dual_updates,
            "kkt": {
                "stationarity": s.kkt.stationarity,
                "primal_ineq": s.kkt.primal_ineq,
                "primal_eq": s.kkt.primal_eq,
                "complementarity": s.kkt.complementarity,
            },
            "x": vec_json(&s.x),
            "lambda": vec_json(s.dual.lambda()),
            "kappa": vec_json(s.dual.kappa()),
        });
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
    }
    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        s.trace.write_csv(&mut w)?;
        w.flush()?;
    }

    Ok(match s.status {
        Status::Converged => EXIT_OK,
        Status::MaxIter => {
            eprintln!("iteration limit reached before convergence");
            EXIT_MAX_ITER
        }
        Status::Failed(kind) => {
            eprintln!("solve failed: {}", failure_message(kind));
            EXIT_FAILED
        }
    })
}

fn failure_message(kind: aula::solvers::FailureKind) -> &'static str {
    use aula::solvers::FailureKind::*;
    match kind {
        InfeasibleStart => "infeasible start (the barrier method needs g(x0) < 0)",
        GradientFailure => "inner Newton iteration made no progress",
        Singular => "damped Newton system could not be factorized",
        Evaluation => "problem evaluation returned non-finite values",
    }
}

fn bench_config(common: &BenchCommon, family: impl FnOnce() -> BenchConfig) -> anyhow::Result<BenchConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            BenchConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => family(),
    };
    if let Some(m) = &common.methods {
        config.methods = m.clone();
    }
    config.options = common.flags.apply(config.options);
    Ok(config)
}

fn run_bench(config: &BenchConfig, common: &BenchCommon, verbose: bool) -> anyhow::Result<u8> {
    let started = std::time::Instant::now();
    let report = run_benchmark(config, common.jobs)?;
    if verbose {
        eprintln!(
            "{} solves in {:.3} s",
            report.rows.len(),
            started.elapsed().as_secs_f64()
        );
    }
    match &common.out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&mut w, &report.rows)?;
            w.flush()?;
            write_summary_table(io::stdout().lock(), &report.aggregates)?;
        }
        None => {
            write_csv(io::stdout().lock(), &report.rows)?;
            write_summary_table(io::stderr().lock(), &report.aggregates)?;
        }
    }
    if let Some(path) = &common.summary_csv {
        let mut w = create(path)?;
        write_summary_csv(&mut w, &report.aggregates)?;
        w.flush()?;
    }
    let all_failed = !report.rows.is_empty() && report.rows.iter().all(|r| r.status.starts_with("failed"));
    Ok(if all_failed { EXIT_FAILED } else { EXIT_OK })
}

fn cmd_bench_lp(args: &BenchLpArgs, verbose: bool) -> anyhow::Result<u8> {
    let config = bench_config(&args.common, || {
        let d = RandomLpFamily::default();
        BenchConfig::random_lp(RandomLpFamily {
            n_list: args.n_list.clone().unwrap_or(d.n_list),
            m_rule: match (args.m, args.m_per_n) {
                (Some(m), _) => MRule::Fixed(m),
                (None, Some(k)) => MRule::PerN(k),
                (None, None) => d.m_rule,
            },
            repetitions: args.repetitions.unwrap_or(d.repetitions),
            base_seed: args.seed.unwrap_or(d.base_seed),
            offset_mode: if args.shift_offsets {
                OffsetMode::Shift
            } else {
                d.offset_mode
            },
        })
    })?;
    run_bench(&config, &args.common, verbose)
}

fn cmd_bench_traj(args: &BenchTrajArgs, verbose: bool) -> anyhow::Result<u8> {
    let obstacles = match args.obstacles.as_deref() {
        None => None,
        Some([k]) => Some([*k, *k]),
        Some([lo, hi]) => Some([*lo, *hi]),
        Some(_) => bail!("--obstacles takes `count` or `lo,hi`"),
    };
    let config = bench_config(&args.common, || {
        let d = ToyTrajFamily::default();
        BenchConfig::toy_traj(ToyTrajFamily {
            t: args.t.unwrap_or(d.t),
            obstacles: obstacles.unwrap_or(d.obstacles),
            draws: args.draws.unwrap_or(d.draws),
            base_seed: args.seed.unwrap_or(d.base_seed),
            smoothness_weight: args.smoothness_weight.unwrap_or(d.smoothness_weight),
        })
    })?;
    run_bench(&config, &args.common, verbose)
}

fn cmd_check_grad(args: &CheckGradArgs) -> anyhow::Result<u8> {
    let loaded = load_input(&args.input)?;
    let x = match &args.point {
        Some(p) => DVector::from_column_slice(p),
        None if args.random => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.input.seed);
            loaded.x0.map(|v| v + rng.random_range(-1.0..1.0))
        }
        None => loaded.x0,
    };
    let r = check_gradients_fd(&loaded.problem, &x, args.eps)?;
    let mut out = io::stdout().lock();
    let line = |out: &mut io::StdoutLock, name: &str, v: Option<f64>| -> io::Result<()> {
        match v {
            Some(v) => writeln!(out, "{name:<8} {v:.3e}"),
            None => writeln!(out, "{name:<8} -"),
        }
    };
    line(&mut out, "grad_f", Some(r.grad_f))?;
    line(&mut out, "jac_g", Some(r.jac_g))?;
    line(&mut out, "jac_h", Some(r.jac_h))?;
    line(&mut out, "hess_f", Some(r.hess_f))?;
    line(&mut out, "hess_g", r.hess_g)?;
    line(&mut out, "hess_h", r.hess_h)?;
    let pass = r.max() <= args.tol;
    writeln!(out, "result   {}", if pass { "pass" } else { "fail" })?;
    if pass {
        Ok(EXIT_OK)
    } else {
        eprintln!("derivative error {:.3e} exceeds {:.1e}", r.max(), args.tol);
        Ok(EXIT_FAILED)
    }
}

fn cmd_oracle(args: &OracleArgs) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let (lp, _) = load_lp_text(&text, &args.file)?;
    let r = lp_oracle(&lp)?;
    let status = serde_json::to_value(r.status)?;
    let status = status.as_str().unwrap_or_default();
    let mut out = io::stdout().lock();
    writeln!(out, "status     {status}")?;
    if r.status == OracleStatus::Optimal {
        writeln!(out, "value      {:.12e}", r.optimal_value)?;
        writeln!(out, "x          {}", fmt_vec(&r.x_star))?;
        writeln!(out, "lambda     {}", fmt_vec(&r.lambda_star))?;
        writeln!(out, "kappa      {}", fmt_vec(&r.kappa_star))?;
        writeln!(out, "active     {:?}", r.active_set)?;
    }
    if let Some(ray) = &r.ray {
        writeln!(out, "ray        {}", fmt_vec(ray))?;
    }
    if let Some(path) = &args.out {
        let report = serde_json::json!({
            "status": status,
            "optimal_value": r.optimal_value,
            "x_star": vec_json(&r.x_star),
            "lambda_star": vec_json(&r.lambda_star),
            "kappa_star": vec_json(&r.kappa_star),
            "active_set": r.active_set,
            "ray": r.ray.as_ref().map(vec_json),
        });
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(if r.status == OracleStatus::Optimal { EXIT_OK } else { EXIT_FAILED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, cli.verbose),
        Command::BenchLp(a) => cmd_bench_lp(a, cli.verbose),
        Command::BenchTraj(a) => cmd_bench_traj(a, cli.verbose),
        Command::CheckGrad(a) => cmd_check_grad(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
