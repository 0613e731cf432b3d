use aula::solvers::Cadence;
use aula::{HessianMode, Method, RowSelection, SolverOptions};
use clap::Args;
use serde::de::DeserializeOwned;

/// Parses a snake_case enum name through its serde representation.
fn enum_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: aula::Error| e.to_string())
}

/// Overrides for [`SolverOptions`]. Unset flags keep the library default.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub nu0: Option<f64>,
    #[arg(long)]
    pub mu_growth: Option<f64>,
    #[arg(long)]
    pub barrier_mu0: Option<f64>,
    #[arg(long)]
    pub barrier_shrink: Option<f64>,
    #[arg(long)]
    pub outer_tol: Option<f64>,
    #[arg(long)]
    pub delta_double: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// single_step or early_stop.
    #[arg(long, value_parser = enum_name::<Cadence>)]
    pub cadence: Option<Cadence>,
    #[arg(long)]
    pub reset_delta: Option<bool>,
    /// mask or positive_multipliers.
    #[arg(long, value_parser = enum_name::<RowSelection>)]
    pub row_selection: Option<RowSelection>,
    /// gauss_newton or full.
    #[arg(long, value_parser = enum_name::<HessianMode>)]
    pub hessian: Option<HessianMode>,

    #[arg(long)]
    pub newton_alpha0: Option<f64>,
    #[arg(long)]
    pub newton_beta0: Option<f64>,
    #[arg(long)]
    pub newton_alpha_plus: Option<f64>,
    #[arg(long)]
    pub newton_alpha_minus: Option<f64>,
    #[arg(long)]
    pub newton_beta_plus: Option<f64>,
    #[arg(long)]
    pub newton_beta_minus: Option<f64>,
    #[arg(long)]
    pub newton_rho: Option<f64>,
    #[arg(long)]
    pub newton_delta: Option<f64>,
    #[arg(long)]
    pub newton_max_evals: Option<u64>,
    #[arg(long)]
    pub newton_noise_floor: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct MethodFlag {
    /// aula, any_aula, log_barrier or sqr_penalty.
    #[arg(long, value_parser = parse_method, default_value = "aula")]
    pub method: Method,
}

impl SolverFlags {
    pub fn apply(&self, mut o: SolverOptions) -> SolverOptions {
        fn set<T: Copy>(dst: &mut T, src: Option<T>) {
            if let Some(v) = src {
                *dst = v;
            }
        }
        set(&mut o.mu0, self.mu0);
        set(&mut o.nu0, self.nu0);
        if self.mu_growth.is_some() {
            o.mu_growth = self.mu_growth;
        }
        set(&mut o.barrier_mu0, self.barrier_mu0);
        set(&mut o.barrier_shrink, self.barrier_shrink);
        set(&mut o.outer_tol, self.outer_tol);
        set(&mut o.delta_double, self.delta_double);
        set(&mut o.max_outer, self.max_outer);
        set(&mut o.cadence, self.cadence);
        set(&mut o.reset_delta, self.reset_delta);
        set(&mut o.row_selection, self.row_selection);
        set(&mut o.hessian, self.hessian);

        let n = &mut o.newton;
        set(&mut n.alpha0, self.newton_alpha0);
        set(&mut n.beta0, self.newton_beta0);
        set(&mut n.alpha_plus, self.newton_alpha_plus);
        set(&mut n.alpha_minus, self.newton_alpha_minus);
        set(&mut n.beta_plus, self.newton_beta_plus);
        set(&mut n.beta_minus, self.newton_beta_minus);
        set(&mut n.rho, self.newton_rho);
        set(&mut n.delta, self.newton_delta);
        set(&mut n.max_evals, self.newton_max_evals);
        set(&mut n.noise_floor, self.newton_noise_floor);
        o
    }
}

// Aliases keep clap from treating these as repeated arguments.
pub type Floats = Vec<f64>;
pub type Sizes = Vec<usize>;
pub type Methods = Vec<Method>;

/// Comma-separated list, e.g. `5,10,15`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

pub fn parse_methods(s: &str) -> Result<Methods, String> {
    s.split(',').map(|p| parse_method(p.trim())).collect()
}
