//! Brute-force LP solver used as an independent reference.
//!
//! Boundedness is settled first with a non-negative least-squares fit of
//! `-c` by constraint gradients: a zero residual is a dual certificate, a
//! non-zero residual `r` satisfies `A r <= 0` and `c^T r = -|r|^2`, i.e. it
//! is a descent ray. Bounded problems are then solved by enumerating every
//! basis of `n` constraint rows.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::LinearProblem;

/// Largest dimension accepted by [`lp_oracle`].
pub const MAX_ORACLE_DIM: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOracleResult {
    pub x_star: DVector<f64>,
    pub lambda_star: DVector<f64>,
    pub kappa_star: DVector<f64>,
    pub optimal_value: f64,
    /// Inequality rows tight at `x_star`.
    pub active_set: Vec<usize>,
    pub status: OracleStatus,
    /// Descent ray for unbounded problems.
    pub ray: Option<DVector<f64>>,
}

impl LpOracleResult {
    /// Exactly `n` tight rows with independent gradients and multipliers
    /// above `tol`.
    pub fn is_nondegenerate(&self, lp: &LinearProblem, tol: f64) -> bool {
        let n = lp.dim_x();
        let l = lp.eq_matrix().nrows();
        if self.status != OracleStatus::Optimal || self.active_set.len() + l != n {
            return false;
        }
        if self.active_set.iter().any(|&i| !(self.lambda_star[i] > tol)) {
            return false;
        }
        let basis = basis_matrix(lp, &self.active_set);
        let sv = basis.singular_values();
        sv.min() > tol * sv.max().max(1.0)
    }
}

fn basis_matrix(lp: &LinearProblem, rows: &[usize]) -> DMatrix<f64> {
    let (a, e) = (lp.ineq_matrix(), lp.eq_matrix());
    let mut m = DMatrix::zeros(e.nrows() + rows.len(), lp.dim_x());
    for j in 0..e.nrows() {
        m.set_row(j, &e.row(j));
    }
    for (k, &i) in rows.iter().enumerate() {
        m.set_row(e.nrows() + k, &a.row(i));
    }
    m
}

/// Lawson-Hanson non-negative least squares: `min |B z - d|` over `z >= 0`.
pub fn nnls(b: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    let k = b.ncols();
    let mut z = DVector::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * (1.0 + b.amax()) * (1.0 + d.amax()) * (k.max(1) as f64);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
        let mut sub = DMatrix::zeros(b.nrows(), cols.len());
        for (c, &j) in cols.iter().enumerate() {
            sub.set_column(c, &b.column(j));
        }
        let sol = sub.svd(true, true).solve(d, 1e-13).expect("svd with vectors");
        let mut full = DVector::zeros(k);
        for (c, &j) in cols.iter().enumerate() {
            full[j] = sol[c];
        }
        full
    };

    for _ in 0..3 * k + 10 {
        let w = b.tr_mul(&(d - b * &z));
        let candidate = (0..k)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        loop {
            let s = solve_passive(&passive);
            if (0..k).filter(|&j| passive[j]).all(|j| s[j] > 0.0) {
                z = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in (0..k).filter(|&j| passive[j] && s[j] <= 0.0) {
                alpha = alpha.min(z[j] / (z[j] - s[j]));
            }
            z += (s - &z) * alpha;
            for j in 0..k {
                if passive[j] && z[j] <= tol {
                    passive[j] = false;
                    z[j] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    z
}

/// Descent ray of the recession cone, if the objective is unbounded along
/// one. Equality rows enter as free multipliers.
pub fn descent_ray(lp: &LinearProblem) -> Result<Option<DVector<f64>>> {
    if lp.quadratic().is_some() {
        return Err(Error::Config("the LP oracle needs a linear objective".into()));
    }
    let (a, e) = (lp.ineq_matrix(), lp.eq_matrix());
    let n = lp.dim_x();
    let mut b = DMatrix::zeros(n, a.nrows() + 2 * e.nrows());
    for i in 0..a.nrows() {
        b.set_column(i, &a.row(i).transpose());
    }
    for j in 0..e.nrows() {
        b.set_column(a.nrows() + 2 * j, &e.row(j).transpose());
        b.set_column(a.nrows() + 2 * j + 1, &(-e.row(j).transpose()));
    }
    let d = -lp.linear();
    let z = nnls(&b, &d);
    let r = &d - &b * z;
    let scale = 1.0 + lp.linear().amax();
    if r.norm() <= 1e-9 * scale {
        return Ok(None);
    }
    let slack = 1e-9 * r.norm() * (1.0 + a.amax().max(e.amax()));
    let recedes = (a * &r).iter().all(|v| *v <= slack) && (e * &r).iter().all(|v| v.abs() <= slack);
    let descends = lp.linear().dot(&r) < 0.0;
    Ok((recedes && descends).then_some(r))
}

/// Gaussian elimination with partial pivoting on a small dense system held
/// in `a` (row-major, `n x n`) and `b`. Returns `false` when singular.
fn solve_small(a: &mut [f64], b: &mut [f64], n: usize, scale: f64) -> bool {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() <= 1e-11 * scale {
            return false;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        let p = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / p;
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col * n + c] * b[c];
        }
        b[col] = s / a[col * n + col];
    }
    true
}

/// Calls `visit` on every increasing `k`-subset of `0..m` whose first
/// element is `first`.
fn for_each_subset(first: usize, m: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).map(|j| first + j).collect();
    if k == 0 {
        visit(&idx);
        return;
    }
    if idx[k - 1] >= m {
        return;
    }
    loop {
        visit(&idx);
        // advance positions 1..k, keeping idx[0] fixed
        let mut p = k - 1;
        loop {
            if p == 0 {
                return;
            }
            if idx[p] < m - (k - p) {
                idx[p] += 1;
                for q in p + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
            p -= 1;
        }
    }
}

struct Vertex {
    value: f64,
    rows: Vec<usize>,
    x: Vec<f64>,
}

/// Solves an LP with at most [`MAX_ORACLE_DIM`] variables by enumeration.
pub fn lp_oracle(lp: &LinearProblem) -> Result<LpOracleResult> {
    let n = lp.dim_x();
    if n > MAX_ORACLE_DIM {
        return Err(Error::Config(format!(
            "vertex enumeration supports n <= {MAX_ORACLE_DIM}, got {n}"
        )));
    }
    let (a, b) = (lp.ineq_matrix(), lp.ineq_offset());
    let (e, eo) = (lp.eq_matrix(), lp.eq_offset());
    let (m, l) = (a.nrows(), e.nrows());
    let c = lp.linear();
    let empty = |status, ray| LpOracleResult {
        x_star: DVector::from_element(n, f64::NAN),
        lambda_star: DVector::zeros(m),
        kappa_star: DVector::zeros(l),
        optimal_value: f64::NAN,
        active_set: Vec::new(),
        status,
        ray,
    };

    if let Some(ray) = descent_ray(lp)? {
        return Ok(empty(OracleStatus::Unbounded, Some(ray)));
    }
    if l > n {
        return Err(Error::Config("more equality rows than variables".into()));
    }
    let k = n - l;
    if k > m {
        return Ok(empty(OracleStatus::Infeasible, None));
    }

    let scale = 1.0 + a.amax().max(e.amax());
    let feas_tol = 1e-9 * (1.0 + b.amax().max(eo.amax()));
    let row = |i: usize| -> (Vec<f64>, f64) {
        if i < l {
            (e.row(i).iter().copied().collect(), -eo[i])
        } else {
            (a.row(i - l).iter().copied().collect(), -b[i - l])
        }
    };
    let rows: Vec<(Vec<f64>, f64)> = (0..l + m).map(row).collect();

    let check = |subset: &[usize]| -> Option<Vertex> {
        let mut mat = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for (r, idx) in (0..l).chain(subset.iter().map(|i| i + l)).enumerate() {
            mat[r * n..(r + 1) * n].copy_from_slice(&rows[idx].0);
            rhs[r] = rows[idx].1;
        }
        if !solve_small(&mut mat, &mut rhs, n, scale) {
            return None;
        }
        let x = rhs;
        for i in 0..m {
            let gi = b[i] + (0..n).map(|j| a[(i, j)] * x[j]).sum::<f64>();
            if gi > feas_tol {
                return None;
            }
        }
        for j in 0..l {
            let hj = eo[j] + (0..n).map(|q| e[(j, q)] * x[q]).sum::<f64>();
            if hj.abs() > feas_tol {
                return None;
            }
        }
        let value = (0..n).map(|j| c[j] * x[j]).sum();
        Some(Vertex {
            value,
            rows: subset.to_vec(),
            x,
        })
    };

    let better = |p: Vertex, q: Vertex| -> Vertex {
        match p.value.total_cmp(&q.value) {
            std::cmp::Ordering::Less => p,
            std::cmp::Ordering::Greater => q,
            std::cmp::Ordering::Equal => {
                if p.rows <= q.rows {
                    p
                } else {
                    q
                }
            }
        }
    };

    let best = if k == 0 {
        check(&[])
    } else {
        (0..=m - k)
            .into_par_iter()
            .filter_map(|first| {
                let mut local: Option<Vertex> = None;
                for_each_subset(first, m, k, |s| {
                    if let Some(v) = check(s) {
                        local = Some(match local.take() {
                            Some(cur) => better(cur, v),
                            None => v,
                        });
                    }
                });
                local
            })
            .reduce_with(better)
    };
    let Some(best) = best else {
        return Ok(empty(OracleStatus::Infeasible, None));
    };

    let x = DVector::from_vec(best.x);
    let g = a * &x + b;
    let active_set: Vec<usize> = (0..m).filter(|&i| g[i].abs() <= feas_tol).collect();

    // multipliers: -c = A_S^T lambda_S + E^T kappa with lambda_S >= 0
    let mut cols = DMatrix::zeros(n, active_set.len() + 2 * l);
    for (k2, &i) in active_set.iter().enumerate() {
        cols.set_column(k2, &a.row(i).transpose());
    }
    for j in 0..l {
        cols.set_column(active_set.len() + 2 * j, &e.row(j).transpose());
        cols.set_column(active_set.len() + 2 * j + 1, &(-e.row(j).transpose()));
    }
    let z = nnls(&cols, &(-c));
    let mut lambda = DVector::zeros(m);
    for (k2, &i) in active_set.iter().enumerate() {
        lambda[i] = z[k2];
    }
    let kappa = DVector::from_fn(l, |j, _| z[active_set.len() + 2 * j] - z[active_set.len() + 2 * j + 1]);

    Ok(LpOracleResult {
        optimal_value: best.value,
        x_star: x,
        lambda_star: lambda,
        kappa_star: kappa,
        active_set,
        status: OracleStatus::Optimal,
        ray: None,
    })
}

/// `true` unless a descent ray exists.
pub fn is_bounded(lp: &LinearProblem) -> Result<bool> {
    Ok(descent_ray(lp)?.is_none())
}
