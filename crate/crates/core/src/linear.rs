//! Linear and quadratic programs with affine constraints, and their JSON
//! file format.
//!
//! ```json
//! {
//!   "kind": "lp",
//!   "objective": { "linear": [1.0, 1.0], "constant": 0.0 },
//!   "inequalities": [ { "coeffs": [-1.0, 0.0], "offset": -1.0 } ],
//!   "equalities": [],
//!   "x0": [0.0, 0.0]
//! }
//! ```
//!
//! Each inequality row reads `coeffs . x + offset <= 0`, each equality row
//! `coeffs . x + offset = 0`. A `qp` additionally carries a symmetric
//! `"quadratic"` matrix `Q` (list of rows) and minimizes
//! `1/2 x^T Q x + linear . x + constant`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::problem::{ConstrainedProblem, Derivatives, Evaluator, PointValues, ProblemKind};

/// `min 1/2 x^T Q x + c^T x + c0  s.t.  A x + b <= 0,  E x + e = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    quadratic: Option<DMatrix<f64>>,
    linear: DVector<f64>,
    constant: f64,
    ineq: DMatrix<f64>,
    ineq_offset: DVector<f64>,
    eq: DMatrix<f64>,
    eq_offset: DVector<f64>,
}

impl LinearProblem {
    pub fn lp(
        linear: DVector<f64>,
        ineq: DMatrix<f64>,
        ineq_offset: DVector<f64>,
        eq: DMatrix<f64>,
        eq_offset: DVector<f64>,
    ) -> Result<Self> {
        let n = linear.len();
        check_len("inequality columns", n, ineq.ncols())?;
        check_len("inequality offsets", ineq.nrows(), ineq_offset.len())?;
        check_len("equality columns", n, eq.ncols())?;
        check_len("equality offsets", eq.nrows(), eq_offset.len())?;
        if n == 0 {
            return Err(Error::Config("problem needs at least one variable".into()));
        }
        Ok(Self {
            quadratic: None,
            linear,
            constant: 0.0,
            ineq,
            ineq_offset,
            eq,
            eq_offset,
        })
    }

    /// Inequality-only LP from an augmented matrix `G` with rows
    /// `(b_i, a_i)`, i.e. `G (1; x) <= 0`.
    pub fn from_augmented(linear: DVector<f64>, augmented: &DMatrix<f64>) -> Result<Self> {
        let n = linear.len();
        check_len("augmented columns", n + 1, augmented.ncols())?;
        let offset = augmented.column(0).into_owned();
        let ineq = augmented.columns(1, n).into_owned();
        Self::lp(linear, ineq, offset, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn with_quadratic(mut self, q: DMatrix<f64>) -> Result<Self> {
        let n = self.dim_x();
        check_len("quadratic rows", n, q.nrows())?;
        check_len("quadratic columns", n, q.ncols())?;
        let scale = q.amax().max(1.0);
        if (&q - q.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Config("quadratic term must be symmetric".into()));
        }
        self.quadratic = Some(q);
        Ok(self)
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn dim_x(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn quadratic(&self) -> Option<&DMatrix<f64>> {
        self.quadratic.as_ref()
    }

    pub fn ineq_matrix(&self) -> &DMatrix<f64> {
        &self.ineq
    }

    pub fn ineq_offset(&self) -> &DVector<f64> {
        &self.ineq_offset
    }

    pub fn eq_matrix(&self) -> &DMatrix<f64> {
        &self.eq
    }

    pub fn eq_offset(&self) -> &DVector<f64> {
        &self.eq_offset
    }

    pub fn into_problem(self) -> ConstrainedProblem {
        ConstrainedProblem::new(self)
    }

    pub fn to_file(&self, x0: Option<&DVector<f64>>) -> ProblemFile {
        let rows = |a: &DMatrix<f64>, b: &DVector<f64>| -> Vec<Row> {
            (0..a.nrows())
                .map(|i| Row {
                    coeffs: a.row(i).iter().copied().collect(),
                    offset: b[i],
                })
                .collect()
        };
        ProblemFile {
            kind: if self.quadratic.is_some() {
                ProblemKind::Qp
            } else {
                ProblemKind::Lp
            },
            objective: Objective {
                linear: self.linear.iter().copied().collect(),
                quadratic: self.quadratic.as_ref().map(|q| {
                    (0..q.nrows())
                        .map(|i| q.row(i).iter().copied().collect())
                        .collect()
                }),
                constant: self.constant,
            },
            inequalities: rows(&self.ineq, &self.ineq_offset),
            equalities: rows(&self.eq, &self.eq_offset),
            x0: x0.map(|x| x.iter().copied().collect()),
        }
    }
}

impl Evaluator for LinearProblem {
    fn dim_x(&self) -> usize {
        self.linear.len()
    }

    fn dim_g(&self) -> usize {
        self.ineq.nrows()
    }

    fn dim_h(&self) -> usize {
        self.eq.nrows()
    }

    fn kind(&self) -> ProblemKind {
        if self.quadratic.is_some() {
            ProblemKind::Qp
        } else {
            ProblemKind::Lp
        }
    }

    fn affine_constraints(&self) -> bool {
        true
    }

    fn values(&self, x: &DVector<f64>) -> PointValues {
        let mut f = self.linear.dot(x) + self.constant;
        if let Some(q) = &self.quadratic {
            f += 0.5 * x.dot(&(q * x));
        }
        PointValues {
            x: x.clone(),
            f,
            g: &self.ineq * x + &self.ineq_offset,
            h: &self.eq * x + &self.eq_offset,
        }
    }

    fn derivatives(&self, x: &DVector<f64>) -> Derivatives {
        let n = self.dim_x();
        let (grad_f, hess_f) = match &self.quadratic {
            Some(q) => (q * x + &self.linear, q.clone()),
            None => (self.linear.clone(), DMatrix::zeros(n, n)),
        };
        Derivatives {
            grad_f,
            hess_f,
            jac_g: self.ineq.clone(),
            jac_h: self.eq.clone(),
            hess_g: None,
            hess_h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: ProblemKind,
    pub objective: Objective,
    #[serde(default)]
    pub inequalities: Vec<Row>,
    #[serde(default)]
    pub equalities: Vec<Row>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    pub linear: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl ProblemFile {
    /// Parses JSON text. Syntax errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    pub fn x0(&self) -> Option<DVector<f64>> {
        self.x0.as_ref().map(|v| DVector::from_column_slice(v))
    }

    pub fn build(&self) -> Result<LinearProblem> {
        let n = self.objective.linear.len();
        let stack = |rows: &[Row], what: &'static str| -> Result<(DMatrix<f64>, DVector<f64>)> {
            for r in rows {
                check_len(what, n, r.coeffs.len())?;
            }
            let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].coeffs[j]);
            let b = DVector::from_fn(rows.len(), |i, _| rows[i].offset);
            Ok((a, b))
        };
        let (a, b) = stack(&self.inequalities, "inequality row")?;
        let (e, eo) = stack(&self.equalities, "equality row")?;
        if let Some(x0) = &self.x0 {
            check_len("x0", n, x0.len())?;
        }
        let p = LinearProblem::lp(DVector::from_column_slice(&self.objective.linear), a, b, e, eo)?
            .with_constant(self.objective.constant);
        match (self.kind, &self.objective.quadratic) {
            (ProblemKind::Lp, None) => Ok(p),
            (ProblemKind::Lp, Some(_)) => {
                Err(Error::Config("kind \"lp\" cannot have a quadratic objective".into()))
            }
            (ProblemKind::Qp, Some(q)) => {
                for row in q {
                    check_len("quadratic row", n, row.len())?;
                }
                check_len("quadratic rows", n, q.len())?;
                p.with_quadratic(DMatrix::from_fn(n, n, |i, j| q[i][j]))
            }
            (ProblemKind::Qp, None) => {
                Err(Error::Config("kind \"qp\" requires a quadratic objective".into()))
            }
            (ProblemKind::Custom, _) => Err(Error::Config(
                "custom problems are registered in code, not loaded from files".into(),
            )),
        }
    }
}
