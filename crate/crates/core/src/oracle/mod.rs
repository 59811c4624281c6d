//! Independent reference computations used to check presolve: a dense
//! simplex solver, a brute-force parallel row finder and a dense rank.

mod dense;
mod simplex;

pub use dense::{dense_rank, Lu};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BlockProblem, LpProblem};
use crate::postsolve::PrimalDualSolution;

/// Largest row or column count the dense solver accepts by default.
pub const DEFAULT_CAP: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible(String),
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OracleError {
    #[error("problem with {rows} rows and {cols} columns exceeds the oracle cap of {cap}")]
    TooLarge { rows: usize, cols: usize, cap: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

/// Solution in the sign convention of [`crate::postsolve::kkt_residuals`];
/// `y` holds equality rows first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl OracleSolution {
    fn status_only(status: LpStatus) -> Self {
        Self { status, x: Vec::new(), y: Vec::new(), z: Vec::new(), objective: f64::NAN, iterations: 0 }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve(lp: &LpProblem) -> Result<OracleSolution, OracleError> {
    solve_with_cap(lp, DEFAULT_CAP)
}

pub fn solve_with_cap(lp: &LpProblem, cap: usize) -> Result<OracleSolution, OracleError> {
    let (rows, cols) = (lp.n_rows(), lp.n_cols());
    if rows > cap || cols > cap {
        return Err(OracleError::TooLarge { rows, cols, cap });
    }
    simplex::solve_dense(lp)
}

/// All pairs `(i, j, lambda)`, `i < j`, with identical patterns and
/// `rows[j] = lambda * rows[i]` up to `tol` on first-entry-normalized values,
/// by comparing every pair densely.
pub fn brute_force_parallel_rows(rows: &[Vec<(usize, f64)>], ncols: usize, tol: f64) -> Vec<(usize, usize, f64)> {
    let dense: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut d = vec![0.0; ncols];
            for &(c, v) in r {
                d[c] += v;
            }
            d
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..dense.len() {
        let Some(fi) = dense[i].iter().position(|v| *v != 0.0) else { continue };
        for j in i + 1..dense.len() {
            let (a, b) = (&dense[i], &dense[j]);
            if b[fi] == 0.0 || (0..ncols).any(|c| (a[c] == 0.0) != (b[c] == 0.0)) {
                continue;
            }
            if (0..ncols).all(|c| (a[c] / a[fi] - b[c] / b[fi]).abs() <= tol) {
                out.push((i, j, b[fi] / a[fi]));
            }
        }
    }
    out
}

/// Solves the assembled form of `p` and maps the solution back to ids.
pub fn solve_block_problem(p: &BlockProblem) -> Result<(OracleSolution, PrimalDualSolution), OracleError> {
    let (lp, maps, _) = p.assemble();
    let sol = solve(&lp)?;
    let mut out = PrimalDualSolution::zeros(p.ids);
    if sol.is_optimal() {
        for (k, &j) in maps.col_ids.iter().enumerate() {
            out.x[j] = sol.x[k];
            out.z[j] = sol.z[k];
        }
        for (k, &r) in maps.row_ids.iter().enumerate() {
            out.y[r] = sol.y[k];
        }
    }
    Ok((sol, out))
}

/// KKT residuals of an oracle solution of `lp` itself.
pub fn kkt_check_lp(lp: &LpProblem, sol: &OracleSolution) -> crate::postsolve::KktReport {
    let s = PrimalDualSolution { x: sol.x.clone(), y: sol.y.clone(), z: sol.z.clone() };
    crate::postsolve::kkt_residuals(lp, &s)
}
