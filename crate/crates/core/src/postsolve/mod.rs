//! Reverse replay of the reduction stack.

mod kkt;
mod replay;
mod stack;

pub use kkt::{kkt_residuals, KktReport};
pub use replay::{postsolve, run_postsolve};
pub use stack::*;

use serde::{Deserialize, Serialize};

use crate::model::IdSpace;

/// Primal values, row duals (equality rows first) and reduced costs, all
/// indexed by original id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl PrimalDualSolution {
    pub fn zeros(ids: IdSpace) -> Self {
        Self { x: vec![0.0; ids.n_cols], y: vec![0.0; ids.n_rows()], z: vec![0.0; ids.n_cols] }
    }

    /// Dual of the lower bound of column `j`.
    pub fn gamma(&self, j: usize) -> f64 {
        self.z[j].max(0.0)
    }

    /// Dual of the upper bound of column `j`.
    pub fn phi(&self, j: usize) -> f64 {
        (-self.z[j]).max(0.0)
    }
}
