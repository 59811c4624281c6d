//! Problem representations: the monolithic LP and its arrowhead block form.

mod block;
mod sparse;
mod validate;

pub use block::{Block0, BlockProblem, ColGroup, IndexMaps, LocalBlock, RowGroup};
pub use sparse::SparseMatrix;
pub use validate::{linking_counts, local_violations, nnz_counts, replicated_checksum, validate_arrowhead, ProblemSize};

use serde::{Deserialize, Serialize};

pub const INF: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarData {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

impl VarData {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Self {
        Self { name: name.into(), lower, upper, cost }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    Equality,
    Inequality,
}

/// Sizes of the original index space. Row ids number equality rows first,
/// then inequality rows; column ids are the original column indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdSpace {
    pub n_eq: usize,
    pub n_ineq: usize,
    pub n_cols: usize,
}

impl IdSpace {
    pub fn n_rows(&self) -> usize {
        self.n_eq + self.n_ineq
    }

    pub fn row_kind(&self, id: usize) -> RowKind {
        if id < self.n_eq {
            RowKind::Equality
        } else {
            RowKind::Inequality
        }
    }
}

/// `min c'x + offset  s.t.  A x = b,  d <= C x <= f,  l <= x <= u`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub name: String,
    pub vars: Vec<VarData>,
    pub eq: SparseMatrix,
    pub eq_rhs: Vec<f64>,
    pub eq_names: Vec<String>,
    pub ineq: SparseMatrix,
    pub ineq_lower: Vec<f64>,
    pub ineq_upper: Vec<f64>,
    pub ineq_names: Vec<String>,
    pub obj_offset: f64,
}

impl LpProblem {
    pub fn n_cols(&self) -> usize {
        self.vars.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_lower.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_eq() + self.n_ineq()
    }

    pub fn nnz(&self) -> usize {
        self.eq.nnz() + self.ineq.nnz()
    }

    pub fn id_space(&self) -> IdSpace {
        IdSpace { n_eq: self.n_eq(), n_ineq: self.n_ineq(), n_cols: self.n_cols() }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.obj_offset + self.vars.iter().zip(x).map(|(v, x)| v.cost * x).sum::<f64>()
    }

    /// Row by unified id.
    pub fn row(&self, id: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (m, i) = if id < self.n_eq() { (&self.eq, id) } else { (&self.ineq, id - self.n_eq()) };
        m.row(i)
    }

    pub fn row_bounds(&self, id: usize) -> (f64, f64) {
        if id < self.n_eq() {
            (self.eq_rhs[id], self.eq_rhs[id])
        } else {
            let k = id - self.n_eq();
            (self.ineq_lower[k], self.ineq_upper[k])
        }
    }

    pub fn row_name(&self, id: usize) -> &str {
        if id < self.n_eq() {
            &self.eq_names[id]
        } else {
            &self.ineq_names[id - self.n_eq()]
        }
    }

    /// Column lists `(row id, coefficient)` sorted by row id.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n_cols()];
        for id in 0..self.n_rows() {
            for (c, v) in self.row(id) {
                cols[c].push((id, v));
            }
        }
        cols
    }

    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.n_cols();
        if self.eq.ncols() != n || self.ineq.ncols() != n {
            out.push("matrix column count differs from variable count".into());
        }
        if self.eq.nrows() != self.eq_rhs.len() || self.eq_names.len() != self.eq_rhs.len() {
            out.push("equality row data have inconsistent lengths".into());
        }
        if self.ineq.nrows() != self.ineq_lower.len()
            || self.ineq_upper.len() != self.ineq_lower.len()
            || self.ineq_names.len() != self.ineq_lower.len()
        {
            out.push("inequality row data have inconsistent lengths".into());
        }
        out.extend(self.eq.check().into_iter().map(|s| format!("A: {s}")));
        out.extend(self.ineq.check().into_iter().map(|s| format!("C: {s}")));
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower > v.upper || v.lower == INF || v.upper == -INF || v.lower.is_nan() || v.upper.is_nan() {
                out.push(format!("column {j} ({}) has invalid bounds [{}, {}]", v.name, v.lower, v.upper));
            }
            if !v.cost.is_finite() {
                out.push(format!("column {j} ({}) has non-finite cost", v.name));
            }
        }
        for (i, &b) in self.eq_rhs.iter().enumerate() {
            if !b.is_finite() {
                out.push(format!("equality row {i} has non-finite right-hand side"));
            }
        }
        for i in 0..self.n_ineq() {
            let (d, f) = (self.ineq_lower[i], self.ineq_upper[i]);
            if d > f || d == INF || f == -INF || d.is_nan() || f.is_nan() {
                out.push(format!("inequality row {i} has invalid bounds [{d}, {f}]"));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowOwner {
    /// Row of diagonal block `b`; block 0 holds the rows over linking columns only.
    Block(usize),
    Link,
}

/// Assignment of every row and column of a monolithic LP to its arrowhead role.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockAssignment {
    pub n_blocks: usize,
    pub eq_rows: Vec<RowOwner>,
    pub ineq_rows: Vec<RowOwner>,
    /// Column block; 0 marks a linking column.
    pub cols: Vec<usize>,
}

impl BlockAssignment {
    /// `(block, index within block)` for every column.
    pub fn col_positions(&self) -> Vec<(usize, usize)> {
        let mut next = vec![0usize; self.n_blocks + 1];
        self.cols
            .iter()
            .map(|&b| {
                let k = next[b];
                next[b] += 1;
                (b, k)
            })
            .collect()
    }
}

/// Blocks `1..=n_blocks` split into contiguous ranges, one per rank.
pub fn blocks_of_rank(rank: usize, n_blocks: usize, nranks: usize) -> std::ops::RangeInclusive<usize> {
    let start = rank * n_blocks / nranks;
    let end = (rank + 1) * n_blocks / nranks;
    (start + 1)..=end
}

pub fn owner_of_block(block: usize, n_blocks: usize, nranks: usize) -> usize {
    if block == 0 {
        return 0;
    }
    (0..nranks).find(|&r| blocks_of_rank(r, n_blocks, nranks).contains(&block)).expect("block out of range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_block_ranges_cover_all() {
        for n in 1..10 {
            for p in 1..=n {
                let mut seen = Vec::new();
                for r in 0..p {
                    seen.extend(blocks_of_rank(r, n, p));
                }
                assert_eq!(seen, (1..=n).collect::<Vec<_>>());
                for b in 1..=n {
                    assert!(blocks_of_rank(owner_of_block(b, n, p), n, p).contains(&b));
                }
            }
        }
    }
}
