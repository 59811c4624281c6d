use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix with sorted column indices and no stored zeros.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_start: vec![0; nrows + 1], cols: Vec::new(), vals: Vec::new() }
    }

    /// Builds a matrix from per-row entry lists. Entries are sorted, duplicates
    /// are summed and exact zeros dropped.
    pub fn from_rows<I, R>(ncols: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (usize, f64)>,
    {
        let mut m = Self { nrows: 0, ncols, row_start: vec![0], cols: Vec::new(), vals: Vec::new() };
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for row in rows {
            buf.clear();
            buf.extend(row);
            m.push_row_entries(&mut buf);
        }
        m
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self::from_rows(ncols, rows)
    }

    pub fn from_dense(dense: &[Vec<f64>], ncols: usize) -> Self {
        Self::from_rows(
            ncols,
            dense.iter().map(|r| r.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect::<Vec<_>>()),
        )
    }

    fn push_row_entries(&mut self, buf: &mut Vec<(usize, f64)>) {
        buf.sort_by_key(|e| e.0);
        let mut i = 0;
        while i < buf.len() {
            let c = buf[i].0;
            assert!(c < self.ncols, "column {c} out of range ({} columns)", self.ncols);
            let mut v = buf[i].1;
            i += 1;
            while i < buf.len() && buf[i].0 == c {
                v += buf[i].1;
                i += 1;
            }
            if v != 0.0 {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.nrows += 1;
        self.row_start.push(self.cols.len());
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        let mut buf: Vec<(usize, f64)> = entries.into_iter().collect();
        self.push_row_entries(&mut buf);
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_cols(&self, i: usize) -> &[usize] {
        &self.cols[self.row_start[i]..self.row_start[i + 1]]
    }

    pub fn row_vals(&self, i: usize) -> &[f64] {
        &self.vals[self.row_start[i]..self.row_start[i + 1]]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_cols(i).iter().copied().zip(self.row_vals(i).iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_start[i + 1] - self.row_start[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.row_cols(i).binary_search(&j) {
            Ok(k) => self.row_vals(i)[k],
            Err(_) => 0.0,
        }
    }

    /// Column-major view, stored as the CSR form of the transpose.
    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut cols = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                let k = next[c];
                cols[k] = i;
                vals[k] = v;
                next[c] += 1;
            }
        }
        SparseMatrix { nrows: self.ncols, ncols: self.nrows, row_start: counts, cols, vals }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] = v;
            }
        }
        d
    }

    /// Violations of the storage invariants, empty when the matrix is well formed.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.row_start.len() != self.nrows + 1 || self.row_start.first() != Some(&0) {
            out.push("row pointer array has wrong shape".to_string());
            return out;
        }
        if *self.row_start.last().unwrap() != self.cols.len() || self.cols.len() != self.vals.len() {
            out.push("row pointer does not match entry count".to_string());
            return out;
        }
        for i in 0..self.nrows {
            if self.row_start[i] > self.row_start[i + 1] {
                out.push(format!("row {i}: decreasing row pointer"));
                continue;
            }
            let cols = self.row_cols(i);
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                out.push(format!("row {i}: column indices not strictly increasing"));
            }
            if cols.iter().any(|&c| c >= self.ncols) {
                out.push(format!("row {i}: column index out of range"));
            }
            if self.row_vals(i).iter().any(|&v| v == 0.0 || !v.is_finite()) {
                out.push(format!("row {i}: stored zero or non-finite value"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_sorted_and_merges_duplicates() {
        let m = SparseMatrix::from_rows(4, vec![vec![(3, 1.0), (0, 2.0), (3, 1.0)], vec![(1, 1.0), (1, -1.0)]]);
        assert_eq!(m.row_cols(0), &[0, 3]);
        assert_eq!(m.row_vals(0), &[2.0, 2.0]);
        assert_eq!(m.row_len(1), 0);
        assert!(m.check().is_empty());
    }

    #[test]
    fn transpose_round_trips() {
        let m = SparseMatrix::from_triplets(3, 4, &[(0, 1, 1.5), (2, 1, -2.0), (1, 3, 4.0), (2, 0, 1.0)]);
        let t = m.transpose();
        assert_eq!(t.nrows(), 4);
        assert_eq!(t.get(1, 2), -2.0);
        assert_eq!(t.transpose(), m);
    }
}
