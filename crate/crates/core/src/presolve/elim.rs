//! Sparse Gaussian elimination on `[B | I]` with Markowitz ordering and
//! threshold partial pivoting, used to find linearly dependent rows.

use std::collections::{BTreeMap, BTreeSet};

/// A row that eliminated to zero, with the combination `sum_q w_q * row_q`
/// (always containing the row itself with weight 1) that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DependentRow {
    pub row: usize,
    pub weights: Vec<(usize, f64)>,
}

/// Eliminates `rows` (pivot-column entries only) and returns the rows that
/// became zero. A row counts as zero when every remaining entry is at most
/// `zero_tol` times its original largest magnitude.
pub fn dependent_rows(rows: &[Vec<(usize, f64)>], pivot_threshold: f64, zero_tol: f64) -> Vec<DependentRow> {
    let n = rows.len();
    let mut a: Vec<BTreeMap<usize, f64>> = rows.iter().map(|r| r.iter().copied().filter(|e| e.1 != 0.0).collect()).collect();
    let mut k: Vec<BTreeMap<usize, f64>> = (0..n).map(|i| BTreeMap::from([(i, 1.0)])).collect();
    let scale: Vec<f64> = a.iter().map(|r| r.values().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let mut col_rows: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (i, r) in a.iter().enumerate() {
        for &c in r.keys() {
            col_rows.entry(c).or_default().insert(i);
        }
    }
    let mut active: BTreeSet<usize> = (0..n).collect();
    let mut dependent = Vec::new();

    loop {
        let zero: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| a[i].values().all(|v| v.abs() <= zero_tol * scale[i]))
            .collect();
        for i in zero {
            active.remove(&i);
            for &c in a[i].keys() {
                if let Some(s) = col_rows.get_mut(&c) {
                    s.remove(&i);
                }
            }
            // round-off multipliers would leave noise entries in the combination
            let wmax = k[i].values().fold(0.0f64, |m, w| m.max(w.abs()));
            let weights = k[i].iter().filter(|(_, w)| w.abs() > zero_tol * wmax).map(|(&q, &w)| (q, w)).collect();
            dependent.push(DependentRow { row: i, weights });
        }
        if active.is_empty() {
            break;
        }
        let mut colmax: BTreeMap<usize, f64> = BTreeMap::new();
        for &i in &active {
            for (&c, &v) in &a[i] {
                let m = colmax.entry(c).or_insert(0.0);
                *m = m.max(v.abs());
            }
        }
        // (markowitz cost, -|v|, row, col)
        let mut best: Option<(usize, f64, usize, usize)> = None;
        for &i in &active {
            let rlen = a[i].len();
            for (&c, &v) in &a[i] {
                if v.abs() <= zero_tol * scale[i] || v.abs() < pivot_threshold * colmax[&c] {
                    continue;
                }
                let cost = (rlen - 1) * (col_rows[&c].len() - 1);
                let cand = (cost, -v.abs(), i, c);
                let better = match &best {
                    None => true,
                    Some(b) => cand.0 < b.0 || (cand.0 == b.0 && (cand.1 < b.1 || (cand.1 == b.1 && (cand.2, cand.3) < (b.2, b.3)))),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let Some((_, _, p, c)) = best else {
            // only negligible entries remain; the next sweep classifies them
            for &i in &active.clone() {
                a[i].retain(|_, v| v.abs() > zero_tol * scale[i]);
            }
            continue;
        };
        active.remove(&p);
        for &col in a[p].keys() {
            col_rows.get_mut(&col).unwrap().remove(&p);
        }
        let piv = a[p][&c];
        let prow: Vec<(usize, f64)> = a[p].iter().map(|(&j, &v)| (j, v)).collect();
        let pk: Vec<(usize, f64)> = k[p].iter().map(|(&j, &v)| (j, v)).collect();
        let targets: Vec<usize> = col_rows[&c].iter().copied().collect();
        for i in targets {
            let m = a[i][&c] / piv;
            for &(j, v) in &prow {
                if j == c {
                    a[i].remove(&c);
                    col_rows.get_mut(&c).unwrap().remove(&i);
                    continue;
                }
                let e = a[i].entry(j).or_insert(0.0);
                let was_zero = *e == 0.0;
                *e -= m * v;
                if e.abs() <= 1e-15 * scale[i] {
                    a[i].remove(&j);
                    if !was_zero {
                        col_rows.get_mut(&j).unwrap().remove(&i);
                    }
                } else if was_zero {
                    col_rows.entry(j).or_default().insert(i);
                }
            }
            for &(q, w) in &pk {
                let e = k[i].entry(q).or_insert(0.0);
                *e -= m * w;
                if *e == 0.0 {
                    k[i].remove(&q);
                }
            }
        }
    }
    dependent.sort_by_key(|d| d.row);
    dependent
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_multiple_of_other_row() {
        let rows = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]];
        let d = dependent_rows(&rows, 0.1, 1e-10);
        assert_eq!(d.len(), 1);
        let w: BTreeMap<usize, f64> = d[0].weights.iter().copied().collect();
        assert_eq!(w[&d[0].row], 1.0);
        // combination must cancel
        let other = 1 - d[0].row;
        let ratio = rows[d[0].row][0].1 / rows[other][0].1;
        assert!((w[&other] + ratio).abs() < 1e-12);
    }

    #[test]
    fn full_rank_has_no_dependents() {
        let rows = vec![vec![(0, 1.0)], vec![(0, 1.0), (1, 1.0)], vec![(1, 3.0), (2, 1.0)]];
        assert!(dependent_rows(&rows, 0.1, 1e-10).is_empty());
    }

    #[test]
    fn empty_rows_are_dependent() {
        let rows = vec![vec![], vec![(0, 1.0)]];
        let d = dependent_rows(&rows, 0.1, 1e-10);
        assert_eq!(d, vec![DependentRow { row: 0, weights: vec![(0, 1.0)] }]);
    }
}
