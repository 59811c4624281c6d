//! Dense bounded-variable primal simplex, two phases.
//!
//! Inequality rows get a slack `s = Cx` bounded by `[d, f]`; phase 1 starts
//! from a signed artificial basis. Artificial columns are unit vectors and are
//! never stored.

use crate::model::LpProblem;

use super::dense::Lu;
use super::{LpStatus, OracleError, OracleSolution};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const BLAND_AFTER: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Pos {
    Basic(usize),
    Lower,
    Upper,
    /// Free nonbasic variable held at zero.
    Zero,
}

struct Tableau {
    m: usize,
    /// Structural columns then slacks.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    /// Artificial signs; an artificial that left the basis is dead.
    art_sign: Vec<f64>,
    art_dead: Vec<bool>,
    /// Basic variable per row: `< n` real, `n + i` artificial `i`.
    basis: Vec<usize>,
    pos: Vec<Pos>,
    x: Vec<f64>,
    xa: Vec<f64>,
    binv: Vec<f64>,
    degenerate: usize,
    iterations: usize,
}

impl Tableau {
    fn n(&self) -> usize {
        self.cols.len()
    }

    fn column(&self, v: usize) -> Vec<(usize, f64)> {
        if v < self.n() {
            self.cols[v].clone()
        } else {
            vec![(v - self.n(), self.art_sign[v - self.n()])]
        }
    }

    fn bounds(&self, v: usize) -> (f64, f64) {
        if v < self.n() {
            (self.lower[v], self.upper[v])
        } else if self.art_dead[v - self.n()] {
            (0.0, 0.0)
        } else {
            (0.0, f64::INFINITY)
        }
    }

    fn value(&self, v: usize) -> f64 {
        if v < self.n() {
            self.x[v]
        } else {
            self.xa[v - self.n()]
        }
    }

    fn set_value(&mut self, v: usize, val: f64) {
        let n = self.n();
        if v < n {
            self.x[v] = val;
        } else {
            self.xa[v - n] = val;
        }
    }

    /// `B^{-1} a` for a sparse column.
    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for &(i, a) in col {
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.binv[k * m + i] * a;
            }
        }
        out
    }

    fn basis_lu(&self) -> Option<Lu> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (k, &v) in self.basis.iter().enumerate() {
            for (i, a) in self.column(v) {
                b[i * m + k] = a;
            }
        }
        Lu::factor(b, m)
    }

    /// Recomputes the explicit inverse and the basic values.
    fn refactor(&mut self) -> Result<(), OracleError> {
        let m = self.m;
        let lu = self.basis_lu().ok_or_else(|| OracleError::Numerical("singular basis".into()))?;
        let mut e = vec![0.0; m];
        for i in 0..m {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[i] = 1.0;
            let col = lu.solve(&e);
            for k in 0..m {
                self.binv[k * m + i] = col[k];
            }
        }
        let mut r = self.rhs.clone();
        for j in 0..self.n() {
            if !matches!(self.pos[j], Pos::Basic(_)) && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.x[j];
                }
            }
        }
        let xb = lu.solve(&r);
        for (k, &v) in self.basis.clone().iter().enumerate() {
            self.set_value(v, xb[k]);
        }
        Ok(())
    }
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn iterate(&mut self, c: &[f64], limit: usize) -> Result<Outcome, OracleError> {
        let (m, n) = (self.m, self.n());
        let mut since_refactor = 0;
        loop {
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            let mut y = vec![0.0; m];
            for (k, &v) in self.basis.iter().enumerate() {
                let cb = c[v];
                if cb != 0.0 {
                    for (i, yi) in y.iter_mut().enumerate() {
                        *yi += cb * self.binv[k * m + i];
                    }
                }
            }
            let bland = self.degenerate >= BLAND_AFTER;
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..n {
                let dir = match self.pos[j] {
                    Pos::Basic(_) => continue,
                    _ if self.lower[j] == self.upper[j] => continue,
                    p => {
                        let d = c[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
                        match p {
                            Pos::Lower if d < -DUAL_TOL => (1.0, d),
                            Pos::Upper if d > DUAL_TOL => (-1.0, d),
                            Pos::Zero if d.abs() > DUAL_TOL => (-d.signum(), d),
                            _ => continue,
                        }
                    }
                };
                if bland {
                    enter = Some((j, dir.0, dir.1));
                    break;
                }
                if enter.map_or(true, |e| dir.1.abs() > e.2.abs()) {
                    enter = Some((j, dir.0, dir.1));
                }
            }
            let Some((q, dir, _)) = enter else { return Ok(Outcome::Optimal) };
            let alpha = self.ftran(&self.cols[q]);
            let flip = self.upper[q] - self.lower[q];
            let ratio = |k: usize, slack: f64| -> Option<f64> {
                let a = dir * alpha[k];
                let (l, u) = self.bounds(self.basis[k]);
                let xv = self.value(self.basis[k]);
                if a > PIVOT_TOL {
                    Some((xv - l + slack) / a)
                } else if a < -PIVOT_TOL {
                    Some((u - xv + slack) / -a)
                } else {
                    None
                }
            };
            let mut theta_max = flip;
            for k in 0..m {
                if let Some(r) = ratio(k, PRIMAL_TOL) {
                    theta_max = theta_max.min(r);
                }
            }
            if theta_max.is_infinite() {
                return Ok(Outcome::Unbounded);
            }
            let mut leave: Option<(usize, f64)> = None;
            for k in 0..m {
                if let Some(r) = ratio(k, 0.0) {
                    if r <= theta_max && leave.map_or(true, |(b, _)| alpha[k].abs() > alpha[b].abs()) {
                        leave = Some((k, r));
                    }
                }
            }
            let theta = match leave {
                Some((_, r)) if r < flip => r.max(0.0),
                _ => flip,
            };
            let is_flip = !matches!(leave, Some((_, r)) if r < flip);
            if theta <= 1e-12 {
                self.degenerate += 1;
            } else {
                self.degenerate = 0;
            }
            let step = dir * theta;
            self.x[q] += step;
            for k in 0..m {
                if alpha[k] != 0.0 {
                    let v = self.basis[k];
                    let nv = self.value(v) - step * alpha[k];
                    self.set_value(v, nv);
                }
            }
            if is_flip {
                if dir > 0.0 {
                    self.pos[q] = Pos::Upper;
                    self.x[q] = self.upper[q];
                } else {
                    self.pos[q] = Pos::Lower;
                    self.x[q] = self.lower[q];
                }
            } else {
                let (k, _) = leave.expect("leaving row");
                self.pivot(k, q, &alpha, dir * alpha[k] > 0.0);
            }
            self.iterations += 1;
            since_refactor += 1;
            if self.iterations > limit {
                return Err(OracleError::IterationLimit(limit));
            }
        }
    }

    /// Replaces the basic variable of row `k` by `q`; the leaving variable
    /// goes to its lower bound when `to_lower`.
    fn pivot(&mut self, k: usize, q: usize, alpha: &[f64], to_lower: bool) {
        let (m, n) = (self.m, self.n());
        let v = self.basis[k];
        if v >= n {
            self.art_dead[v - n] = true;
            self.xa[v - n] = 0.0;
        } else {
            let (l, u) = (self.lower[v], self.upper[v]);
            let (p, val) = if to_lower { (Pos::Lower, l) } else { (Pos::Upper, u) };
            if val.is_finite() {
                self.pos[v] = p;
                self.x[v] = val;
            } else {
                self.pos[v] = Pos::Zero;
                self.x[v] = 0.0;
            }
        }
        self.basis[k] = q;
        self.pos[q] = Pos::Basic(k);
        let piv = alpha[k];
        let row: Vec<f64> = (0..m).map(|i| self.binv[k * m + i] / piv).collect();
        for r in 0..m {
            let f = if r == k { 0.0 } else { alpha[r] };
            for i in 0..m {
                self.binv[r * m + i] = if r == k { row[i] } else { self.binv[r * m + i] - f * row[i] };
            }
        }
    }
}

fn start_position(l: f64, u: f64) -> (Pos, f64) {
    if l.is_finite() {
        (Pos::Lower, l)
    } else if u.is_finite() {
        (Pos::Upper, u)
    } else {
        (Pos::Zero, 0.0)
    }
}

pub(super) fn solve_dense(lp: &LpProblem) -> Result<OracleSolution, OracleError> {
    let (n_eq, n_in, n_x) = (lp.n_eq(), lp.n_ineq(), lp.n_cols());
    let m = n_eq + n_in;
    let mut cols = lp.columns();
    let mut lower: Vec<f64> = lp.vars.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = lp.vars.iter().map(|v| v.upper).collect();
    for i in 0..n_in {
        cols.push(vec![(n_eq + i, -1.0)]);
        lower.push(lp.ineq_lower[i]);
        upper.push(lp.ineq_upper[i]);
    }
    if let Some(j) = (0..lower.len()).find(|&j| lower[j] > upper[j]) {
        let what = if j < n_x { format!("column {}", lp.vars[j].name) } else { format!("row {}", lp.ineq_names[j - n_x]) };
        return Ok(OracleSolution::status_only(LpStatus::Infeasible(format!("{what} has crossing bounds"))));
    }
    let n = cols.len();
    let mut rhs = lp.eq_rhs.clone();
    rhs.resize(m, 0.0);
    let mut pos = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for j in 0..n {
        let (p, v) = start_position(lower[j], upper[j]);
        pos.push(p);
        x.push(v);
    }
    let mut r = rhs.clone();
    for j in 0..n {
        for &(i, a) in &cols[j] {
            r[i] -= a * x[j];
        }
    }
    let art_sign: Vec<f64> = r.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = art_sign[i];
    }
    let mut t = Tableau {
        m,
        cols,
        lower,
        upper,
        rhs,
        art_dead: vec![false; m],
        basis: (n..n + m).collect(),
        xa: r.iter().map(|v| v.abs()).collect(),
        art_sign,
        pos,
        x,
        binv,
        degenerate: 0,
        iterations: 0,
    };
    let limit = 50 * (n + m) + 1000;
    let mut c1 = vec![0.0; n + m];
    c1[n..].iter_mut().for_each(|v| *v = 1.0);
    t.iterate(&c1, limit)?;
    t.refactor()?;
    let infeas: f64 = t.xa.iter().sum();
    let scale = 1.0 + t.rhs.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if infeas > 1e-7 * scale {
        return Ok(OracleSolution::status_only(LpStatus::Infeasible(format!("phase 1 ends with infeasibility {infeas:e}"))));
    }
    drive_out_artificials(&mut t);
    t.refactor()?;
    let mut c2: Vec<f64> = lp.vars.iter().map(|v| v.cost).collect();
    c2.resize(n + m, 0.0);
    t.degenerate = 0;
    if let Outcome::Unbounded = t.iterate(&c2, limit)? {
        return Ok(OracleSolution::status_only(LpStatus::Unbounded));
    }
    t.refactor()?;
    let lu = t.basis_lu().ok_or_else(|| OracleError::Numerical("singular final basis".into()))?;
    let cb: Vec<f64> = t.basis.iter().map(|&v| c2[v]).collect();
    let y = lu.solve_transpose(&cb);
    let mut z = vec![0.0; n_x];
    for j in 0..n_x {
        z[j] = c2[j] - t.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
        if matches!(t.pos[j], Pos::Basic(_)) {
            z[j] = 0.0;
        }
    }
    let xs = t.x[..n_x].to_vec();
    let objective = lp.objective(&xs);
    Ok(OracleSolution { status: LpStatus::Optimal, x: xs, y, z, objective, iterations: t.iterations })
}

fn drive_out_artificials(t: &mut Tableau) {
    let (m, n) = (t.m, t.n());
    for k in 0..m {
        let v = t.basis[k];
        if v < n {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if matches!(t.pos[j], Pos::Basic(_)) {
                continue;
            }
            let a: f64 = t.cols[j].iter().map(|&(i, a)| t.binv[k * m + i] * a).sum();
            if a.abs() > 1e-7 && best.map_or(true, |(_, b)| a.abs() > b.abs()) {
                best = Some((j, a));
            }
        }
        match best {
            Some((j, _)) => {
                let alpha = t.ftran(&t.cols[j]);
                t.pivot(k, j, &alpha, true);
            }
            None => {
                // redundant row: the artificial stays basic, pinned at zero
                t.art_dead[v - n] = true;
                t.xa[v - n] = 0.0;
            }
        }
    }
}
