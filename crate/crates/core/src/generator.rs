//! Seeded synthetic arrowhead LPs with planted redundancies.
//!
//! An interior point `x*` is drawn first; every row is built to hold at
//! `x*`, so instances are feasible. Columns with an infinite upper bound get
//! a nonnegative cost and all lower bounds are finite, so they are bounded.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{BlockAssignment, BlockProblem, LpProblem, RowOwner, SparseMatrix, VarData, INF};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSpec {
    pub seed: u64,
    pub n_blocks: usize,
    pub rows_per_block: usize,
    pub cols_per_block: usize,
    pub linking_rows: usize,
    pub linking_cols: usize,
    /// Rows over linking columns only.
    pub zero_rows: usize,
    /// Expected share of a block's columns in one of its rows.
    pub density: f64,
    pub eq_fraction: f64,
    /// Probability that a local row also touches linking columns.
    pub link_touch: f64,
    pub duplicate_fraction: f64,
    pub singleton_fraction: f64,
    pub empty_fraction: f64,
    pub fixed_fraction: f64,
    pub dependent_fraction: f64,
    pub misplaced_fraction: f64,
    /// Bound widths are drawn from `[1, bound_range]`.
    pub bound_range: f64,
    /// Share of columns without an upper bound.
    pub unbounded_fraction: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_blocks: 4,
            rows_per_block: 10,
            cols_per_block: 12,
            linking_rows: 3,
            linking_cols: 4,
            zero_rows: 1,
            density: 0.3,
            eq_fraction: 0.4,
            link_touch: 0.3,
            duplicate_fraction: 0.0,
            singleton_fraction: 0.0,
            empty_fraction: 0.0,
            fixed_fraction: 0.0,
            dependent_fraction: 0.0,
            misplaced_fraction: 0.0,
            bound_range: 10.0,
            unbounded_fraction: 0.1,
        }
    }
}

impl GenSpec {
    /// The planted mix used by the efficacy checks.
    pub fn planted(seed: u64, n_blocks: usize) -> Self {
        Self {
            seed,
            n_blocks,
            duplicate_fraction: 0.10,
            singleton_fraction: 0.10,
            fixed_fraction: 0.05,
            empty_fraction: 0.05,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let fr = [
            ("density", self.density),
            ("eq-fraction", self.eq_fraction),
            ("link-touch", self.link_touch),
            ("duplicate-fraction", self.duplicate_fraction),
            ("singleton-fraction", self.singleton_fraction),
            ("empty-fraction", self.empty_fraction),
            ("fixed-fraction", self.fixed_fraction),
            ("dependent-fraction", self.dependent_fraction),
            ("misplaced-fraction", self.misplaced_fraction),
            ("unbounded-fraction", self.unbounded_fraction),
        ];
        for (name, v) in fr {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.n_blocks == 0 || self.cols_per_block < 2 {
            return Err("need at least one block with two columns".into());
        }
        if self.bound_range < 1.0 {
            return Err("bound-range must be at least 1".into());
        }
        Ok(())
    }
}

/// Planted reductions by row and column name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// `(original, copy)` with the copy a scaled duplicate.
    pub duplicates: Vec<(String, String)>,
    pub singleton_rows: Vec<String>,
    pub empty_cols: Vec<String>,
    pub fixed_cols: Vec<String>,
    /// `(row, sources)` with the row a combination of its sources.
    pub dependent_rows: Vec<(String, Vec<String>)>,
    /// Linking rows touching a single block.
    pub misplaced_rows: Vec<String>,
    /// Linking columns touching a single block.
    pub misplaced_cols: Vec<String>,
    /// Nonzeros in planted rows plus those of fixed columns.
    pub planted_nnz: usize,
}

impl Manifest {
    pub fn planted_rows(&self) -> usize {
        self.duplicates.len() + self.singleton_rows.len() + self.dependent_rows.len()
    }

    pub fn planted_cols(&self) -> usize {
        self.empty_cols.len() + self.fixed_cols.len()
    }
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub lp: LpProblem,
    pub assignment: BlockAssignment,
    pub manifest: Manifest,
    pub x_star: Vec<f64>,
}

impl Generated {
    pub fn block_problem(&self) -> BlockProblem {
        BlockProblem::split(&self.lp, &self.assignment).expect("generated assignment is valid")
    }
}

struct RowDraft {
    name: String,
    owner: RowOwner,
    entries: Vec<(usize, f64)>,
    eq: bool,
    lower: f64,
    upper: f64,
}

struct Builder<'a> {
    spec: &'a GenSpec,
    rng: ChaCha8Rng,
    vars: Vec<VarData>,
    col_block: Vec<usize>,
    x: Vec<f64>,
    rows: Vec<RowDraft>,
}

impl Builder<'_> {
    fn coef(&mut self) -> f64 {
        let v = self.rng.gen_range(1..=16) as f64 / 4.0;
        if self.rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    }

    fn add_col(&mut self, name: String, block: usize) -> usize {
        let half = (self.spec.bound_range / 2.0).max(1.0);
        let lower = -self.rng.gen_range(0.0..half).round();
        let width = self.rng.gen_range(1.0..=self.spec.bound_range).round().max(1.0);
        let unbounded = self.rng.gen_bool(self.spec.unbounded_fraction);
        let upper = if unbounded { INF } else { lower + width };
        let x = lower + self.rng.gen_range(0.1..0.9) * width;
        let mut cost = (self.rng.gen_range(-10..=10) as f64) / 2.0;
        if unbounded {
            cost = cost.abs();
        }
        self.vars.push(VarData::new(name, lower, upper, cost));
        self.col_block.push(block);
        self.x.push(x);
        self.vars.len() - 1
    }

    fn cols_of(&self, block: usize) -> Vec<usize> {
        (0..self.col_block.len()).filter(|&j| self.col_block[j] == block).collect()
    }

    fn pick(&mut self, from: &[usize], k: usize) -> Vec<usize> {
        let mut v: Vec<usize> = from.choose_multiple(&mut self.rng, k.min(from.len())).copied().collect();
        v.sort_unstable();
        v
    }

    fn push_row(&mut self, name: String, owner: RowOwner, cols: &[usize]) -> usize {
        let entries = cols.iter().map(|&j| (j, self.coef())).collect();
        self.rows.push(RowDraft { name, owner, entries, eq: false, lower: 0.0, upper: 0.0 });
        self.rows.len() - 1
    }

    fn activity(&self, entries: &[(usize, f64)]) -> f64 {
        entries.iter().map(|&(j, a)| a * self.x[j]).sum()
    }

    /// Bounds holding at `x*` with random slack; at most one side infinite.
    fn slack_bounds(&mut self, act: f64) -> (f64, f64) {
        let mut lo = act - self.rng.gen_range(0.5..3.0);
        let mut hi = act + self.rng.gen_range(0.5..3.0);
        match self.rng.gen_range(0..5) {
            0 => lo = -INF,
            1 => hi = INF,
            _ => {}
        }
        (lo, hi)
    }

    fn set_bounds(&mut self, r: usize, eq: bool) {
        let act = self.activity(&self.rows[r].entries);
        let (lo, hi) = if eq { (act, act) } else { self.slack_bounds(act) };
        let row = &mut self.rows[r];
        row.eq = eq;
        row.lower = lo;
        row.upper = hi;
    }
}

fn count(frac: f64, base: usize) -> usize {
    (frac * base as f64).round() as usize
}

pub fn generate(spec: &GenSpec) -> Result<Generated, String> {
    spec.validate()?;
    let mut g = Builder { spec, rng: ChaCha8Rng::seed_from_u64(spec.seed), vars: Vec::new(), col_block: Vec::new(), x: Vec::new(), rows: Vec::new() };
    let nb = spec.n_blocks;
    let base_rows = nb * spec.rows_per_block + spec.linking_rows + spec.zero_rows;
    let base_cols = spec.linking_cols + nb * spec.cols_per_block;
    let mut m = Manifest::default();

    for k in 0..spec.linking_cols {
        g.add_col(format!("x0_{k}"), 0);
    }
    for b in 1..=nb {
        for k in 0..spec.cols_per_block {
            g.add_col(format!("x{b}_{k}"), b);
        }
    }
    let x0 = g.cols_of(0);
    let per_row = ((spec.density * spec.cols_per_block as f64).round() as usize).clamp(2, spec.cols_per_block);
    let mut local_rows: Vec<Vec<usize>> = vec![Vec::new(); nb + 1];
    for b in 1..=nb {
        let own = g.cols_of(b);
        for k in 0..spec.rows_per_block {
            let mut cols = g.pick(&own, per_row);
            if !x0.is_empty() && g.rng.gen_bool(spec.link_touch) {
                let n = g.rng.gen_range(1..=2);
                cols.extend(g.pick(&x0, n));
            }
            let r = g.push_row(format!("b{b}_r{k}"), RowOwner::Block(b), &cols);
            local_rows[b].push(r);
        }
    }
    // every linking column couples at least two blocks when there are two
    for &j in &x0 {
        let blocks: Vec<usize> = (1..=nb).collect();
        for b in g.pick(&blocks, 2) {
            if local_rows[b].is_empty() {
                continue;
            }
            let r = local_rows[b][g.rng.gen_range(0..local_rows[b].len())];
            if !g.rows[r].entries.iter().any(|e| e.0 == j) {
                let a = g.coef();
                g.rows[r].entries.push((j, a));
            }
        }
    }
    if x0.len() >= 2 {
        for k in 0..spec.zero_rows {
            let n = g.rng.gen_range(2..=3);
            let cols = g.pick(&x0, n);
            g.push_row(format!("z_r{k}"), RowOwner::Block(0), &cols);
        }
    }
    let blocks: Vec<usize> = (1..=nb).collect();
    for k in 0..spec.linking_rows {
        let nblk = if nb >= 2 { g.rng.gen_range(2..=nb.min(3)) } else { 1 };
        let mut cols = Vec::new();
        for b in g.pick(&blocks, nblk) {
            let own = g.cols_of(b);
            let n = g.rng.gen_range(1..=2);
            cols.extend(g.pick(&own, n));
        }
        if !x0.is_empty() && g.rng.gen_bool(0.5) {
            cols.extend(g.pick(&x0, 1));
        }
        cols.sort_unstable();
        g.push_row(format!("l_r{k}"), RowOwner::Link, &cols);
    }
    for k in 0..count(spec.misplaced_fraction, base_rows) {
        let b = g.rng.gen_range(1..=nb);
        let own = g.cols_of(b);
        let n = g.rng.gen_range(1..=3);
        let mut cols = g.pick(&own, n);
        if !x0.is_empty() && g.rng.gen_bool(0.5) {
            cols.extend(g.pick(&x0, 1));
        }
        cols.sort_unstable();
        g.push_row(format!("mis_r{k}"), RowOwner::Link, &cols);
        m.misplaced_rows.push(format!("mis_r{k}"));
    }
    for k in 0..count(spec.misplaced_fraction, base_cols) {
        let b = g.rng.gen_range(1..=nb);
        let name = format!("mis_x{k}");
        let j = g.add_col(name.clone(), 0);
        let n = g.rng.gen_range(1..=2);
        let rows = g.pick(&local_rows[b].clone(), n);
        for r in rows {
            let a = g.coef();
            g.rows[r].entries.push((j, a));
        }
        m.misplaced_cols.push(name);
    }
    for r in 0..g.rows.len() {
        g.rows[r].entries.sort_by_key(|e| e.0);
        let eq = g.rng.gen_bool(spec.eq_fraction);
        g.set_bounds(r, eq);
    }
    plant(&mut g, &mut m, &local_rows, base_rows, base_cols);
    Ok(finish(g, m, spec))
}

fn plant(g: &mut Builder<'_>, m: &mut Manifest, local_rows: &[Vec<usize>], base_rows: usize, base_cols: usize) {
    let spec = g.spec;
    let nb = spec.n_blocks;
    let base: Vec<usize> = (0..g.rows.len()).collect();
    for k in 0..count(spec.dependent_fraction, base_rows) {
        let b = g.rng.gen_range(1..=nb);
        let eqs: Vec<usize> = local_rows[b].iter().copied().filter(|&r| g.rows[r].eq).collect();
        if eqs.len() < 2 {
            continue;
        }
        let src = g.pick(&eqs, 2);
        let w = [g.coef(), g.coef()];
        let mut acc: std::collections::BTreeMap<usize, f64> = Default::default();
        let mut rhs = 0.0;
        for (&r, &wr) in src.iter().zip(&w) {
            rhs += wr * g.rows[r].lower;
            for &(j, a) in &g.rows[r].entries {
                *acc.entry(j).or_default() += wr * a;
            }
        }
        let entries: Vec<(usize, f64)> = acc.into_iter().filter(|e| e.1 != 0.0).collect();
        if entries.len() < 2 {
            continue;
        }
        let name = format!("dep_r{k}");
        m.dependent_rows.push((name.clone(), src.iter().map(|&r| g.rows[r].name.clone()).collect()));
        g.rows.push(RowDraft { name, owner: RowOwner::Block(b), entries, eq: true, lower: rhs, upper: rhs });
    }
    for k in 0..count(spec.duplicate_fraction, base_rows) {
        let r = base[g.rng.gen_range(0..base.len())];
        let lambda = *[-2.0, -0.5, 0.5, 2.0, 3.0].choose(&mut g.rng).expect("nonempty");
        let entries: Vec<(usize, f64)> = g.rows[r].entries.iter().map(|&(j, a)| (j, lambda * a)).collect();
        let (owner, eq, lo, hi) = (g.rows[r].owner, g.rows[r].eq, g.rows[r].lower, g.rows[r].upper);
        let (lower, upper) = if eq {
            (lambda * lo, lambda * hi)
        } else {
            let act = g.activity(&entries);
            g.slack_bounds(act)
        };
        let name = format!("dup_r{k}");
        m.duplicates.push((g.rows[r].name.clone(), name.clone()));
        g.rows.push(RowDraft { name, owner, entries, eq, lower, upper });
    }
    for k in 0..count(spec.singleton_fraction, base_rows) {
        let b = g.rng.gen_range(1..=nb);
        let own = g.cols_of(b);
        let j = own[g.rng.gen_range(0..own.len())];
        let a = g.coef();
        let act = a * g.x[j];
        let (lower, upper) = g.slack_bounds(act);
        let name = format!("sgl_r{k}");
        m.singleton_rows.push(name.clone());
        g.rows.push(RowDraft { name, owner: RowOwner::Block(b), entries: vec![(j, a)], eq: false, lower, upper });
    }
    let used: Vec<usize> = {
        let mut u: Vec<usize> = g.rows.iter().flat_map(|r| r.entries.iter().map(|e| e.0)).collect();
        u.sort_unstable();
        u.dedup();
        u
    };
    let nfix = count(spec.fixed_fraction, base_cols);
    for j in g.pick(&used, nfix) {
        let v = g.x[j];
        g.vars[j].lower = v;
        g.vars[j].upper = v;
        m.fixed_cols.push(g.vars[j].name.clone());
    }
    for k in 0..count(spec.empty_fraction, base_cols) {
        let b = g.rng.gen_range(1..=nb);
        let name = format!("empty_x{k}");
        g.add_col(name.clone(), b);
        m.empty_cols.push(name);
    }
}

fn finish(g: Builder<'_>, mut m: Manifest, spec: &GenSpec) -> Generated {
    let ncols = g.vars.len();
    let mut lp = LpProblem { name: format!("gen_s{}_n{}", spec.seed, spec.n_blocks), vars: g.vars, ..Default::default() };
    let mut asg = BlockAssignment { n_blocks: spec.n_blocks, cols: g.col_block, ..Default::default() };
    let mut eq_rows = Vec::new();
    let mut ineq_rows = Vec::new();
    for r in &g.rows {
        if r.eq {
            eq_rows.push(r.entries.clone());
            lp.eq_rhs.push(r.lower);
            lp.eq_names.push(r.name.clone());
            asg.eq_rows.push(r.owner);
        } else {
            ineq_rows.push(r.entries.clone());
            lp.ineq_lower.push(r.lower);
            lp.ineq_upper.push(r.upper);
            lp.ineq_names.push(r.name.clone());
            asg.ineq_rows.push(r.owner);
        }
    }
    lp.eq = SparseMatrix::from_rows(ncols, eq_rows);
    lp.ineq = SparseMatrix::from_rows(ncols, ineq_rows);
    let planted: std::collections::BTreeSet<&str> = m
        .duplicates
        .iter()
        .map(|d| d.1.as_str())
        .chain(m.singleton_rows.iter().map(String::as_str))
        .chain(m.dependent_rows.iter().map(|d| d.0.as_str()))
        .collect();
    let fixed: std::collections::BTreeSet<usize> =
        (0..ncols).filter(|&j| m.fixed_cols.contains(&lp.vars[j].name)).collect();
    let mut nnz = 0;
    for r in &g.rows {
        let whole = planted.contains(r.name.as_str());
        nnz += r.entries.iter().filter(|e| whole || fixed.contains(&e.0)).count();
    }
    m.planted_nnz = nnz;
    Generated { lp, assignment: asg, manifest: m, x_star: g.x }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::local_violations;

    #[test]
    fn deterministic_for_a_seed() {
        let spec = GenSpec::planted(7, 3);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.lp, b.lp);
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn x_star_is_feasible_and_structure_valid() {
        for seed in 0..20 {
            let g = generate(&GenSpec { dependent_fraction: 0.05, misplaced_fraction: 0.05, ..GenSpec::planted(seed, 1 + seed as usize % 5) }).unwrap();
            assert!(g.lp.check().is_empty());
            let p = g.block_problem();
            assert!(local_violations(&p).is_empty(), "{:?}", local_violations(&p));
            for (i, a) in g.lp.eq.mul_vec(&g.x_star).iter().enumerate() {
                assert!((a - g.lp.eq_rhs[i]).abs() < 1e-9);
            }
            for (i, a) in g.lp.ineq.mul_vec(&g.x_star).iter().enumerate() {
                assert!(*a >= g.lp.ineq_lower[i] - 1e-9 && *a <= g.lp.ineq_upper[i] + 1e-9);
            }
            for (v, x) in g.lp.vars.iter().zip(&g.x_star) {
                assert!(*x >= v.lower - 1e-12 && *x <= v.upper + 1e-12);
            }
        }
    }

    #[test]
    fn zero_fractions_plant_nothing() {
        let g = generate(&GenSpec::default()).unwrap();
        assert_eq!(g.manifest, Manifest::default());
    }
}
