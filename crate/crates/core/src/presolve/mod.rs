//! Presolve engine: configuration, counters and the round schedule.

pub mod bounds;
pub mod cleanup;
pub mod elim;
pub mod fixation;
pub mod lindep;
pub mod parallel;
pub mod permute;
pub mod singleton;
pub mod tiny;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::comm::{Communicator, ExecMode, ReduceOp, World};
use crate::error::PresolveError;
use crate::model::{linking_counts, nnz_counts, validate_arrowhead, BlockProblem, ProblemSize};
use crate::postsolve::{PostsolveStack, Side, StackEntry};
use crate::work::RankProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Presolver {
    TinyEntries,
    ModelCleanup,
    SingletonConstr,
    SingletonVar,
    VarsFixation,
    BoundTightening,
    ParallelConstrs,
    Permutation,
    LinDependencies,
}

impl Presolver {
    pub const ALL: [Presolver; 9] = [
        Presolver::TinyEntries,
        Presolver::ModelCleanup,
        Presolver::SingletonConstr,
        Presolver::SingletonVar,
        Presolver::VarsFixation,
        Presolver::BoundTightening,
        Presolver::ParallelConstrs,
        Presolver::Permutation,
        Presolver::LinDependencies,
    ];

    /// Presolvers run in every round, in order.
    pub const ROUND: [Presolver; 7] = [
        Presolver::ModelCleanup,
        Presolver::SingletonConstr,
        Presolver::SingletonVar,
        Presolver::VarsFixation,
        Presolver::BoundTightening,
        Presolver::ParallelConstrs,
        Presolver::Permutation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Presolver::TinyEntries => "tiny-entries",
            Presolver::ModelCleanup => "model-cleanup",
            Presolver::SingletonConstr => "singleton-constr",
            Presolver::SingletonVar => "singleton-var",
            Presolver::VarsFixation => "vars-fixation",
            Presolver::BoundTightening => "bound-tightening",
            Presolver::ParallelConstrs => "parallel-constrs",
            Presolver::Permutation => "permutation",
            Presolver::LinDependencies => "lin-dependencies",
        }
    }
}

impl std::fmt::Display for Presolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Presolver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Presolver::ALL
            .into_iter()
            .find(|p| p.name().replace('-', "") == key)
            .ok_or_else(|| format!("unknown presolver '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresolveConfig {
    pub max_rounds: usize,
    pub continuation_threshold: f64,
    pub feastol: f64,
    pub tiny_entry_tol: f64,
    pub parallel_tol: f64,
    pub zero_tol: f64,
    pub pivot_threshold: f64,
    pub enabled: BTreeSet<Presolver>,
    /// Validate the arrowhead structure after every presolver (collective, slow).
    pub check_structure: bool,
}

impl Default for PresolveConfig {
    fn default() -> Self {
        Self {
            max_rounds: 10,
            continuation_threshold: 1e-4,
            feastol: 1e-6,
            tiny_entry_tol: 1e-10,
            parallel_tol: 1e-10,
            zero_tol: 1e-10,
            pivot_threshold: 0.1,
            enabled: Presolver::ALL.into_iter().collect(),
            check_structure: false,
        }
    }
}

impl PresolveConfig {
    pub fn validate(&self) -> Result<(), PresolveError> {
        let tols = [
            ("feastol", self.feastol),
            ("tiny-entry-tol", self.tiny_entry_tol),
            ("parallel-tol", self.parallel_tol),
            ("zero-pivot-tol", self.zero_tol),
            ("pivot-threshold", self.pivot_threshold),
        ];
        for (name, v) in tols {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PresolveError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.pivot_threshold > 1.0 {
            return Err(PresolveError::InvalidInput("pivot-threshold must not exceed 1".into()));
        }
        let t = self.continuation_threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(PresolveError::InvalidInput(format!("continuation threshold must lie in (0, 1), got {t}")));
        }
        Ok(())
    }

    pub fn without(mut self, p: Presolver) -> Self {
        self.enabled.remove(&p);
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub rows_deleted: usize,
    pub cols_deleted: usize,
    pub entries_deleted: usize,
    pub bounds_tightened: usize,
    pub vars_fixed: usize,
    pub rows_moved: usize,
    pub cols_moved: usize,
}

impl Tally {
    fn to_array(self) -> [usize; 7] {
        [
            self.rows_deleted,
            self.cols_deleted,
            self.entries_deleted,
            self.bounds_tightened,
            self.vars_fixed,
            self.rows_moved,
            self.cols_moved,
        ]
    }

    fn from_array(a: &[usize]) -> Self {
        Tally {
            rows_deleted: a[0],
            cols_deleted: a[1],
            entries_deleted: a[2],
            bounds_tightened: a[3],
            vars_fixed: a[4],
            rows_moved: a[5],
            cols_moved: a[6],
        }
    }

    pub fn add(&mut self, o: &Tally) {
        let s: Vec<usize> = self.to_array().iter().zip(o.to_array()).map(|(a, b)| a + b).collect();
        *self = Tally::from_array(&s);
    }

    /// Rows, columns and entries removed plus bounds tightened.
    pub fn reductions(&self) -> usize {
        self.rows_deleted + self.cols_deleted + self.entries_deleted + self.bounds_tightened
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionCounters {
    pub per_presolver: BTreeMap<Presolver, Tally>,
    pub seconds: BTreeMap<Presolver, f64>,
    pub rounds: usize,
}

impl ReductionCounters {
    pub fn total(&self) -> Tally {
        let mut t = Tally::default();
        for v in self.per_presolver.values() {
            t.add(v);
        }
        t
    }
}

/// Result of the structure check run after one presolver call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureCheck {
    pub presolver: Presolver,
    pub round: usize,
    pub violations: Vec<String>,
    pub link_rows: usize,
    pub link_cols: usize,
    /// Linking row or column count grew relative to the previous check.
    pub grew: bool,
}

/// Everything one rank produces.
#[derive(Clone, Debug)]
pub struct RankOutput {
    pub reduced: BlockProblem,
    pub stack: PostsolveStack,
    pub counters: ReductionCounters,
    pub checks: Vec<StructureCheck>,
    pub original_size: ProblemSize,
    pub reduced_size: ProblemSize,
}

/// True iff the previous round's reductions reach `threshold * size` and the
/// round limit is not exhausted. The tie counts as enough.
pub fn should_continue(reductions: usize, size: usize, round: usize, cfg: &PresolveConfig) -> bool {
    reductions > 0 && reductions as f64 >= cfg.continuation_threshold * size as f64 && round < cfg.max_rounds
}

struct Engine<'a> {
    w: RankProblem,
    cfg: &'a PresolveConfig,
    comm: &'a Communicator,
    entries: Vec<StackEntry>,
    counters: ReductionCounters,
    checks: Vec<StructureCheck>,
    seq: u64,
    link: (usize, usize),
    round: usize,
}

impl Engine<'_> {
    fn call(&mut self, p: Presolver) -> Result<(), PresolveError> {
        if !self.cfg.enabled.contains(&p) {
            return Ok(());
        }
        let start = Instant::now();
        let (w, cfg, comm) = (&mut self.w, self.cfg, self.comm);
        match p {
            Presolver::TinyEntries => tiny::run(w, cfg),
            Presolver::ModelCleanup => cleanup::run(w, cfg),
            Presolver::SingletonConstr => singleton::rows(w, cfg),
            Presolver::SingletonVar => singleton::cols(w, cfg),
            Presolver::VarsFixation => fixation::run(w, cfg),
            Presolver::BoundTightening => bounds::run(w, cfg),
            Presolver::ParallelConstrs => {
                parallel::run_local(w, cfg);
                w.sync_linking(comm);
                parallel::run_linking(w, cfg, comm);
            }
            Presolver::Permutation => permute::run(w, comm),
            Presolver::LinDependencies => lindep::run(w, cfg, comm),
        }
        self.boundary(p)?;
        *self.counters.seconds.entry(p).or_default() += start.elapsed().as_secs_f64();
        Ok(())
    }

    fn boundary(&mut self, p: Presolver) -> Result<(), PresolveError> {
        let cands = self.comm.allgather(std::mem::take(&mut self.w.bound_cands));
        apply_bound_candidates(&mut self.w, cands, self.cfg);
        self.w.sync_linking(self.comm);
        let statuses = self.comm.allgather_one(self.w.status.clone());
        if let Some(err) = statuses.into_iter().flatten().next() {
            return Err(match err {
                PresolveError::Infeasible(m) => PresolveError::Infeasible(format!("{p}: {m}")),
                PresolveError::Unbounded(m) => PresolveError::Unbounded(format!("{p}: {m}")),
                other => other,
            });
        }
        self.seq += 1;
        let layout = (self.seq << 8) | p as u64;
        self.entries.append(&mut self.w.local_stack);
        self.entries.push(StackEntry::SyncEvent { layout });
        self.entries.append(&mut self.w.global_stack);
        self.entries.push(StackEntry::SyncEvent { layout });
        let tally = std::mem::take(&mut self.w.tally);
        let sum = self.comm.allreduce(&tally.to_array(), &ReduceOp::<usize>::sum());
        self.counters.per_presolver.entry(p).or_default().add(&Tally::from_array(&sum));
        if self.cfg.check_structure {
            let bp = self.w.to_block_problem();
            let violations = validate_arrowhead(&bp, self.comm);
            let link = linking_counts(&bp, self.comm);
            let grew = link.0 > self.link.0 || link.1 > self.link.1;
            self.link = link;
            self.checks.push(StructureCheck {
                presolver: p,
                round: self.round,
                violations,
                link_rows: link.0,
                link_cols: link.1,
                grew,
            });
        }
        Ok(())
    }

    fn size(&self) -> usize {
        let s = nnz_counts(&self.w.to_block_problem(), self.comm);
        s.rows + s.cols + s.nnz
    }
}

/// Reduces the candidate bounds of linking columns gathered from all ranks:
/// the largest lower and smallest upper bound win, ties going to the lowest
/// rank.
fn apply_bound_candidates(w: &mut RankProblem, all: Vec<crate::work::BoundCandidate>, cfg: &PresolveConfig) {
    let mut best: BTreeMap<(usize, Side), crate::work::BoundCandidate> = BTreeMap::new();
    for c in all {
        if !w.col_alive(c.col) {
            continue;
        }
        match best.get(&(c.col, c.side)) {
            Some(b) if !(match c.side {
                Side::Lower => c.value > b.value,
                Side::Upper => c.value < b.value,
            }) => {}
            _ => {
                best.insert((c.col, c.side), c);
            }
        }
    }
    for ((j, side), c) in best {
        let col = w.col(j);
        let (l, u) = (col.lower, col.upper);
        let (old, mut nl, mut nu) = match side {
            Side::Lower if c.value > l => (l, c.value, u),
            Side::Upper if c.value < u => (u, l, c.value),
            _ => continue,
        };
        if nl > nu {
            let other = if side == Side::Lower { nu } else { nl };
            if (nl - nu) > cfg.feastol * other.abs().max(1.0) {
                let msg = format!("bounds of column {} cross after tightening: [{nl}, {nu}]", col.name);
                w.fail(PresolveError::Infeasible(msg));
                return;
            }
            if side == Side::Lower {
                nl = nu;
            } else {
                nu = nl;
            }
        }
        let new = if side == Side::Lower { nl } else { nu };
        w.set_bounds(j, nl, nu);
        if w.counts_replicated() {
            w.tally.bounds_tightened += 1;
        }
        if let Some(Some(row)) = w.rows.get_mut(c.row) {
            row.dual_locked = true;
        }
        w.push_global(StackEntry::BoundTightened { col: j, side, old, new, row: c.row, coef: c.coef });
    }
}

/// Presolves this rank's slice. Collective: every rank of `comm` must call it
/// with its slice of the same problem.
pub fn run_presolve(slice: &BlockProblem, cfg: &PresolveConfig, comm: &Communicator) -> Result<RankOutput, PresolveError> {
    cfg.validate()?;
    let original_size = nnz_counts(slice, comm);
    let w = RankProblem::from_slice(slice, comm);
    let mut e = Engine {
        w,
        cfg,
        comm,
        entries: Vec::new(),
        counters: ReductionCounters::default(),
        checks: Vec::new(),
        seq: 0,
        link: (usize::MAX, usize::MAX),
        round: 0,
    };
    if cfg.check_structure {
        e.link = linking_counts(slice, comm);
    }
    e.call(Presolver::TinyEntries)?;
    loop {
        let size = e.size();
        let before = e.counters.total().reductions();
        e.round += 1;
        for p in Presolver::ROUND {
            e.call(p)?;
        }
        let done = e.counters.total().reductions() - before;
        log::debug!("round {}: {done} reductions on size {size}", e.round);
        if !should_continue(done, size, e.round, cfg) {
            break;
        }
    }
    e.counters.rounds = e.round;
    e.call(Presolver::LinDependencies)?;
    let w = &e.w;
    let mut stack = PostsolveStack {
        rank: w.rank,
        nranks: w.nranks,
        n_blocks: w.n_blocks,
        ids: w.ids,
        entries: e.entries,
        row_scope: w.rows.iter().map(|r| r.as_ref().map(|r| r.scope)).collect(),
        row_alive: w.rows.iter().map(|r| r.as_ref().is_some_and(|r| r.alive)).collect(),
        col_block: w.cols.iter().map(|c| c.as_ref().map(|c| c.block)).collect(),
        col_alive: w.cols.iter().map(|c| c.as_ref().is_some_and(|c| c.alive)).collect(),
        costs: w.cols.iter().map(|c| c.as_ref().map_or(0.0, |c| c.cost)).collect(),
    };
    stack.entries.shrink_to_fit();
    let reduced = w.to_block_problem();
    let reduced_size = nnz_counts(&reduced, comm);
    Ok(RankOutput { reduced, stack, counters: e.counters, checks: e.checks, original_size, reduced_size })
}

/// Gathered result of a distributed presolve run.
#[derive(Clone, Debug)]
pub struct PresolveResult {
    pub reduced: BlockProblem,
    pub stacks: Vec<PostsolveStack>,
    pub counters: ReductionCounters,
    pub checks: Vec<StructureCheck>,
    pub original_size: ProblemSize,
    pub reduced_size: ProblemSize,
}

/// Splits `p` over `nranks` simulated ranks, presolves, and gathers the result.
pub fn presolve(p: &BlockProblem, nranks: usize, mode: ExecMode, cfg: &PresolveConfig) -> Result<PresolveResult, PresolveError> {
    if nranks == 0 || nranks > p.n_blocks.max(1) {
        return Err(PresolveError::InvalidInput(format!("rank count {nranks} must be in 1..={}", p.n_blocks.max(1))));
    }
    let slices = p.split_for_ranks(nranks);
    let outs = World::new(nranks, mode).run(|comm| run_presolve(&slices[comm.rank()], cfg, comm))?;
    let outs: Vec<RankOutput> = outs.into_iter().collect::<Result<_, _>>()?;
    let reduced = BlockProblem::gather(&outs.iter().map(|o| o.reduced.clone()).collect::<Vec<_>>());
    let first = &outs[0];
    Ok(PresolveResult {
        reduced,
        counters: first.counters.clone(),
        checks: first.checks.clone(),
        original_size: first.original_size,
        reduced_size: first.reduced_size,
        stacks: outs.into_iter().map(|o| o.stack).collect(),
    })
}
