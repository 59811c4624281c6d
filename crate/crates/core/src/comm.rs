//! In-process simulation of a message-passing world.
//!
//! Each rank runs on its own thread and talks to the others only through
//! blocking collectives. In [`ExecMode::Lockstep`] the ranks hand a baton
//! around so that exactly one of them executes at any time, in rank order;
//! in [`ExecMode::Threaded`] they run concurrently. Either way every rank
//! folds gathered contributions in rank order unless the caller opts into
//! arrival-order folding for an operation flagged commutative.

use std::any::Any;
use std::cell::Cell;
use std::panic::{self, AssertUnwindSafe};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    #[default]
    Lockstep,
    Threaded,
}

impl std::str::FromStr for ExecMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lockstep" => Ok(ExecMode::Lockstep),
            "threaded" => Ok(ExecMode::Threaded),
            other => Err(format!("unknown execution mode `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FoldOrder {
    #[default]
    RankOrder,
    /// Fold in arrival order; only honored for commutative operations.
    Arrival,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("protocol fault: {detail}")]
pub struct ProtocolFault {
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CallKind {
    Allreduce,
    Allgather,
    Barrier,
}

type Payload = Arc<dyn Any + Send + Sync>;

struct Contribution {
    kind: CallKind,
    len: usize,
    payload: Payload,
}

struct Round {
    payloads: Vec<Payload>,
    arrivals: Vec<usize>,
}

struct State {
    generation: u64,
    slots: Vec<Option<Contribution>>,
    arrivals: Vec<usize>,
    completed: Option<Arc<Round>>,
    finished: Vec<bool>,
    turn: usize,
    fault: Option<ProtocolFault>,
}

struct Shared {
    size: usize,
    mode: ExecMode,
    fold: FoldOrder,
    state: Mutex<State>,
    cv: Condvar,
}

/// Unwind payload used to abort a rank after a fault was recorded.
struct Abort;

pub struct ReduceOp<T> {
    pub name: &'static str,
    identity: T,
    commutative: bool,
    combine: Arc<dyn Fn(&T, &T) -> T + Send + Sync>,
}

impl<T: Clone> ReduceOp<T> {
    pub fn new(
        name: &'static str,
        identity: T,
        commutative: bool,
        combine: impl Fn(&T, &T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self { name, identity, commutative, combine: Arc::new(combine) }
    }

    pub fn identity(&self) -> &T {
        &self.identity
    }

    pub fn is_commutative(&self) -> bool {
        self.commutative
    }

    pub fn apply(&self, a: &T, b: &T) -> T {
        (self.combine)(a, b)
    }
}

impl ReduceOp<f64> {
    /// Floating-point sum. Not associative, so always folded in rank order.
    pub fn sum() -> Self {
        Self::new("sum", 0.0, false, |a, b| a + b)
    }
    pub fn min() -> Self {
        Self::new("min", f64::INFINITY, true, |a, b| a.min(*b))
    }
    pub fn max() -> Self {
        Self::new("max", f64::NEG_INFINITY, true, |a, b| a.max(*b))
    }
}

impl ReduceOp<u64> {
    pub fn wrapping_sum() -> Self {
        Self::new("wrapping_sum", 0, true, |a, b| a.wrapping_add(*b))
    }
}

impl ReduceOp<usize> {
    pub fn sum() -> Self {
        Self::new("sum", 0, true, |a, b| a + b)
    }
    pub fn max() -> Self {
        Self::new("max", 0, true, |a, b| *a.max(b))
    }
}

impl ReduceOp<i64> {
    pub fn sum() -> Self {
        Self::new("sum", 0, true, |a, b| a + b)
    }
}

impl ReduceOp<bool> {
    pub fn and() -> Self {
        Self::new("and", true, true, |a, b| *a && *b)
    }
    pub fn or() -> Self {
        Self::new("or", false, true, |a, b| *a || *b)
    }
}

/// A fixed-size group of ranks.
#[derive(Clone, Copy, Debug)]
pub struct World {
    pub size: usize,
    pub mode: ExecMode,
    pub fold: FoldOrder,
}

impl World {
    pub fn new(size: usize, mode: ExecMode) -> Self {
        assert!(size >= 1, "a world needs at least one rank");
        Self { size, mode, fold: FoldOrder::RankOrder }
    }

    pub fn with_fold_order(mut self, fold: FoldOrder) -> Self {
        self.fold = fold;
        self
    }

    /// Runs `f` once per rank and returns the per-rank results in rank order.
    pub fn run<R, F>(&self, f: F) -> Result<Vec<R>, ProtocolFault>
    where
        R: Send,
        F: Fn(&Communicator) -> R + Sync,
    {
        let shared = Arc::new(Shared {
            size: self.size,
            mode: self.mode,
            fold: self.fold,
            state: Mutex::new(State {
                generation: 0,
                slots: (0..self.size).map(|_| None).collect(),
                arrivals: Vec::new(),
                completed: None,
                finished: vec![false; self.size],
                turn: 0,
                fault: None,
            }),
            cv: Condvar::new(),
        });
        let f = &f;
        let results: Vec<Option<R>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..self.size)
                .map(|rank| {
                    let shared = Arc::clone(&shared);
                    std::thread::Builder::new()
                        .name(format!("rank-{rank}"))
                        .stack_size(16 << 20)
                        .spawn_scoped(scope, move || {
                            let comm = Communicator { rank, shared, calls: Cell::new(0) };
                            let out = panic::catch_unwind(AssertUnwindSafe(|| {
                                comm.wait_for_start();
                                f(&comm)
                            }));
                            match out {
                                Ok(v) => {
                                    comm.finish();
                                    Some(v)
                                }
                                Err(p) => {
                                    if !p.is::<Abort>() {
                                        comm.record_panic(p);
                                    }
                                    None
                                }
                            }
                        })
                        .expect("failed to spawn rank thread")
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap_or(None)).collect()
        });
        let st = shared.state.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(fault) = &st.fault {
            return Err(fault.clone());
        }
        drop(st);
        Ok(results.into_iter().map(|r| r.expect("rank produced no result")).collect())
    }
}

/// Per-rank handle to the world. Not shareable between ranks.
pub struct Communicator {
    rank: usize,
    shared: Arc<Shared>,
    calls: Cell<u64>,
}

impl Communicator {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.shared.size
    }

    pub fn mode(&self) -> ExecMode {
        self.shared.mode
    }

    /// Number of collectives this rank has entered so far.
    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.shared.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn lockstep(&self) -> bool {
        self.shared.mode == ExecMode::Lockstep
    }

    fn abort(&self, guard: MutexGuard<'_, State>) -> ! {
        drop(guard);
        panic::resume_unwind(Box::new(Abort))
    }

    fn fail(&self, mut guard: MutexGuard<'_, State>, detail: String) -> ! {
        if guard.fault.is_none() {
            guard.fault = Some(ProtocolFault { detail });
        }
        self.shared.cv.notify_all();
        self.abort(guard)
    }

    fn wait_for_start(&self) {
        let mut st = self.lock();
        while self.lockstep() && st.turn != self.rank && st.fault.is_none() {
            st = self.shared.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        if st.fault.is_some() {
            self.abort(st);
        }
    }

    fn finish(&self) {
        let mut st = self.lock();
        if st.fault.is_some() {
            return;
        }
        st.finished[self.rank] = true;
        if !st.arrivals.is_empty() {
            let waiting = st.arrivals.clone();
            st.fault = Some(ProtocolFault {
                detail: format!(
                    "rank {} exited while collective #{} was pending on ranks {:?}",
                    self.rank, st.generation, waiting
                ),
            });
        }
        if self.lockstep() {
            st.turn = self.rank + 1;
        }
        self.shared.cv.notify_all();
    }

    fn record_panic(&self, payload: Box<dyn Any + Send>) {
        let msg = if let Some(s) = payload.downcast_ref::<&str>() {
            (*s).to_string()
        } else if let Some(s) = payload.downcast_ref::<String>() {
            s.clone()
        } else {
            "non-string panic payload".to_string()
        };
        let mut st = self.lock();
        if st.fault.is_none() {
            st.fault = Some(ProtocolFault { detail: format!("rank {} panicked: {msg}", self.rank) });
        }
        self.shared.cv.notify_all();
    }

    fn enter(&self, kind: CallKind, len: usize, payload: Payload) -> Arc<Round> {
        let size = self.shared.size;
        let idx = self.calls.get();
        self.calls.set(idx + 1);
        let mut st = self.lock();
        if st.fault.is_some() {
            self.abort(st);
        }
        debug_assert_eq!(st.generation, idx, "rank {} out of step", self.rank);
        if let Some(r) = st.finished.iter().position(|&f| f) {
            let detail = format!(
                "rank {} entered collective #{idx} ({kind:?}) but rank {r} has already exited",
                self.rank
            );
            self.fail(st, detail);
        }
        st.slots[self.rank] = Some(Contribution { kind, len, payload });
        st.arrivals.push(self.rank);
        if st.arrivals.len() == size {
            let slots: Vec<Contribution> = st.slots.iter_mut().map(|s| s.take().unwrap()).collect();
            for (r, c) in slots.iter().enumerate().skip(1) {
                if c.kind != slots[0].kind {
                    let detail = format!(
                        "collective #{idx}: rank 0 called {:?} but rank {r} called {:?}",
                        slots[0].kind, c.kind
                    );
                    self.fail(st, detail);
                }
                if c.len != slots[0].len && kind == CallKind::Allreduce {
                    let detail = format!(
                        "collective #{idx}: allreduce buffer length {} on rank 0 but {} on rank {r}",
                        slots[0].len, c.len
                    );
                    self.fail(st, detail);
                }
            }
            let arrivals = std::mem::take(&mut st.arrivals);
            st.completed = Some(Arc::new(Round {
                payloads: slots.into_iter().map(|c| c.payload).collect(),
                arrivals,
            }));
            st.generation += 1;
            st.turn = 0;
            self.shared.cv.notify_all();
        } else if self.lockstep() {
            st.turn = self.rank + 1;
            self.shared.cv.notify_all();
        }
        loop {
            if st.fault.is_some() {
                self.abort(st);
            }
            if st.generation > idx && (!self.lockstep() || st.turn == self.rank) {
                break;
            }
            st = self.shared.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        st.completed.clone().expect("completed round")
    }

    fn downcast<'a, T: 'static>(&self, round: &'a Round, rank: usize) -> &'a T {
        match round.payloads[rank].downcast_ref::<T>() {
            Some(v) => v,
            None => {
                let st = self.lock();
                self.fail(st, format!("payload type mismatch from rank {rank}"))
            }
        }
    }

    fn fold_order(&self, round: &Round, commutative: bool) -> Vec<usize> {
        if commutative && self.shared.fold == FoldOrder::Arrival {
            round.arrivals.clone()
        } else {
            (0..self.shared.size).collect()
        }
    }

    /// Element-wise reduction; every rank receives the same result.
    pub fn allreduce<T>(&self, buf: &[T], op: &ReduceOp<T>) -> Vec<T>
    where
        T: Clone + Send + Sync + 'static,
    {
        let round = self.enter(CallKind::Allreduce, buf.len(), Arc::new(buf.to_vec()));
        let mut acc: Vec<T> = vec![op.identity.clone(); buf.len()];
        for r in self.fold_order(&round, op.commutative) {
            let v: &Vec<T> = self.downcast(&round, r);
            for (a, b) in acc.iter_mut().zip(v) {
                *a = op.apply(a, b);
            }
        }
        acc
    }

    pub fn allreduce_one<T>(&self, value: T, op: &ReduceOp<T>) -> T
    where
        T: Clone + Send + Sync + 'static,
    {
        self.allreduce(std::slice::from_ref(&value), op).pop().unwrap()
    }

    /// Per-rank contributions, indexed by rank.
    pub fn allgather_ranks<T>(&self, local: Vec<T>) -> Vec<Vec<T>>
    where
        T: Clone + Send + Sync + 'static,
    {
        let round = self.enter(CallKind::Allgather, local.len(), Arc::new(local));
        (0..self.size()).map(|r| self.downcast::<Vec<T>>(&round, r).clone()).collect()
    }

    /// Concatenation of all contributions in rank order.
    pub fn allgather<T>(&self, local: Vec<T>) -> Vec<T>
    where
        T: Clone + Send + Sync + 'static,
    {
        self.allgather_ranks(local).into_iter().flatten().collect()
    }

    pub fn allgather_one<T>(&self, value: T) -> Vec<T>
    where
        T: Clone + Send + Sync + 'static,
    {
        self.allgather(vec![value])
    }

    pub fn barrier(&self) {
        self.enter(CallKind::Barrier, 0, Arc::new(()));
    }
}
