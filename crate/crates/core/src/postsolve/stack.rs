use serde::{Deserialize, Serialize};

use crate::model::IdSpace;
use crate::work::RowScope;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// One relocation performed by the permutation presolver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Move {
    /// Row became a block-0 row.
    RowToZero { row: usize, from: RowScope },
    /// Linking row became a local row of `block`.
    RowToBlock { row: usize, block: usize },
    /// Linking column became a local column of `block`.
    ColToBlock { col: usize, block: usize },
    /// Local column of `from` became a (0-link) linking column.
    ColToZero { col: usize, from: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StackEntry {
    FixedVar {
        col: usize,
        value: f64,
        cost: f64,
        entries: Vec<(usize, f64)>,
    },
    SingletonRow {
        row: usize,
        col: usize,
        coef: f64,
        #[serde(with = "inf_f64")]
        old_lower: f64,
        #[serde(with = "inf_f64")]
        old_upper: f64,
        lower_from_row: bool,
        upper_from_row: bool,
    },
    /// Column substituted out through an equality row: `x_col = (rhs - sum) / coef`.
    SubstitutedCol {
        col: usize,
        row: usize,
        coef: f64,
        rhs: f64,
        row_entries: Vec<(usize, f64)>,
        cost: f64,
    },
    /// `deleted = lambda * kept` as linear forms; flags tell which of the
    /// kept row's final bounds came from the deleted row.
    DeletedParallelRow {
        kept: usize,
        deleted: usize,
        lambda: f64,
        #[serde(with = "inf_f64")]
        deleted_lower: f64,
        #[serde(with = "inf_f64")]
        deleted_upper: f64,
        lower_from_deleted: bool,
        upper_from_deleted: bool,
    },
    DeletedRedundantRow {
        row: usize,
        entries: Vec<(usize, f64)>,
        #[serde(with = "inf_f64")]
        lower: f64,
        #[serde(with = "inf_f64")]
        upper: f64,
    },
    /// Row `target` was replaced by `sum_q w_q * row_q` (or removed when the
    /// combination vanished).
    LinDepCombination {
        target: usize,
        removed: bool,
        weights: Vec<(usize, f64)>,
    },
    PermutationMove {
        moves: Vec<Move>,
    },
    BoundTightened {
        col: usize,
        side: Side,
        #[serde(with = "inf_f64")]
        old: f64,
        new: f64,
        row: usize,
        coef: f64,
    },
    SyncEvent {
        layout: u64,
    },
}

/// Everything one rank needs to undo its reductions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PostsolveStack {
    pub rank: usize,
    pub nranks: usize,
    pub n_blocks: usize,
    pub ids: IdSpace,
    pub entries: Vec<StackEntry>,
    /// Scope of every row present on this rank at the end of presolve,
    /// deleted rows included.
    pub row_scope: Vec<Option<RowScope>>,
    pub row_alive: Vec<bool>,
    /// Block of every column present on this rank at the end of presolve.
    pub col_block: Vec<Option<usize>>,
    pub col_alive: Vec<bool>,
    /// Final working costs of present columns.
    pub costs: Vec<f64>,
}

impl PostsolveStack {
    pub fn sync_events(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e, StackEntry::SyncEvent { .. })).count()
    }
}

/// JSON has no infinities; they travel as the strings `"inf"` and `"-inf"`.
mod inf_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            v.serialize(s)
        } else if *v > 0.0 {
            "inf".serialize(s)
        } else if *v < 0.0 {
            "-inf".serialize(s)
        } else {
            "nan".serialize(s)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(serde::de::Error::custom(format!("bad number '{t}'"))),
            },
        }
    }
}
