//! Run statistics (`.stats.json`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_text, IoError};
use crate::comm::ExecMode;
use crate::model::ProblemSize;
use crate::presolve::{PresolveResult, Presolver, Tally};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresolverStats {
    pub presolver: String,
    #[serde(flatten)]
    pub tally: Tally,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub instance: String,
    pub ranks: usize,
    pub mode: ExecMode,
    pub original: ProblemSize,
    pub reduced: ProblemSize,
    pub rows_pct: f64,
    pub cols_pct: f64,
    pub nonzeros_pct: f64,
    pub rounds: usize,
    /// In schedule order.
    pub presolvers: Vec<PresolverStats>,
    pub total_seconds: f64,
}

/// `reduced / original * 100`, or 100 for an empty original.
pub fn percent(reduced: usize, original: usize) -> f64 {
    if original == 0 {
        100.0
    } else {
        reduced as f64 / original as f64 * 100.0
    }
}

impl StatsReport {
    pub fn new(instance: &str, ranks: usize, mode: ExecMode, r: &PresolveResult, total_seconds: f64) -> Self {
        let presolvers = Presolver::ALL
            .iter()
            .filter_map(|p| {
                let tally = r.counters.per_presolver.get(p)?;
                Some(PresolverStats {
                    presolver: p.name().to_string(),
                    tally: *tally,
                    seconds: r.counters.seconds.get(p).copied().unwrap_or(0.0),
                })
            })
            .collect();
        let (o, d) = (r.original_size, r.reduced_size);
        StatsReport {
            instance: instance.to_string(),
            ranks,
            mode,
            original: o,
            reduced: d,
            rows_pct: percent(d.rows, o.rows),
            cols_pct: percent(d.cols, o.cols),
            nonzeros_pct: percent(d.nnz, o.nnz),
            rounds: r.counters.rounds,
            presolvers,
            total_seconds,
        }
    }

    pub fn table_header() -> String {
        format!("{:<24} {:>10} {:>14} {:>17}", "instance", "time (s)", "nonzeros (%)", "constraints (%)")
    }

    /// One line in the layout of the usual reduced-size table.
    pub fn table_row(&self) -> String {
        format!("{:<24} {:>10.2} {:>14.2} {:>17.2}", self.instance, self.total_seconds, self.nonzeros_pct, self.rows_pct)
    }
}

pub fn write_stats(report: &StatsReport, path: &Path) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| IoError::Stack(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}
