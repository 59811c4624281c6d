//! File formats: free-form MPS, block annotations, statistics, solutions
//! and postsolve stacks.

mod blocks;
mod mps;
mod solution;
mod stats;

pub use blocks::{parse_blocks, read_blocks, render_blocks, write_blocks};
pub use mps::{parse_mps, read_mps, render_mps, write_mps};
pub use solution::{parse_solution, read_solution, render_solution, write_solution};
pub use stats::{write_stats, StatsReport};

use std::path::Path;

use thiserror::Error;

use crate::postsolve::PostsolveStack;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("structure violation: {}", .0.join("; "))]
    Structure(Vec<String>),
    #[error("invalid stack file: {0}")]
    Stack(String),
}

impl IoError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        IoError::Parse { line, msg: msg.into() }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

/// Magnitudes at or beyond this are read as infinite.
pub const MPS_INFINITY: f64 = 1e30;

/// Shortest text that parses back to exactly `v`.
pub fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "1e30".into() } else { "-1e30".into() };
    }
    let a = v.abs();
    if v == 0.0 || (1e-5..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn parse_num(s: &str, line: usize) -> Result<f64, IoError> {
    let v: f64 = s.parse().map_err(|_| IoError::parse(line, format!("bad number '{s}'")))?;
    if v.is_nan() {
        return Err(IoError::parse(line, "NaN is not a valid value"));
    }
    Ok(if v >= MPS_INFINITY {
        f64::INFINITY
    } else if v <= -MPS_INFINITY {
        f64::NEG_INFINITY
    } else {
        v
    })
}

pub fn write_stacks(stacks: &[PostsolveStack], path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string(stacks).map_err(|e| IoError::Stack(e.to_string()))?;
    write_text(path, &text)
}

pub fn read_stacks(path: &Path) -> Result<Vec<PostsolveStack>, IoError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| IoError::Stack(e.to_string()))
}
