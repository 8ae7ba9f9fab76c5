//! Retrospective change-point tests for tail risk measures: a
//! self-normalized CUSUM test for one change, and a forward/backward scan
//! for an unknown number of changes.
//!
//! All indices are 1-based: a change "at `k`" separates `X_1..X_k` from
//! `X_{k+1}..X_n`.

mod multiple;
mod single;
#[cfg(test)]
mod tests;

pub use multiple::{hn_statistic, multiple_test, GridMode, HnCandidate, HnOptions, HnResult, HnTrace};
pub use single::{gn_statistic, single_test, GnResult, GnTrace, TrimPolicy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Measure;
use crate::series::{check_probability, TailSide};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Single,
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub critical_value: f64,
    /// significance level
    pub level: f64,
    pub reject: bool,
    /// estimated change location (single test only)
    pub location: Option<usize>,
    pub measure: Measure,
    pub side: TailSide,
    /// level on the upper-tail scale the statistic was computed at
    pub effective_p: f64,
    /// cache file name of the critical-value table
    pub table: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub single: Option<GnResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub multiple: Option<HnResult>,
}

pub(crate) fn check_significance(level: f64) -> Result<()> {
    check_probability(level).map_err(|_| Error::invalid(format!("significance level {level} outside (0, 1)")))
}

/// Running maximum keeping the first (smallest-index) maximizer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ArgMax<T> {
    best: Option<(f64, T)>,
}

impl<T: Copy> ArgMax<T> {
    pub(crate) fn new() -> Self {
        Self { best: None }
    }

    #[inline]
    pub(crate) fn offer(&mut self, value: f64, at: T) {
        match self.best {
            Some((b, _)) if value <= b => {}
            _ => self.best = Some((value, at)),
        }
    }

    pub(crate) fn get(&self) -> Option<(f64, T)> {
        self.best
    }
}
