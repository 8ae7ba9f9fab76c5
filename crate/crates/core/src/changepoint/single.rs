use serde::{Deserialize, Serialize};

use crate::ci::DEGENERATE_RTOL;
use crate::error::{Error, Result};
use crate::estimators::{default_i_min, prefix_suffix, Measure};
use crate::limitsim::{CriticalValueTable, Functional, DEFAULT_G_TRIM};
use crate::series::{to_upper_tail, RiskSpec, TimeSeries};

use super::{check_significance, ArgMax, TestKind, TestResult};

/// Floor on the outer segment length regardless of level.
const MIN_OUTER: usize = 8;

/// Candidate range and inner-term policy of the single change-point statistic.
///
/// Candidates are `k` with both `k` and `n - k` at least
/// `max(n_min, ceil(trim_fraction * n))`. Inner self-normalizer terms on
/// prefixes or suffixes shorter than `i_min` are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimPolicy {
    pub n_min: usize,
    pub i_min: usize,
    /// trim of the reference table; `0` disables the proportional floor
    pub trim_fraction: f64,
}

impl TrimPolicy {
    pub fn new(n_min: usize, i_min: usize, trim_fraction: f64) -> Result<Self> {
        if i_min == 0 || n_min < i_min {
            return Err(Error::invalid(format!("trim needs n_min >= i_min >= 1, got {n_min} and {i_min}")));
        }
        if !(0.0..0.5).contains(&trim_fraction) {
            return Err(Error::invalid(format!("trim fraction must be in [0, 0.5), got {trim_fraction}")));
        }
        Ok(Self { n_min, i_min, trim_fraction })
    }

    /// Default policy at upper-tail level `p`: `i_min = ceil(1/(1-p)) + 1`,
    /// `n_min = max(i_min, 8)` and the default table trim.
    pub fn for_level(p: f64) -> Self {
        let i_min = default_i_min(p);
        Self { n_min: i_min.max(MIN_OUTER), i_min, trim_fraction: DEFAULT_G_TRIM }
    }

    pub fn for_spec(spec: &RiskSpec) -> Self {
        Self::for_level(spec.effective_p())
    }

    /// Outer minimum segment length on a series of length `n`.
    pub fn outer(&self, n: usize) -> usize {
        let prop = (self.trim_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
        self.n_min.max(prop)
    }
}

/// Per-candidate numerator, denominator and ratio of the statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnTrace {
    /// candidate split points `k`
    pub candidates: Vec<usize>,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    /// `None` where the denominator vanishes
    pub ratio: Vec<Option<f64>>,
    /// maximizer of the raw CUSUM numerator
    pub cusum_argmax: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnResult {
    pub value: f64,
    pub argmax: usize,
    pub trim: TrimPolicy,
    pub outer_min: usize,
    pub trace: GnTrace,
}

/// Self-normalized CUSUM statistic
///
/// ```text
/// max_k  t^2 (1-t)^2 (T_{1:k} - T_{k+1:n})^2
///        / ( n^-1 sum_{i<=k} (i/n)^2 (T_{1:i} - T_{1:k})^2
///          + n^-1 sum_{i>k} ((n-i+1)/n)^2 (T_{i:n} - T_{k+1:n})^2 ),  t = k/n
/// ```
///
/// evaluated for every candidate in `O(1)` from cumulative moments of the
/// prefix and suffix estimates. Ties go to the smallest `k`.
pub fn gn_statistic(series: &TimeSeries, spec: &RiskSpec, measure: Measure, trim: &TrimPolicy) -> Result<GnResult> {
    let (x, p) = to_upper_tail(series, spec);
    let n = x.len();
    let outer = trim.outer(n);
    if n < 2 * outer {
        return Err(Error::TooShort { len: n, needed: 2 * outer });
    }
    let arrays = prefix_suffix(x.values(), p, measure, trim.i_min)?;
    let scale = arrays
        .prefix_values()
        .iter()
        .chain(arrays.suffix_values())
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (DEGENERATE_RTOL * scale).powi(2);

    let nf = n as f64;
    let len = n - 2 * outer + 1;
    let mut trace = GnTrace {
        candidates: Vec::with_capacity(len),
        numerator: Vec::with_capacity(len),
        denominator: Vec::with_capacity(len),
        ratio: Vec::with_capacity(len),
        cusum_argmax: outer,
    };
    let mut best = ArgMax::new();
    let mut cusum = ArgMax::new();
    for k in outer..=n - outer {
        let pk = arrays.prefix(k).expect("outer segments are at least i_min long");
        let sk = arrays.suffix(k + 1).expect("outer segments are at least i_min long");
        let t = k as f64 / nf;
        let num = (t * (1.0 - t)).powi(2) * (pk - sk).powi(2);
        let den = arrays.prefix_self_normalizer(k).unwrap_or(0.0) + arrays.suffix_self_normalizer(k + 1).unwrap_or(0.0);
        let ratio = (den > floor).then(|| num / den);
        if let Some(r) = ratio {
            best.offer(r, k);
        }
        cusum.offer(num, k);
        trace.candidates.push(k);
        trace.numerator.push(num);
        trace.denominator.push(den);
        trace.ratio.push(ratio);
    }
    trace.cusum_argmax = cusum.get().map_or(outer, |(_, k)| k);
    let (value, argmax) = best.get().ok_or(Error::Degenerate {
        what: "self-normalizer",
        center: if measure.is_odd() { spec.sign() } else { 1.0 } * arrays.full(),
    })?;
    Ok(GnResult { value, argmax, trim: *trim, outer_min: outer, trace })
}

/// Single change-point test at significance `level` against a table of the
/// limit functional built with the policy's trim fraction.
pub fn single_test(
    series: &TimeSeries,
    spec: &RiskSpec,
    measure: Measure,
    level: f64,
    trim: &TrimPolicy,
    table: &CriticalValueTable,
) -> Result<TestResult> {
    check_significance(level)?;
    table.ensure_matches(Functional::G, Some(trim.trim_fraction))?;
    let critical = table.quantile(1.0 - level)?;
    let g = gn_statistic(series, spec, measure, trim)?;
    Ok(TestResult {
        test: TestKind::Single,
        statistic: g.value,
        critical_value: critical,
        level,
        reject: g.value > critical,
        location: Some(g.argmax),
        measure,
        side: spec.side(),
        effective_p: spec.effective_p(),
        table: table.key().file_name(),
        single: Some(g),
        multiple: None,
    })
}
