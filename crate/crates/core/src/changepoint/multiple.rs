use serde::{Deserialize, Serialize};

use crate::ci::DEGENERATE_RTOL;
use crate::error::{Error, Result};
use crate::estimators::{default_i_min, Measure, MeasureIndex};
use crate::limitsim::{backward_pairs_in, forward_pairs_in, CriticalValueTable, Functional, DEFAULT_DELTA};
use crate::series::{to_upper_tail, RiskSpec, TimeSeries};

use super::{check_significance, ArgMax, TestKind, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// outer index of each scan restricted to the coarse grid
    Grid,
    /// every admissible index pair
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnOptions {
    pub delta: f64,
    pub mode: GridMode,
    /// shortest segment entering any estimate
    pub i_min: usize,
}

impl HnOptions {
    pub fn for_level(p: f64) -> Self {
        Self { delta: DEFAULT_DELTA, mode: GridMode::Grid, i_min: default_i_min(p) }
    }

    pub fn for_spec(spec: &RiskSpec) -> Self {
        Self::for_level(spec.effective_p())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnCandidate {
    pub k1: usize,
    pub k2: usize,
    /// `None` where the denominator vanishes
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnTrace {
    pub forward: Vec<HnCandidate>,
    pub backward: Vec<HnCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnResult {
    pub value: f64,
    pub forward: f64,
    pub backward: f64,
    /// maximizing `(k1, k2)` of each scan
    pub forward_argmax: (usize, usize),
    pub backward_argmax: (usize, usize),
    pub options: HnOptions,
    pub trace: HnTrace,
}

/// Segment estimates `T_{a:j}` for a fixed start `a`, indexed by `j`.
fn row(index: &mut MeasureIndex, n: usize, a: usize, i_min: usize) -> Result<Vec<Option<f64>>> {
    index.clear();
    let mut out = vec![None; n + 1];
    for j in a..=n {
        index.insert(j - 1);
        if j + 1 - a >= i_min {
            out[j] = Some(index.value()?);
        }
    }
    Ok(out)
}

/// Segment estimates `T_{i:b}` for a fixed end `b`, indexed by `i`.
fn column(index: &mut MeasureIndex, b: usize, i_min: usize) -> Result<Vec<Option<f64>>> {
    index.clear();
    let mut out = vec![None; b + 2];
    for i in (1..=b).rev() {
        index.insert(i - 1);
        if b + 1 - i >= i_min {
            out[i] = Some(index.value()?);
        }
    }
    Ok(out)
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

/// Forward/backward multiple change-point statistic.
///
/// With `k1 = [n s1]`, `k2 = [n s2]` and `T_{a:b}` the estimate on
/// `X_a..X_b`, the forward ratio is `C_f / D_f` with
///
/// ```text
/// C_f = k1^2 (k2-k1)^2 / k2^3 (T_{1:k1} - T_{k1+1:k2})^2
/// D_f = sum_{i=1}^{k1} i^2 (k1-i)^2 / (k2^2 k1^2) (T_{1:i} - T_{i+1:k1})^2
///     + sum_{i=k1+1}^{k2} (i-1-k1)^2 (k2-i+1)^2 / (k2^2 (k2-k1)^2) (T_{k1+1:i-1} - T_{i:k2})^2
/// ```
///
/// and the backward ratio, with `k1 = [n t1]`, `k2 = [n t2]`, is `C_b / D_b`:
///
/// ```text
/// C_b = (k2-k1)^2 (n-k2+1)^2 / (n-k1+1)^3 (T_{k2:n} - T_{k1:k2-1})^2
/// D_b = sum_{i=k1}^{k2-1} (i-k1+1)^2 (k2-1-i)^2 / ((n-k1+1)^2 (k2-k1)^2) (T_{k1:i} - T_{i+1:k2-1})^2
///     + sum_{i=k2}^{n} (i-k2)^2 (n-i+1)^2 / ((n-k1+1)^2 (n-k2-1)^2) (T_{i:n} - T_{k2:i-1})^2
/// ```
///
/// The `(n-k2-1)^2` in the last term is kept as written although the
/// forward display suggests `(n-k2+1)^2`. Terms with zero weight or on a
/// segment shorter than `i_min` are skipped.
///
/// The statistic is the forward supremum plus the backward supremum. In
/// grid mode `k2` of the forward scan and `k1` of the backward scan run
/// over `[n s]` for `s` on the coarse grid `{(1 + j delta)/2}`.
///
/// Every inner sum is accumulated in one pass over all `O(n^2)` segments,
/// streaming each start point through an order-statistic index, so grid
/// mode costs `O(n^2 (log n + |grid|))`.
pub fn hn_statistic(series: &TimeSeries, spec: &RiskSpec, measure: Measure, options: &HnOptions) -> Result<HnResult> {
    let HnOptions { delta, mode, i_min } = *options;
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::invalid(format!("delta must be in (0, 1/3), got {delta}")));
    }
    if i_min == 0 {
        return Err(Error::invalid("i_min must be at least 1"));
    }
    let (x, p) = to_upper_tail(series, spec);
    let n = x.len();
    if (n as f64) * delta < (2 * i_min) as f64 {
        let needed = ((2 * i_min) as f64 / delta - 1e-9).ceil() as usize;
        return Err(Error::TooShort { len: n, needed });
    }
    let full = mode == GridMode::Full;
    let fwd = forward_pairs_in(n, delta, full);
    let bwd = backward_pairs_in(n, delta, full);
    if fwd.is_empty() || bwd.is_empty() {
        return Err(Error::invalid(format!("no admissible candidates for delta {delta} and length {n}")));
    }

    let mut index = MeasureIndex::new(x.values(), p, measure)?;
    let prefix = row(&mut index, n, 1, i_min)?;
    let suffix = column(&mut index, n, i_min)?;
    let cols: Vec<Vec<Option<f64>>> = fwd.iter().map(|&(k2, _, _)| column(&mut index, k2, i_min)).collect::<Result<_>>()?;
    let rows: Vec<Vec<Option<f64>>> = bwd.iter().map(|&(k1, _, _)| row(&mut index, n, k1, i_min)).collect::<Result<_>>()?;

    // first forward sum by k1, without the 1/k2^2 factor
    let mut s1f = vec![0.0; n + 1];
    // second forward sum by (k2, k1), without 1/k2^2
    let mut acc_f: Vec<Vec<f64>> = fwd.iter().map(|&(_, lo, hi)| vec![0.0; hi + 1 - lo]).collect();
    // first backward sum by (k1, k2), without 1/(n-k1+1)^2
    let mut acc_b: Vec<Vec<f64>> = bwd.iter().map(|&(_, lo, hi)| vec![0.0; hi + 1 - lo]).collect();
    // second backward sum by k2, without 1/(n-k1+1)^2
    let mut s2b = vec![0.0; n + 1];

    for a in 1..=n {
        index.clear();
        for j in a..=n {
            index.insert(j - 1);
            let len = j + 1 - a;
            if len < i_min {
                continue;
            }
            let e = index.value()?;
            let lf = len as f64;
            // T_{a:j} = T_{i+1:k1} with i = a - 1, k1 = j
            if let Some(pre) = prefix[a - 1] {
                let w = sq((a - 1) as f64 * lf / j as f64);
                s1f[j] += w * sq(pre - e);
            }
            // T_{a:j} = T_{k1+1:i-1} with k1 = a - 1, i = j + 1
            for (g, &(k2, lo, hi)) in fwd.iter().enumerate() {
                let k1 = a - 1;
                if k1 < lo || k1 > hi || k2 < j + i_min {
                    continue;
                }
                let c = cols[g][j + 1].expect("length checked");
                let w = sq(lf * (k2 - j) as f64 / (k2 - k1) as f64);
                acc_f[g][k1 - lo] += w * sq(e - c);
            }
            // T_{a:j} = T_{i+1:k2-1} with i = a - 1, k2 = j + 1
            for (g, &(k1, lo, hi)) in bwd.iter().enumerate() {
                let k2 = j + 1;
                if k2 < lo || k2 > hi || a < k1 + i_min {
                    continue;
                }
                let r = rows[g][a - 1].expect("length checked");
                let w = sq((a - k1) as f64 * lf / (k2 - k1) as f64);
                acc_b[g][k2 - lo] += w * sq(r - e);
            }
            // T_{a:j} = T_{k2:i-1} with k2 = a, i = j + 1
            if j < n && a + 1 < n {
                if let Some(suf) = suffix[j + 1] {
                    let w = sq(lf * (n - j) as f64 / (n - a - 1) as f64);
                    s2b[a] += w * sq(suf - e);
                }
            }
        }
    }

    let scale = prefix.iter().chain(&suffix).flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = n as f64 * sq(DEGENERATE_RTOL * scale);

    let mut trace = HnTrace { forward: Vec::new(), backward: Vec::new() };
    let mut best_f = ArgMax::new();
    for (g, &(k2, lo, hi)) in fwd.iter().enumerate() {
        let k2f = k2 as f64;
        for k1 in lo..=hi {
            let ratio = match (prefix[k1], cols[g][k1 + 1]) {
                (Some(left), Some(right)) => {
                    let c = sq(k1 as f64 * (k2 - k1) as f64) / (k2f * k2f * k2f) * sq(left - right);
                    let d = (s1f[k1] + acc_f[g][k1 - lo]) / (k2f * k2f);
                    (d > floor / (k2f * k2f)).then(|| c / d)
                }
                _ => None,
            };
            if let Some(r) = ratio {
                best_f.offer(r, (k1, k2));
            }
            trace.forward.push(HnCandidate { k1, k2, ratio });
        }
    }
    let mut best_b = ArgMax::new();
    for (g, &(k1, lo, hi)) in bwd.iter().enumerate() {
        let m = (n - k1 + 1) as f64;
        for k2 in lo..=hi {
            let ratio = match (suffix[k2], rows[g][k2 - 1]) {
                (Some(right), Some(left)) => {
                    let c = sq((k2 - k1) as f64 * (n - k2 + 1) as f64) / (m * m * m) * sq(right - left);
                    let d = (acc_b[g][k2 - lo] + s2b[k2]) / (m * m);
                    (d > floor / (m * m)).then(|| c / d)
                }
                _ => None,
            };
            if let Some(r) = ratio {
                best_b.offer(r, (k1, k2));
            }
            trace.backward.push(HnCandidate { k1, k2, ratio });
        }
    }
    let degenerate = || Error::Degenerate {
        what: "self-normalizer",
        center: if measure.is_odd() { spec.sign() } else { 1.0 } * prefix[n].unwrap_or(0.0),
    };
    let (forward, forward_argmax) = best_f.get().ok_or_else(degenerate)?;
    let (backward, backward_argmax) = best_b.get().ok_or_else(degenerate)?;
    Ok(HnResult {
        value: forward + backward,
        forward,
        backward,
        forward_argmax,
        backward_argmax,
        options: *options,
        trace,
    })
}

/// Multiple change-point test at significance `level` against a table of
/// the grid limit functional with the same `delta`. Only grid mode has a
/// tabulated reference distribution.
pub fn multiple_test(
    series: &TimeSeries,
    spec: &RiskSpec,
    measure: Measure,
    level: f64,
    options: &HnOptions,
    table: &CriticalValueTable,
) -> Result<TestResult> {
    check_significance(level)?;
    if options.mode != GridMode::Grid {
        return Err(Error::invalid("the multiple change-point test is calibrated for grid mode only"));
    }
    table.ensure_matches(Functional::Htilde, Some(options.delta))?;
    let critical = table.quantile(1.0 - level)?;
    let h = hn_statistic(series, spec, measure, options)?;
    Ok(TestResult {
        test: TestKind::Multiple,
        statistic: h.value,
        critical_value: critical,
        level,
        reject: h.value > critical,
        location: None,
        measure,
        side: spec.side(),
        effective_p: spec.effective_p(),
        table: table.key().file_name(),
        single: None,
        multiple: Some(h),
    })
}
