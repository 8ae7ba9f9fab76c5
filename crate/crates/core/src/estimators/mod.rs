//! Plug-in VaR, ES and conditional-tail-moment estimators.
//!
//! For a segment of length `len` at level `p`:
//!
//! * `VaR = inf{x : F(x) >= p}`, the `ceil(len * p)`-th order statistic;
//! * `ES = sum{X_i : X_i >= VaR} / ((1 - p) * len)`;
//! * `CTM = sum{X_i^beta : X_i >= VaR} / ((1 - p) * len)`.
//!
//! The exceedance indicator includes every observation tied with the VaR.
//! Under heavy ties ES is therefore not a conditional mean: four copies of
//! `5` give `ES(0.5) = 10`. Continuous data never hit this case.

mod prefix;
mod segment;
mod tail_index;

pub(crate) use prefix::MeasureIndex;
pub use prefix::{default_i_min, es_prefix_suffix, prefix_suffix, EsPrefixArrays};
pub use segment::{segment_es, segment_es_naive, SegmentIndex};
pub use tail_index::{Fenwick, TailIndex, TailQuery};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;
use crate::series::{check_probability, to_upper_tail, RiskSpec, TimeSeries};

/// Guard applied before taking the ceiling of `len * p` so that exactly
/// integral products such as `10 * 0.9` do not round up.
const RANK_GUARD: f64 = 1e-12;

/// 1-based rank of the VaR order statistic in a sample of size `len`.
#[inline]
pub fn var_rank(len: usize, p: f64) -> usize {
    let r = (len as f64 * p - RANK_GUARD).ceil();
    (r.max(1.0) as usize).min(len)
}

/// Risk measure evaluated on a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "beta")]
pub enum Measure {
    Var,
    Es,
    Ctm(f64),
}

impl Measure {
    pub fn evaluate(&self, segment: &[f64], p: f64) -> Result<f64> {
        match *self {
            Measure::Var => var_estimate(segment, p),
            Measure::Es => es_estimate(segment, p),
            Measure::Ctm(beta) => ctm_estimate(segment, p, beta),
        }
    }

    /// Whether negating the data maps the measure to its negative.
    pub fn is_odd(&self) -> bool {
        !matches!(self, Measure::Ctm(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Measure::Var => "var",
            Measure::Es => "es",
            Measure::Ctm(_) => "ctm",
        }
    }
}

fn check(segment: &[f64], p: f64) -> Result<()> {
    if segment.is_empty() {
        return Err(Error::EmptySample);
    }
    check_probability(p)
}

/// Fraction of the segment at or below `x`.
pub fn empirical_cdf(segment: &[f64], x: f64) -> Result<f64> {
    if segment.is_empty() {
        return Err(Error::EmptySample);
    }
    let below = segment.iter().filter(|&&v| v <= x).count();
    Ok(below as f64 / segment.len() as f64)
}

pub fn var_estimate(segment: &[f64], p: f64) -> Result<f64> {
    check(segment, p)?;
    let mut buf = segment.to_vec();
    let k = var_rank(buf.len(), p);
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*v)
}

/// VaR together with the exceedance sum and count, the sum accumulated in
/// index order.
pub fn tail_components(segment: &[f64], p: f64) -> Result<TailQuery> {
    let var = var_estimate(segment, p)?;
    let mut sum = CompensatedSum::new();
    let mut count = 0;
    for &x in segment {
        if x >= var {
            sum.add(x);
            count += 1;
        }
    }
    Ok(TailQuery {
        var,
        sum: sum.value(),
        count,
    })
}

pub fn es_estimate(segment: &[f64], p: f64) -> Result<f64> {
    let q = tail_components(segment, p)?;
    Ok(es_from_sum(q.sum, segment.len(), p))
}

#[inline]
pub(crate) fn es_from_sum(sum: f64, len: usize, p: f64) -> f64 {
    sum / ((1.0 - p) * len as f64)
}

/// Conditional tail moment of order `beta`; `beta = 1` is exactly [`es_estimate`].
///
/// Non-integer exponents require the counted exceedances to be non-negative.
pub fn ctm_estimate(segment: &[f64], p: f64, beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid(format!("CTM exponent must be > 0, got {beta}")));
    }
    let var = var_estimate(segment, p)?;
    let integral = beta.fract() == 0.0 && beta <= i32::MAX as f64;
    let mut sum = CompensatedSum::new();
    for &x in segment.iter().filter(|&&x| x >= var) {
        let term = if integral {
            x.powi(beta as i32)
        } else if x < 0.0 {
            return Err(Error::invalid(format!(
                "negative exceedance {x} with fractional exponent {beta}"
            )));
        } else {
            x.powf(beta)
        };
        sum.add(term);
    }
    Ok(es_from_sum(sum.value(), segment.len(), p))
}

/// Full-sample estimate on the side named by `spec`, in the caller's units.
pub fn estimate(series: &TimeSeries, spec: &RiskSpec, measure: Measure) -> Result<f64> {
    let (x, p) = to_upper_tail(series, spec);
    let v = measure.evaluate(x.values(), p)?;
    Ok(if measure.is_odd() { spec.sign() * v } else { v })
}
