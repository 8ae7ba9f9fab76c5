//! Confidence intervals for tail risk measures without standard-error
//! estimation: sectioning with a Student-t pivot, and self-normalization
//! with a Brownian-bridge pivot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{default_i_min, prefix_suffix, Measure};
use crate::limitsim::{CriticalValueTable, Functional};
use crate::numerics::student_t_quantile;
use crate::series::{check_probability, to_upper_tail, RiskSpec, TimeSeries};

/// Section count used when none is given.
pub const DEFAULT_SECTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum IntervalMethod {
    Sectioning { m: usize },
    SelfNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IntervalDiagnostics {
    /// per-section estimates on the upper-tail scale (sectioning only)
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub section_estimates: Vec<f64>,
    /// sample standard deviation of the section estimates
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dispersion: Option<f64>,
    /// observations dropped from the end so that sections have equal length
    pub dropped: usize,
    /// `V_n` (self-normalization only)
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub self_normalizer: Option<f64>,
    /// shortest prefix entering `V_n`; prefixes `1..i_min` are skipped
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub i_min: Option<usize>,
    pub critical_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    /// full-sample estimate
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    /// the method's own centre: the section mean, or the point estimate
    pub center: f64,
    pub method: IntervalMethod,
    pub measure: Measure,
    pub level: f64,
    pub diagnostics: IntervalDiagnostics,
}

impl IntervalResult {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Dispersions at rounding level relative to the estimates count as zero.
pub(crate) const DEGENERATE_RTOL: f64 = 1e-12;

pub(crate) fn negligible(spread: f64, scale: f64) -> bool {
    spread <= DEGENERATE_RTOL * scale.abs()
}

fn check_level(level: f64) -> Result<()> {
    check_probability(level).map_err(|_| Error::invalid(format!("coverage level {level} outside (0, 1)")))
}

/// Maps an upper-tail result back to the caller's side.
fn orient(mut r: IntervalResult, spec: &RiskSpec) -> IntervalResult {
    if spec.sign() < 0.0 && r.measure.is_odd() {
        r.point = -r.point;
        r.center = -r.center;
        let (lo, hi) = (-r.hi, -r.lo);
        r.lo = lo;
        r.hi = hi;
    }
    r
}

/// Estimates on `m` contiguous equal sections of `values`; the trailing
/// `len mod m` observations are dropped.
pub fn section_estimates(values: &[f64], p: f64, measure: Measure, m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::invalid(format!("sectioning needs m >= 2 sections, got {m}")));
    }
    let needed = m * (1.0 / (1.0 - p) - 1e-9).ceil() as usize;
    if values.len() < needed {
        return Err(Error::TooShort { len: values.len(), needed });
    }
    let b = values.len() / m;
    values.chunks_exact(b).take(m).map(|s| measure.evaluate(s, p)).collect()
}

/// Mean and sample standard deviation.
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Studentized section mean `sqrt(m) (mean - truth) / S`, distributed
/// approximately as `t_{m-1}`.
pub fn sectioning_pivot(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(Error::invalid("pivot needs at least two section estimates"));
    }
    let (mean, sd) = mean_sd(estimates);
    if negligible(sd, mean) {
        return Err(Error::Degenerate { what: "section dispersion", center: mean });
    }
    Ok((estimates.len() as f64).sqrt() * (mean - truth) / sd)
}

/// Sectioning interval `mean ± t_{m-1,(1+level)/2} S / sqrt(m)`.
pub fn sectioning_interval(
    series: &TimeSeries,
    spec: &RiskSpec,
    measure: Measure,
    m: usize,
    level: f64,
) -> Result<IntervalResult> {
    check_level(level)?;
    let (x, p) = to_upper_tail(series, spec);
    let estimates = section_estimates(x.values(), p, measure, m)?;
    let (center, sd) = mean_sd(&estimates);
    let flip = if spec.sign() < 0.0 && measure.is_odd() { -1.0 } else { 1.0 };
    if negligible(sd, center) {
        return Err(Error::Degenerate { what: "section dispersion", center: flip * center });
    }
    let t = student_t_quantile(0.5 * (1.0 + level), (m - 1) as f64)?;
    let half = t * sd / (m as f64).sqrt();
    let point = measure.evaluate(x.values(), p)?;
    let r = IntervalResult {
        point,
        lo: center - half,
        hi: center + half,
        center,
        method: IntervalMethod::Sectioning { m },
        measure,
        level,
        diagnostics: IntervalDiagnostics {
            section_estimates: estimates,
            dispersion: Some(sd),
            dropped: x.len() % m,
            critical_value: t,
            ..Default::default()
        },
    };
    Ok(orient(r, spec))
}

/// Self-normalized interval `point ± c V_n` with `c` read from a table of
/// the absolute Lobato pivot at quantile `level`.
pub fn selfnorm_interval(
    series: &TimeSeries,
    spec: &RiskSpec,
    measure: Measure,
    level: f64,
    table: &CriticalValueTable,
) -> Result<IntervalResult> {
    check_level(level)?;
    table.ensure_matches(Functional::Lobato, None)?;
    let c = table.quantile(level)?;
    selfnorm_interval_at(series, spec, measure, level, c, None)
}

/// Self-normalized interval with an explicit critical value.
///
/// `V_n^2 = n^-1 sum_{i >= i_min} (i/n)^2 (T_{1:i} - T_n)^2`; shorter
/// prefixes are skipped without reweighting. `i_min` defaults to
/// `ceil(1/(1-p)) + 1` at the upper-tail level.
pub fn selfnorm_interval_at(
    series: &TimeSeries,
    spec: &RiskSpec,
    measure: Measure,
    level: f64,
    critical: f64,
    i_min: Option<usize>,
) -> Result<IntervalResult> {
    check_level(level)?;
    if !(critical.is_finite() && critical > 0.0) {
        return Err(Error::invalid(format!("critical value must be positive, got {critical}")));
    }
    let (x, p) = to_upper_tail(series, spec);
    let i_min = i_min.unwrap_or_else(|| default_i_min(p));
    let arrays = prefix_suffix(x.values(), p, measure, i_min)?;
    let point = arrays.full();
    let v = arrays.full_self_normalizer().sqrt();
    if negligible(v, point) {
        let flip = if spec.sign() < 0.0 && measure.is_odd() { -1.0 } else { 1.0 };
        return Err(Error::Degenerate { what: "self-normalizer", center: flip * point });
    }
    let r = IntervalResult {
        point,
        lo: point - critical * v,
        hi: point + critical * v,
        center: point,
        method: IntervalMethod::SelfNorm,
        measure,
        level,
        diagnostics: IntervalDiagnostics {
            self_normalizer: Some(v),
            i_min: Some(i_min),
            critical_value: critical,
            ..Default::default()
        },
    };
    Ok(orient(r, spec))
}
