//! Time series container, risk specification and tail-side conventions.
//!
//! All estimators in this crate work on the upper tail. Lower-tail questions
//! are answered by negating the data and complementing the level, see
//! [`to_upper_tail`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered finite observations with optional date labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    timestamps: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value {} at index {}",
                values[i],
                i + 1
            )));
        }
        Ok(Self {
            values,
            timestamps: None,
        })
    }

    /// Attach date labels. Labels are opaque and compared lexicographically,
    /// so they must already be in a sortable form such as ISO dates.
    pub fn with_timestamps(values: Vec<f64>, timestamps: Vec<String>) -> Result<Self> {
        let mut s = Self::new(values)?;
        if timestamps.len() != s.values.len() {
            return Err(Error::invalid(format!(
                "{} timestamps for {} values",
                timestamps.len(),
                s.values.len()
            )));
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "timestamps not strictly increasing at index {}",
                w + 2
            )));
        }
        s.timestamps = Some(timestamps);
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Label of the 1-based observation `i`, or the index itself when the
    /// series carries no dates.
    pub fn label(&self, i: usize) -> String {
        match &self.timestamps {
            Some(ts) => ts[i - 1].clone(),
            None => i.to_string(),
        }
    }

    /// Observations `l..=m` (1-based) as a new series.
    pub fn slice(&self, seg: SegmentRef) -> TimeSeries {
        let (a, b) = (seg.l - 1, seg.m);
        TimeSeries {
            values: self.values[a..b].to_vec(),
            timestamps: self.timestamps.as_ref().map(|t| t[a..b].to_vec()),
        }
    }

    pub fn reversed(&self) -> TimeSeries {
        let mut values = self.values.clone();
        values.reverse();
        // reversed dates would violate the ordering invariant
        TimeSeries {
            values,
            timestamps: None,
        }
    }

    /// Multiplies every observation by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<TimeSeries> {
        let mut s = TimeSeries::new(self.values.iter().map(|v| v * factor).collect())?;
        s.timestamps = self.timestamps.clone();
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    Upper,
    Lower,
}

/// Probability level, tail side and optional conditional-tail-moment exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    p: f64,
    side: TailSide,
    beta: Option<f64>,
}

impl RiskSpec {
    pub fn new(p: f64, side: TailSide) -> Result<Self> {
        check_probability(p)?;
        Ok(Self {
            p,
            side,
            beta: None,
        })
    }

    pub fn upper(p: f64) -> Result<Self> {
        Self::new(p, TailSide::Upper)
    }

    pub fn lower(p: f64) -> Result<Self> {
        Self::new(p, TailSide::Lower)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!("CTM exponent must be > 0, got {beta}")));
        }
        self.beta = Some(beta);
        Ok(self)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn side(&self) -> TailSide {
        self.side
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Level seen by the upper-tail estimators after [`to_upper_tail`].
    pub fn effective_p(&self) -> f64 {
        match self.side {
            TailSide::Upper => self.p,
            TailSide::Lower => 1.0 - self.p,
        }
    }

    /// Sign applied to upper-tail results to express them in the caller's units.
    pub fn sign(&self) -> f64 {
        match self.side {
            TailSide::Upper => 1.0,
            TailSide::Lower => -1.0,
        }
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Inclusive 1-based segment `l..=m` of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub l: usize,
    pub m: usize,
}

impl SegmentRef {
    pub fn new(l: usize, m: usize, len: usize) -> Result<Self> {
        if l >= 1 && l <= m && m <= len {
            Ok(Self { l, m })
        } else {
            Err(Error::InvalidSegment { l, m, len })
        }
    }

    pub fn len(&self) -> usize {
        self.m - self.l + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maps a risk question onto the upper tail.
///
/// Upper-side specs pass through. Lower-side specs return the negated series
/// with level `1 - p`; results computed on it must be multiplied by
/// [`RiskSpec::sign`] to return to the original units.
pub fn to_upper_tail(series: &TimeSeries, spec: &RiskSpec) -> (TimeSeries, f64) {
    match spec.side {
        TailSide::Upper => (series.clone(), spec.p),
        TailSide::Lower => {
            let negated = TimeSeries {
                values: series.values.iter().map(|v| -v).collect(),
                timestamps: series.timestamps.clone(),
            };
            (negated, 1.0 - spec.p)
        }
    }
}

/// Log returns `ln(P[i+1] / P[i])`; timestamps of the later observation are kept.
pub fn log_returns(prices: &TimeSeries) -> Result<TimeSeries> {
    let v = prices.values();
    if v.len() < 2 {
        return Err(Error::TooShort {
            len: v.len(),
            needed: 2,
        });
    }
    if let Some(i) = v.iter().position(|&x| x <= 0.0) {
        return Err(Error::invalid(format!(
            "non-positive price {} at index {}",
            v[i],
            i + 1
        )));
    }
    let r: Vec<f64> = v.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    match prices.timestamps() {
        Some(ts) => TimeSeries::with_timestamps(r, ts[1..].to_vec()),
        None => TimeSeries::new(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(TimeSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::new(vec![f64::INFINITY]).is_err());
        assert_eq!(TimeSeries::new(vec![]), Err(Error::EmptySample));
    }

    #[test]
    fn timestamps_must_increase() {
        let ok = TimeSeries::with_timestamps(vec![1.0, 2.0], vec!["2020-01-01".into(), "2020-01-02".into()]);
        assert!(ok.is_ok());
        let bad = TimeSeries::with_timestamps(vec![1.0, 2.0], vec!["b".into(), "a".into()]);
        assert!(bad.is_err());
        let short = TimeSeries::with_timestamps(vec![1.0, 2.0], vec!["a".into()]);
        assert!(short.is_err());
    }

    #[test]
    fn risk_spec_validation() {
        assert!(RiskSpec::upper(0.0).is_err());
        assert!(RiskSpec::upper(1.0).is_err());
        assert!(RiskSpec::upper(0.5).unwrap().with_beta(0.0).is_err());
        assert!(RiskSpec::upper(0.5).unwrap().with_beta(1.5).is_ok());
    }

    #[test]
    fn upper_tail_identity() {
        let s = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        let (t, p) = to_upper_tail(&s, &RiskSpec::upper(0.9).unwrap());
        assert_eq!(t.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(p, 0.9);
    }

    #[test]
    fn lower_tail_negates() {
        let s = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        let spec = RiskSpec::lower(0.05).unwrap();
        let (t, p) = to_upper_tail(&s, &spec);
        assert_eq!(t.values(), &[-1.0, -2.0, -3.0]);
        assert_eq!(p, 0.95);
        let (back, _) = to_upper_tail(&t, &spec);
        assert_eq!(back.values(), s.values());
    }

    #[test]
    fn log_returns_cases() {
        let e = std::f64::consts::E;
        let r = log_returns(&TimeSeries::new(vec![1.0, e, e * e]).unwrap()).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-15);
        assert!((r.values()[1] - 1.0).abs() < 1e-15);
        let flat = log_returns(&TimeSeries::new(vec![100.0, 100.0]).unwrap()).unwrap();
        assert_eq!(flat.values(), &[0.0]);
        assert!(log_returns(&TimeSeries::new(vec![100.0, 0.0, 5.0]).unwrap()).is_err());
        assert!(log_returns(&TimeSeries::new(vec![100.0]).unwrap()).is_err());
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let r = log_returns(&TimeSeries::new(vec![42.5; 50]).unwrap()).unwrap();
        assert_eq!(r.len(), 49);
        assert!(r.values().iter().all(|&x| x == 0.0));
    }
}
