use crate::error::{Error, Result};
use crate::numerics::DoubleDouble;
use crate::series::check_probability;

use super::{es_from_sum, Measure, TailIndex};

/// Default shortest segment on which the plug-in estimator is evaluated:
/// `ceil(1 / (1 - p)) + 1`, so that at least two exceedances are expected.
pub fn default_i_min(p: f64) -> usize {
    (1.0 / (1.0 - p) - 1e-9).ceil() as usize + 1
}

/// Estimates on every prefix `1..=i` and suffix `i..=n` of a series, with
/// cumulative weighted moments for the quadratic self-normalizers.
///
/// Entries on segments shorter than `i_min` are `None`. Moments are taken
/// of the estimates centred at the full-sample value, which leaves the
/// self-normalizers unchanged and keeps the expanded squares well conditioned.
#[derive(Debug, Clone)]
pub struct EsPrefixArrays {
    n: usize,
    i_min: usize,
    prefix: Vec<Option<f64>>,
    suffix: Vec<Option<f64>>,
    centre: f64,
    // index k: sums over prefix entries i <= k, weight (i/n)^2
    pre: Moments,
    // index k - 1: sums over suffix entries i >= k, weight ((n - i + 1)/n)^2
    suf: Moments,
}

#[derive(Debug, Clone, Default)]
struct Moments {
    w0: Vec<DoubleDouble>,
    w1: Vec<DoubleDouble>,
    w2: Vec<DoubleDouble>,
}

impl Moments {
    fn with_len(len: usize) -> Self {
        Self {
            w0: vec![DoubleDouble::ZERO; len],
            w1: vec![DoubleDouble::ZERO; len],
            w2: vec![DoubleDouble::ZERO; len],
        }
    }

    /// `sum w (d - e)^2` at slot `k`, expanded in double-double arithmetic.
    #[inline]
    fn spread(&self, k: usize, e: DoubleDouble) -> f64 {
        let v = self.w2[k]
            .sub(self.w1[k].mul(e).mul_f64(2.0))
            .add(self.w0[k].mul(e.mul(e)));
        v.to_f64().max(0.0)
    }

    fn accumulate(&mut self, slot: usize, prev: usize, w: f64, d: Option<DoubleDouble>) {
        let (mut a0, mut a1, mut a2) = (self.w0[prev], self.w1[prev], self.w2[prev]);
        if let Some(d) = d {
            let wd = d.mul_f64(w);
            a0 = a0.add(DoubleDouble::from_f64(w));
            a1 = a1.add(wd);
            a2 = a2.add(wd.mul(d));
        }
        self.w0[slot] = a0;
        self.w1[slot] = a1;
        self.w2[slot] = a2;
    }
}

impl EsPrefixArrays {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn i_min(&self) -> usize {
        self.i_min
    }

    /// Full-sample estimate.
    pub fn full(&self) -> f64 {
        self.centre
    }

    /// Estimate on `1..=i` (1-based).
    pub fn prefix(&self, i: usize) -> Option<f64> {
        self.prefix[i - 1]
    }

    /// Estimate on `i..=n` (1-based).
    pub fn suffix(&self, i: usize) -> Option<f64> {
        self.suffix[i - 1]
    }

    pub fn prefix_values(&self) -> &[Option<f64>] {
        &self.prefix
    }

    pub fn suffix_values(&self) -> &[Option<f64>] {
        &self.suffix
    }

    /// `n^-1 sum_{i <= k} (i/n)^2 (P_i - P_k)^2` over present prefix entries.
    pub fn prefix_self_normalizer(&self, k: usize) -> Option<f64> {
        let pk = self.prefix(k)?;
        Some(self.pre.spread(k, DoubleDouble::diff(pk, self.centre)) / self.n as f64)
    }

    /// `n^-1 sum_{i >= k} ((n - i + 1)/n)^2 (S_i - S_k)^2` over present suffix entries.
    pub fn suffix_self_normalizer(&self, k: usize) -> Option<f64> {
        let sk = self.suffix(k)?;
        Some(self.suf.spread(k - 1, DoubleDouble::diff(sk, self.centre)) / self.n as f64)
    }

    /// `n^-1 sum_i (i/n)^2 (P_i - P_n)^2`, the denominator of the
    /// self-normalized interval before the square root.
    pub fn full_self_normalizer(&self) -> f64 {
        self.pre.spread(self.n, DoubleDouble::ZERO) / self.n as f64
    }
}

/// [`TailIndex`] evaluating a measure on the inserted observations.
#[derive(Debug, Clone)]
pub(crate) struct MeasureIndex {
    index: TailIndex,
    measure: Measure,
    p: f64,
}

impl MeasureIndex {
    pub(crate) fn new(values: &[f64], p: f64, measure: Measure) -> Result<Self> {
        check_probability(p)?;
        let weights: Vec<f64> = match measure {
            Measure::Var | Measure::Es => values.to_vec(),
            Measure::Ctm(beta) => {
                if !(beta.is_finite() && beta > 0.0) {
                    return Err(Error::invalid(format!("CTM exponent must be > 0, got {beta}")));
                }
                if beta.fract() == 0.0 {
                    values.iter().map(|x| x.powi(beta as i32)).collect()
                } else {
                    values.iter().map(|x| x.powf(beta)).collect()
                }
            }
        };
        Ok(Self { index: TailIndex::with_weights(values, &weights), measure, p })
    }

    #[inline]
    pub(crate) fn insert(&mut self, i: usize) {
        self.index.insert(i);
    }

    pub(crate) fn clear(&mut self) {
        self.index.clear();
    }

    /// Measure on the inserted observations.
    #[inline]
    pub(crate) fn value(&self) -> Result<f64> {
        let q = self.index.query(self.p)?;
        let v = match self.measure {
            Measure::Var => q.var,
            _ => es_from_sum(q.sum, self.index.len(), self.p),
        };
        if v.is_nan() {
            return Err(Error::invalid("negative exceedance with fractional CTM exponent"));
        }
        Ok(v)
    }
}

/// Prefix and suffix ES arrays in `O(n log n)`.
pub fn es_prefix_suffix(values: &[f64], p: f64, i_min: usize) -> Result<EsPrefixArrays> {
    prefix_suffix(values, p, Measure::Es, i_min)
}

/// Prefix and suffix arrays for any supported measure.
pub fn prefix_suffix(values: &[f64], p: f64, measure: Measure, i_min: usize) -> Result<EsPrefixArrays> {
    check_probability(p)?;
    let n = values.len();
    if i_min == 0 {
        return Err(Error::invalid("i_min must be at least 1"));
    }
    if n < i_min {
        return Err(Error::TooShort { len: n, needed: i_min });
    }
    let mut index = MeasureIndex::new(values, p, measure)?;
    let mut prefix = vec![None; n];
    for i in 0..n {
        index.insert(i);
        if i + 1 >= i_min {
            prefix[i] = Some(index.value()?);
        }
    }
    index.clear();
    let mut suffix = vec![None; n];
    for i in (0..n).rev() {
        index.insert(i);
        if n - i >= i_min {
            suffix[i] = Some(index.value()?);
        }
    }
    // pin both ends to the direct evaluation
    let centre = measure.evaluate(values, p)?;
    prefix[n - 1] = Some(centre);
    suffix[0] = Some(centre);

    let nf = n as f64;
    let mut pre = Moments::with_len(n + 1);
    for i in 1..=n {
        let w = (i as f64 / nf).powi(2);
        let d = prefix[i - 1].map(|v| DoubleDouble::diff(v, centre));
        pre.accumulate(i, i - 1, w, d);
    }
    // suffix slot k - 1 covers i >= k; slot n is the empty sum
    let mut suf = Moments::with_len(n + 1);
    for i in (1..=n).rev() {
        let w = ((n - i + 1) as f64 / nf).powi(2);
        let d = suffix[i - 1].map(|v| DoubleDouble::diff(v, centre));
        suf.accumulate(i - 1, i, w, d);
    }

    Ok(EsPrefixArrays {
        n,
        i_min,
        prefix,
        suffix,
        centre,
        pre,
        suf,
    })
}
