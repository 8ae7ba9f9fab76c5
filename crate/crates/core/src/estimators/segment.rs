use crate::error::{Error, Result};
use crate::series::{check_probability, SegmentRef};

use super::{es_estimate, es_from_sum, var_rank, TailIndex, TailQuery};

/// Offline order-statistic index answering tail queries on arbitrary
/// segments in `O(log n)`.
///
/// A wavelet matrix over the descending value ranks, with prefix sums of the
/// observation values kept at every level.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    n: usize,
    levels: Vec<Level>,
    sorted: Vec<f64>,
    tie_end: Vec<usize>,
    key_bits: u32,
    /// prefix sums of values in observation order
    base: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Level {
    bit: u32,
    /// ones among the first i entries of this level's order
    ones: Vec<u32>,
    zeros: usize,
    /// prefix sums of values in the order after this level's partition
    sums: Vec<f64>,
}

impl Level {
    #[inline]
    fn rank1(&self, i: usize) -> usize {
        self.ones[i] as usize
    }

    #[inline]
    fn rank0(&self, i: usize) -> usize {
        i - self.ones[i] as usize
    }
}

impl SegmentIndex {
    pub fn build(values: &[f64]) -> Self {
        let n = values.len();
        let tail = TailIndex::build(values);
        let keys: Vec<usize> = (0..n).map(|i| tail.position_of(i)).collect();
        let bits = usize::BITS - n.max(2).saturating_sub(1).leading_zeros();
        let mut cur: Vec<(usize, f64)> = keys.iter().copied().zip(values.iter().copied()).collect();
        let mut levels = Vec::with_capacity(bits as usize);
        for bit in (0..bits).rev() {
            let mut ones = Vec::with_capacity(n + 1);
            ones.push(0u32);
            for &(k, _) in &cur {
                let last = *ones.last().unwrap();
                ones.push(last + ((k >> bit) & 1) as u32);
            }
            let zeros = n - ones[n] as usize;
            let (mut lo, hi): (Vec<_>, Vec<_>) = cur.iter().partition(|(k, _)| (k >> bit) & 1 == 0);
            lo.extend(hi);
            cur = lo;
            let mut sums = Vec::with_capacity(n + 1);
            sums.push(0.0);
            let mut acc = 0.0;
            for &(_, v) in &cur {
                acc += v;
                sums.push(acc);
            }
            levels.push(Level {
                bit,
                ones,
                zeros,
                sums,
            });
        }
        let mut base = Vec::with_capacity(n + 1);
        base.push(0.0);
        let mut acc = 0.0;
        for &v in values {
            acc += v;
            base.push(acc);
        }
        Self {
            n,
            levels,
            key_bits: bits,
            base,
            sorted: tail.sorted_values().to_vec(),
            tie_end: tail.tie_ends().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `k`-th smallest key (0-based) among positions `[l, r)`.
    fn kth_key(&self, mut l: usize, mut r: usize, mut k: usize) -> usize {
        let mut key = 0;
        for lv in &self.levels {
            let z = lv.rank0(r) - lv.rank0(l);
            if k < z {
                l = lv.rank0(l);
                r = lv.rank0(r);
            } else {
                k -= z;
                key |= 1 << lv.bit;
                l = lv.zeros + lv.rank1(l);
                r = lv.zeros + lv.rank1(r);
            }
        }
        key
    }

    /// Count and value sum of positions in `[l, r)` whose key is `< bound`.
    fn below(&self, mut l: usize, mut r: usize, bound: usize) -> (usize, f64) {
        if bound >= 1 << self.key_bits {
            return (r - l, self.base[r] - self.base[l]);
        }
        let mut count = 0;
        let mut sum = 0.0;
        for lv in &self.levels {
            if (bound >> lv.bit) & 1 == 1 {
                let (a, b) = (lv.rank0(l), lv.rank0(r));
                count += b - a;
                sum += lv.sums[b] - lv.sums[a];
                l = lv.zeros + lv.rank1(l);
                r = lv.zeros + lv.rank1(r);
            } else {
                l = lv.rank0(l);
                r = lv.rank0(r);
            }
        }
        (count, sum)
    }

    pub fn query(&self, seg: SegmentRef, p: f64) -> Result<TailQuery> {
        check_probability(p)?;
        if seg.m > self.n {
            return Err(Error::InvalidSegment {
                l: seg.l,
                m: seg.m,
                len: self.n,
            });
        }
        let (l, r) = (seg.l - 1, seg.m);
        let c = r - l;
        let k = var_rank(c, p);
        // keys are descending ranks: the k-th smallest value is the (c-k)-th smallest key
        let d = self.kth_key(l, r, c - k);
        let (count, sum) = self.below(l, r, self.tie_end[d] + 1);
        Ok(TailQuery {
            var: self.sorted[d],
            sum,
            count,
        })
    }
}

/// ES on a segment through the indexed backend.
pub fn segment_es(index: &SegmentIndex, seg: SegmentRef, p: f64) -> Result<f64> {
    let q = index.query(seg, p)?;
    Ok(es_from_sum(q.sum, seg.len(), p))
}

/// ES on a segment by extracting it and evaluating the plug-in estimator.
pub fn segment_es_naive(values: &[f64], seg: SegmentRef, p: f64) -> Result<f64> {
    if seg.m > values.len() || seg.l == 0 || seg.l > seg.m {
        return Err(Error::InvalidSegment {
            l: seg.l,
            m: seg.m,
            len: values.len(),
        });
    }
    es_estimate(&values[seg.l - 1..seg.m], p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn whole_series_and_single_point() {
        let xs = [0.3, -1.2, 2.2, 0.9, 1.1, -0.4, 3.0];
        let idx = SegmentIndex::build(&xs);
        let whole = SegmentRef::new(1, 7, 7).unwrap();
        let a = segment_es(&idx, whole, 0.8).unwrap();
        assert!((a - es_estimate(&xs, 0.8).unwrap()).abs() < 1e-12);
        for l in 1..=7 {
            let s = SegmentRef::new(l, l, 7).unwrap();
            let v = segment_es(&idx, s, 0.75).unwrap();
            assert!((v - xs[l - 1] / 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let idx = SegmentIndex::build(&[1.0, 2.0]);
        assert!(idx.query(SegmentRef { l: 1, m: 3 }, 0.5).is_err());
        assert!(SegmentRef::new(2, 1, 2).is_err());
        assert!(segment_es_naive(&[1.0], SegmentRef { l: 1, m: 2 }, 0.5).is_err());
    }

    #[test]
    fn backends_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(1..120);
            let xs: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.2) { rng.random_range(0..5) as f64 } else { rng.random_range(0.5..10.0) })
                .collect();
            let l = rng.random_range(1..=n);
            let m = rng.random_range(l..=n);
            let p = rng.random_range(0.05..0.99);
            let seg = SegmentRef::new(l, m, n).unwrap();
            let idx = SegmentIndex::build(&xs);
            let a = segment_es(&idx, seg, p).unwrap();
            let b = segment_es_naive(&xs, seg, p).unwrap();
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-12), "{a} vs {b}");
        }
    }
}
