use crate::error::{Error, Result};
use crate::series::check_probability;

use super::var_rank;

/// Binary indexed tree over `0..n` with point update and prefix query.
#[derive(Debug, Clone)]
pub struct Fenwick<T> {
    tree: Vec<T>,
}

impl<T> Fenwick<T>
where
    T: Copy + Default + std::ops::AddAssign,
{
    pub fn new(n: usize) -> Self {
        Self {
            tree: vec![T::default(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn add(&mut self, mut idx: usize, value: T) {
        while idx < self.tree.len() {
            self.tree[idx] += value;
            idx |= idx + 1;
        }
    }

    /// Sum over `0..idx` (exclusive).
    pub fn prefix(&self, idx: usize) -> T {
        let mut acc = T::default();
        let mut r = idx;
        while r > 0 {
            acc += self.tree[r - 1];
            r &= r - 1;
        }
        acc
    }

    pub fn clear(&mut self) {
        self.tree.fill(T::default());
    }
}

impl Fenwick<u32> {
    /// Smallest `idx` with `prefix(idx + 1) >= k`, for `k >= 1`.
    pub fn lower_bound(&self, mut k: u32) -> usize {
        let n = self.tree.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] < k {
                pos = next;
                k -= self.tree[next - 1];
            }
            step >>= 1;
        }
        pos
    }
}

/// Result of a tail query: VaR, sum of weights of observations at or above
/// the VaR, and how many there are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    pub var: f64,
    pub sum: f64,
    pub count: usize,
}

/// Order-statistic index over the observations of one series.
///
/// Observations are ranked once by a stable descending sort. Two Fenwick
/// trees over that rank space hold the count and the weight sum of the
/// currently inserted observations, so inserting an observation and
/// querying VaR, exceedance sum and exceedance count each cost `O(log n)`.
/// The weight defaults to the value itself (ES); CTM uses `x^beta`.
#[derive(Debug, Clone)]
pub struct TailIndex {
    /// values in descending order
    sorted: Vec<f64>,
    /// descending position of each observation
    position: Vec<usize>,
    /// last descending position holding the same value
    tie_end: Vec<usize>,
    weights: Vec<f64>,
    counts: Fenwick<u32>,
    sums: Fenwick<f64>,
    present: Vec<bool>,
    inserted: usize,
}

impl TailIndex {
    pub fn build(values: &[f64]) -> Self {
        Self::with_weights(values, values)
    }

    pub fn with_weights(values: &[f64], weights: &[f64]) -> Self {
        assert_eq!(values.len(), weights.len());
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        // stable: equal values keep index order
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut position = vec![0; n];
        for (d, &i) in order.iter().enumerate() {
            position[i] = d;
        }
        let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let mut tie_end = vec![0; n];
        for d in (0..n).rev() {
            tie_end[d] = if d + 1 < n && sorted[d + 1] == sorted[d] {
                tie_end[d + 1]
            } else {
                d
            };
        }
        Self {
            sorted,
            position,
            tie_end,
            weights: weights.to_vec(),
            counts: Fenwick::new(n),
            sums: Fenwick::new(n),
            present: vec![false; n],
            inserted: 0,
        }
    }

    /// Number of observations the index was built over.
    pub fn capacity(&self) -> usize {
        self.position.len()
    }

    pub(crate) fn position_of(&self, i: usize) -> usize {
        self.position[i]
    }

    pub(crate) fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    pub(crate) fn tie_ends(&self) -> &[usize] {
        &self.tie_end
    }

    /// Number of currently inserted observations.
    pub fn len(&self) -> usize {
        self.inserted
    }

    pub fn is_empty(&self) -> bool {
        self.inserted == 0
    }

    /// Inserts observation `i` (0-based). Inserting twice is a no-op.
    pub fn insert(&mut self, i: usize) {
        if self.present[i] {
            return;
        }
        self.present[i] = true;
        let d = self.position[i];
        self.counts.add(d, 1);
        self.sums.add(d, self.weights[i]);
        self.inserted += 1;
    }

    pub fn clear(&mut self) {
        self.counts.clear();
        self.sums.clear();
        self.present.fill(false);
        self.inserted = 0;
    }

    pub fn query(&self, p: f64) -> Result<TailQuery> {
        check_probability(p)?;
        if self.inserted == 0 {
            return Err(Error::EmptySample);
        }
        let c = self.inserted;
        let k = var_rank(c, p);
        // k-th smallest is the (c - k + 1)-th largest
        let d = self.counts.lower_bound((c - k + 1) as u32);
        let end = self.tie_end[d] + 1;
        Ok(TailQuery {
            var: self.sorted[d],
            sum: self.sums.prefix(end),
            count: self.counts.prefix(end) as usize,
        })
    }
}
