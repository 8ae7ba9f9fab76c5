use crate::error::{Error, Result};
use crate::rng::Stream;

/// Brownian motion on `[0, 1]` sampled at `k / N`, `k = 0..=N`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    w: Vec<f64>,
    seed: u64,
    stream: u64,
}

pub const MIN_STEPS: usize = 10;

impl BrownianPath {
    /// `W(k/N) = N^(-1/2) * sum_{j <= k} Z_j` with `Z_j` from the stream.
    pub fn simulate(steps: usize, seed: u64, stream: u64) -> Result<Self> {
        let mut rng = Stream::new(seed, stream);
        let z: Vec<f64> = (0..check_steps(steps)?).map(|_| rng.normal()).collect();
        let mut path = Self::from_increments(&z)?;
        path.seed = seed;
        path.stream = stream;
        Ok(path)
    }

    /// Path built from given standard-normal increments.
    pub fn from_increments(z: &[f64]) -> Result<Self> {
        let steps = check_steps(z.len())?;
        let scale = 1.0 / (steps as f64).sqrt();
        let mut w = Vec::with_capacity(steps + 1);
        w.push(0.0);
        let mut acc = 0.0;
        for &x in z {
            acc += x;
            w.push(acc * scale);
        }
        Ok(Self { w, seed: 0, stream: 0 })
    }

    pub fn steps(&self) -> usize {
        self.w.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn provenance(&self) -> (u64, u64) {
        (self.seed, self.stream)
    }

    /// Multiplies the path by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            w: self.w.iter().map(|x| x * factor).collect(),
            ..*self
        }
    }

    /// The time-reversed path `W(1) - W(1 - t)`.
    pub fn reversed(&self) -> Self {
        let n = self.steps();
        let last = self.w[n];
        Self {
            w: (0..=n).map(|k| last - self.w[n - k]).collect(),
            ..*self
        }
    }
}

fn check_steps(steps: usize) -> Result<usize> {
    if steps < MIN_STEPS {
        Err(Error::invalid(format!("at least {MIN_STEPS} steps required, got {steps}")))
    } else {
        Ok(steps)
    }
}

/// Cumulative sums that give every Brownian-bridge energy
/// `B(a, b) = N^-1 sum_{j=a}^{b} (W_j - W_a - (j - a)/(b - a) (W_b - W_a))^2`
/// in `O(1)`.
///
/// Both endpoint terms vanish, so left and right Riemann sums agree. The
/// running sums carry their rounding error in a second word so that range
/// differences are accurate to the size of the range, not of the prefix.
#[derive(Debug, Clone)]
pub struct BridgeSums<'a> {
    w: &'a [f64],
    // index j: sums over 0..j, as (hi, lo)
    s1: Vec<(f64, f64)>,
    s2: Vec<(f64, f64)>,
    sj: Vec<(f64, f64)>,
}

#[inline]
fn push_compensated(out: &mut Vec<(f64, f64)>, x: f64) {
    let (hi, lo) = *out.last().unwrap();
    let s = hi + x;
    let bb = s - hi;
    let err = (hi - (s - bb)) + (x - bb);
    out.push((s, lo + err));
}

#[inline]
fn range(v: &[(f64, f64)], a: usize, b: usize) -> f64 {
    (v[b].0 - v[a].0) + (v[b].1 - v[a].1)
}

impl<'a> BridgeSums<'a> {
    pub fn new(path: &'a BrownianPath) -> Self {
        Self::from_values(path.values())
    }

    pub fn from_values(w: &'a [f64]) -> Self {
        let len = w.len();
        let mut s1 = Vec::with_capacity(len + 1);
        let mut s2 = Vec::with_capacity(len + 1);
        let mut sj = Vec::with_capacity(len + 1);
        s1.push((0.0, 0.0));
        s2.push((0.0, 0.0));
        sj.push((0.0, 0.0));
        for (j, &x) in w.iter().enumerate() {
            push_compensated(&mut s1, x);
            push_compensated(&mut s2, x * x);
            push_compensated(&mut sj, j as f64 * x);
        }
        Self { w, s1, s2, sj }
    }

    fn steps(&self) -> usize {
        self.w.len() - 1
    }

    /// Bridge energy over grid indices `a < b`.
    #[inline]
    pub fn energy(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a < b);
        if b - a == 1 {
            return 0.0;
        }
        let wa = self.w[a];
        let l = (b - a) as f64;
        let m = l + 1.0;
        let sum1 = range(&self.s1, a, b + 1);
        let sum2 = range(&self.s2, a, b + 1);
        let sumj = range(&self.sj, a, b + 1);
        let slope = (self.w[b] - wa) / l;
        let dd = sum2 - 2.0 * wa * sum1 + m * wa * wa;
        let ud = sumj - a as f64 * sum1 - wa * l * m / 2.0;
        let uu = l * m * (2.0 * l + 1.0) / 6.0;
        ((dd - 2.0 * slope * ud + slope * slope * uu) / self.steps() as f64).max(0.0)
    }

    /// Squared bridge deviation at `j` of the bridge pinned at `a` and `c`.
    #[inline]
    pub fn deviation_sq(&self, a: usize, j: usize, c: usize) -> f64 {
        let wa = self.w[a];
        let frac = (j - a) as f64 / (c - a) as f64;
        let d = self.w[j] - wa - frac * (self.w[c] - wa);
        d * d
    }
}

/// `|W(1)| / sqrt(int_0^1 (W(t) - t W(1))^2 dt)`.
pub fn lobato_pivot(path: &BrownianPath) -> Result<f64> {
    let sums = BridgeSums::new(path);
    let n = path.steps();
    let denom = sums.energy(0, n);
    if denom <= 0.0 {
        return Err(Error::Degenerate {
            what: "bridge energy",
            center: 0.0,
        });
    }
    Ok(path.values()[n].abs() / denom.sqrt())
}

/// Candidate indices `k` of the single change-point functional.
pub fn g_candidates(steps: usize, trim_fraction: f64) -> (usize, usize) {
    let lo = ((trim_fraction * steps as f64) - 1e-9).ceil().max(1.0) as usize;
    let hi = ((1.0 - trim_fraction) * steps as f64 + 1e-9).floor() as usize;
    (lo, hi.min(steps - 1))
}

/// Supremum over `t = k/N` in the trimmed range of
/// `(W(t) - t W(1))^2 / (B(0, t) + B(t, 1))`.
pub fn g_functional(path: &BrownianPath, trim_fraction: f64) -> Result<f64> {
    if !(trim_fraction > 0.0 && trim_fraction < 0.5) {
        return Err(Error::invalid(format!("trim fraction must be in (0, 0.5), got {trim_fraction}")));
    }
    let sums = BridgeSums::new(path);
    let n = path.steps();
    let (lo, hi) = g_candidates(n, trim_fraction);
    let mut best: Option<f64> = None;
    for k in lo..=hi {
        let denom = sums.energy(0, k) + sums.energy(k, n);
        if denom > 0.0 {
            let r = sums.deviation_sq(0, k, n) / denom;
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best.ok_or(Error::Degenerate {
        what: "self-normalizer",
        center: 0.0,
    })
}

/// `{(1 + k delta)/2 : k integer} ∩ [0, 1]`, ascending.
pub fn coarse_grid(delta: f64) -> Vec<f64> {
    let kmax = (1.0 / delta + 1e-9).floor() as i64;
    (-kmax..=kmax).map(|k| (1.0 + k as f64 * delta) / 2.0).filter(|s| (0.0..=1.0).contains(s)).collect()
}

#[inline]
fn floor_index(n: usize, s: f64) -> usize {
    (n as f64 * s + 1e-9).floor() as usize
}

#[inline]
fn ceil_index(n: usize, s: f64) -> usize {
    (n as f64 * s - 1e-9).ceil().max(0.0) as usize
}

/// Integer form of the trimmed simplex `{(s, t) in [delta, 1 - delta]^2 : t - s >= delta}`:
/// `lo <= k1`, `k2 <= hi`, `k2 - k1 >= gap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simplex {
    pub lo: usize,
    pub hi: usize,
    pub gap: usize,
}

impl Simplex {
    pub fn new(n: usize, delta: f64) -> Self {
        Self {
            lo: ceil_index(n, delta).max(1),
            hi: floor_index(n, 1.0 - delta),
            gap: ceil_index(n, delta).max(1),
        }
    }
}

/// Forward candidates `(k2, k1_lo, k1_hi)`: `k2 = [n s2]` for `s2` on the
/// coarse grid, or every admissible `k2` when `full` is set.
pub fn forward_pairs_in(n: usize, delta: f64, full: bool) -> Vec<(usize, usize, usize)> {
    let d = Simplex::new(n, delta);
    let ends: Vec<usize> = if full {
        (d.lo + d.gap..=d.hi).collect()
    } else {
        coarse_grid(delta).into_iter().map(|s| floor_index(n, s)).collect()
    };
    ends.into_iter()
        .filter(|&k2| k2 >= d.lo + d.gap && k2 <= d.hi)
        .map(|k2| (k2, d.lo, k2 - d.gap))
        .collect()
}

/// Backward candidates `(k1, k2_lo, k2_hi)` with `k1 = [n t1]` on the grid.
pub fn backward_pairs_in(n: usize, delta: f64, full: bool) -> Vec<(usize, usize, usize)> {
    let d = Simplex::new(n, delta);
    if d.hi < d.gap {
        return Vec::new();
    }
    let starts: Vec<usize> = if full {
        (d.lo..=d.hi - d.gap).collect()
    } else {
        coarse_grid(delta).into_iter().map(|s| floor_index(n, s)).collect()
    };
    starts
        .into_iter()
        .filter(|&k1| k1 >= d.lo && k1 + d.gap <= d.hi)
        .map(|k1| (k1, k1 + d.gap, d.hi))
        .collect()
}

pub fn forward_pairs(n: usize, delta: f64) -> Vec<(usize, usize, usize)> {
    forward_pairs_in(n, delta, false)
}

pub fn backward_pairs(n: usize, delta: f64) -> Vec<(usize, usize, usize)> {
    backward_pairs_in(n, delta, false)
}

/// Forward and backward suprema of the grid-approximated multiple
/// change-point functional.
///
/// With `Bridge(r1, r2, r3) = W(r2) - W(r1) - (r2 - r1)/(r3 - r1) (W(r3) - W(r1))`
/// and `E(a, b)` the bridge energy on `[a, b]`, the ratio on a window
/// `[r1, r3]` split at `r2` is
///
/// ```text
/// (r3 - r1) * Bridge(r1, r2, r3)^2 / (E(r1, r2) + E(r2, r3))
/// ```
///
/// The factor `r3 - r1` is the limit of the data statistic, whose numerator
/// is normalized by the cube of the window length and its denominator by
/// the square. The forward part uses windows `[0, s2]` with `s2` on the
/// coarse grid, the backward part windows `[t1, 1]` with `t1` on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HtildeParts {
    pub forward: f64,
    pub backward: f64,
}

impl HtildeParts {
    pub fn total(&self) -> f64 {
        self.forward + self.backward
    }
}

pub fn htilde_parts(path: &BrownianPath, delta: f64) -> Result<HtildeParts> {
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::invalid(format!("delta must be in (0, 1/3), got {delta}")));
    }
    let sums = BridgeSums::new(path);
    let n = path.steps();
    let nf = n as f64;
    let fwd = forward_pairs(n, delta);
    let bwd = backward_pairs(n, delta);
    if fwd.is_empty() || bwd.is_empty() {
        return Err(Error::invalid(format!("empty candidate set for delta {delta} and {n} steps")));
    }
    let degenerate = Error::Degenerate {
        what: "self-normalizer",
        center: 0.0,
    };
    let mut forward: Option<f64> = None;
    for &(k2, lo, hi) in &fwd {
        for k1 in lo..=hi {
            let d = sums.energy(0, k1) + sums.energy(k1, k2);
            if d > 0.0 {
                let r = k2 as f64 / nf * sums.deviation_sq(0, k1, k2) / d;
                forward = Some(forward.map_or(r, |b: f64| b.max(r)));
            }
        }
    }
    let mut backward: Option<f64> = None;
    for &(k1, lo, hi) in &bwd {
        for k2 in lo..=hi {
            let d = sums.energy(k1, k2) + sums.energy(k2, n);
            if d > 0.0 {
                let r = (n - k1) as f64 / nf * sums.deviation_sq(k1, k2, n) / d;
                backward = Some(backward.map_or(r, |b: f64| b.max(r)));
            }
        }
    }
    Ok(HtildeParts {
        forward: forward.ok_or(degenerate.clone())?,
        backward: backward.ok_or(degenerate)?,
    })
}

pub fn htilde_functional(path: &BrownianPath, delta: f64) -> Result<f64> {
    htilde_parts(path, delta).map(|h| h.total())
}
