use super::*;
use crate::estimators::es_estimate;
use crate::limitsim::{estimate_quantiles_with, Functional, TableKey};
use crate::rng::Stream;
use crate::series::{RiskSpec, TimeSeries};
use proptest::prelude::*;

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut s = Stream::new(seed, 0);
    (0..n).map(|_| s.normal()).collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// `T_{a:b}` by sorting the segment.
fn es(x: &[f64], p: f64, a: usize, b: usize) -> f64 {
    es_estimate(&x[a - 1..b], p).unwrap()
}

/// Literal single-change statistic: every estimate recomputed from scratch.
fn brute_gn(x: &[f64], p: f64, trim: &TrimPolicy) -> (f64, usize) {
    let n = x.len();
    let nf = n as f64;
    let outer = trim.outer(n);
    let mut best = (f64::NEG_INFINITY, 0);
    for k in outer..=n - outer {
        let t = k as f64 / nf;
        let num = (t * (1.0 - t)).powi(2) * (es(x, p, 1, k) - es(x, p, k + 1, n)).powi(2);
        let mut den = 0.0;
        for i in trim.i_min..=k {
            den += (i as f64 / nf).powi(2) * (es(x, p, 1, i) - es(x, p, 1, k)).powi(2) / nf;
        }
        for i in k + 1..=n {
            if n - i + 1 >= trim.i_min {
                den += ((n - i + 1) as f64 / nf).powi(2) * (es(x, p, i, n) - es(x, p, k + 1, n)).powi(2) / nf;
            }
        }
        if num / den > best.0 {
            best = (num / den, k);
        }
    }
    best
}

/// Literal forward/backward statistic over the candidate sets of `options`.
fn brute_hn(x: &[f64], p: f64, options: &HnOptions) -> (f64, f64) {
    let n = x.len();
    let m = options.i_min;
    let full = options.mode == GridMode::Full;
    let ok = |a: usize, b: usize| b + 1 >= a + m;
    let mut fwd = f64::NEG_INFINITY;
    for (k2, lo, hi) in crate::limitsim::forward_pairs_in(n, options.delta, full) {
        for k1 in lo..=hi {
            let (k1f, k2f) = (k1 as f64, k2 as f64);
            let c = k1f.powi(2) * (k2f - k1f).powi(2) / k2f.powi(3) * (es(x, p, 1, k1) - es(x, p, k1 + 1, k2)).powi(2);
            let mut d = 0.0;
            for i in 1..=k1 {
                let w = (i as f64).powi(2) * (k1f - i as f64).powi(2) / (k2f.powi(2) * k1f.powi(2));
                if w > 0.0 && ok(1, i) && ok(i + 1, k1) {
                    d += w * (es(x, p, 1, i) - es(x, p, i + 1, k1)).powi(2);
                }
            }
            for i in k1 + 1..=k2 {
                let w = ((i - 1 - k1) as f64).powi(2) * ((k2 - i + 1) as f64).powi(2) / (k2f.powi(2) * (k2f - k1f).powi(2));
                if w > 0.0 && ok(k1 + 1, i - 1) && ok(i, k2) {
                    d += w * (es(x, p, k1 + 1, i - 1) - es(x, p, i, k2)).powi(2);
                }
            }
            fwd = fwd.max(c / d);
        }
    }
    let mut bwd = f64::NEG_INFINITY;
    let nf = n as f64;
    for (k1, lo, hi) in crate::limitsim::backward_pairs_in(n, options.delta, full) {
        for k2 in lo..=hi {
            let (k1f, k2f) = (k1 as f64, k2 as f64);
            let c = (k2f - k1f).powi(2) * (nf - k2f + 1.0).powi(2) / (nf - k1f + 1.0).powi(3)
                * (es(x, p, k2, n) - es(x, p, k1, k2 - 1)).powi(2);
            let mut d = 0.0;
            for i in k1..k2 {
                let w = ((i - k1 + 1) as f64).powi(2) * ((k2 - 1 - i) as f64).powi(2)
                    / ((nf - k1f + 1.0).powi(2) * (k2f - k1f).powi(2));
                if w > 0.0 && ok(k1, i) && ok(i + 1, k2 - 1) {
                    d += w * (es(x, p, k1, i) - es(x, p, i + 1, k2 - 1)).powi(2);
                }
            }
            for i in k2..=n {
                let w = ((i - k2) as f64).powi(2) * ((n - i + 1) as f64).powi(2)
                    / ((nf - k1f + 1.0).powi(2) * (nf - k2f - 1.0).powi(2));
                if w > 0.0 && ok(i, n) && ok(k2, i - 1) {
                    d += w * (es(x, p, i, n) - es(x, p, k2, i - 1)).powi(2);
                }
            }
            bwd = bwd.max(c / d);
        }
    }
    (fwd, bwd)
}

#[test]
fn gn_matches_brute_force() {
    let mut s = Stream::new(77, 1);
    for case in 0..60 {
        let n = 30 + (s.uniform() * 120.0) as usize;
        let p = [0.5, 0.8, 0.9][case % 3];
        let x = noise(n, case as u64);
        let trim = TrimPolicy::new(8, 1 + case % 4, 0.0).unwrap();
        let spec = RiskSpec::upper(p).unwrap();
        let g = gn_statistic(&TimeSeries::new(x.clone()).unwrap(), &spec, Measure::Es, &trim).unwrap();
        let (v, k) = brute_gn(&x, p, &trim);
        assert!(close(g.value, v, 1e-9), "n={n} p={p}: {} vs {v}", g.value);
        assert_eq!(g.argmax, k);
    }
}

#[test]
fn hn_grid_matches_brute_force() {
    let mut s = Stream::new(78, 1);
    for case in 0..25 {
        let n = 40 + (s.uniform() * 80.0) as usize;
        let p = [0.5, 0.75, 0.9][case % 3];
        let x = noise(n, 100 + case as u64);
        let options = HnOptions { delta: 0.1, mode: GridMode::Grid, i_min: 1 + case % 2 };
        let spec = RiskSpec::upper(p).unwrap();
        let h = hn_statistic(&TimeSeries::new(x.clone()).unwrap(), &spec, Measure::Es, &options).unwrap();
        let (f, b) = brute_hn(&x, p, &options);
        assert!(close(h.forward, f, 1e-9), "n={n}: {} vs {f}", h.forward);
        assert!(close(h.backward, b, 1e-9), "n={n}: {} vs {b}", h.backward);
    }
}

#[test]
fn hn_full_matches_brute_force() {
    for case in 0..4 {
        let n = 40 + 7 * case;
        let x = noise(n, 200 + case as u64);
        let options = HnOptions { delta: 0.15, mode: GridMode::Full, i_min: 2 };
        let spec = RiskSpec::upper(0.8).unwrap();
        let h = hn_statistic(&TimeSeries::new(x.clone()).unwrap(), &spec, Measure::Es, &options).unwrap();
        let (f, b) = brute_hn(&x, 0.8, &options);
        assert!(close(h.forward, f, 1e-9));
        assert!(close(h.backward, b, 1e-9));
    }
}

#[test]
fn constant_series_is_degenerate() {
    let x = TimeSeries::new(vec![3.0; 300]).unwrap();
    let spec = RiskSpec::upper(0.9).unwrap();
    let g = gn_statistic(&x, &spec, Measure::Es, &TrimPolicy::for_level(0.9));
    assert!(matches!(g, Err(Error::Degenerate { .. })), "{g:?}");
    let h = hn_statistic(&x, &spec, Measure::Es, &HnOptions::for_level(0.9));
    assert!(matches!(h, Err(Error::Degenerate { .. })));
}

#[test]
fn too_short_inputs_are_rejected() {
    let x = TimeSeries::new(noise(20, 1)).unwrap();
    let spec = RiskSpec::upper(0.9).unwrap();
    assert!(matches!(
        gn_statistic(&x, &spec, Measure::Es, &TrimPolicy::for_level(0.9)),
        Err(Error::TooShort { needed: 22, .. })
    ));
    assert!(matches!(
        hn_statistic(&x, &spec, Measure::Es, &HnOptions::for_level(0.9)),
        Err(Error::TooShort { needed: 220, .. })
    ));
    assert!(TrimPolicy::new(3, 5, 0.0).is_err());
}

#[test]
fn trim_policy_defaults() {
    let t = TrimPolicy::for_level(0.9);
    assert_eq!((t.n_min, t.i_min), (11, 11));
    assert_eq!(TrimPolicy::for_level(0.5).n_min, 8);
    assert_eq!(t.outer(400), 11);
    assert_eq!(t.outer(5000), 50);
    assert_eq!(TrimPolicy::for_spec(&RiskSpec::lower(0.05).unwrap()).i_min, 21);
}

#[test]
fn large_shift_is_detected() {
    let spec = RiskSpec::upper(0.9).unwrap();
    let trim = TrimPolicy::for_level(0.9);
    let mut hits = 0;
    for seed in 0..100 {
        let mut x = noise(400, 1000 + seed);
        x[200..].iter_mut().for_each(|v| *v += 10.0);
        let g = gn_statistic(&TimeSeries::new(x).unwrap(), &spec, Measure::Es, &trim).unwrap();
        if g.value > 40.1 {
            hits += 1;
        }
        if seed < 10 {
            assert!(g.argmax.abs_diff(200) <= 40);
        }
    }
    assert!(hits >= 99, "{hits}");
}

#[test]
fn traces_cover_candidates() {
    let x = TimeSeries::new(noise(120, 4)).unwrap();
    let spec = RiskSpec::upper(0.9).unwrap();
    let g = gn_statistic(&x, &spec, Measure::Es, &TrimPolicy::for_level(0.9)).unwrap();
    assert_eq!(g.trace.candidates, (11..=109).collect::<Vec<_>>());
    let i = g.argmax - 11;
    assert_eq!(g.trace.ratio[i], Some(g.value));
    assert_eq!(g.trace.numerator[i] / g.trace.denominator[i], g.value);
    let c = g.trace.cusum_argmax - 11;
    assert!(g.trace.numerator.iter().all(|&v| v <= g.trace.numerator[c]));
}

#[test]
fn argmax_prefers_first_maximizer() {
    let mut a = ArgMax::new();
    for (v, k) in [(1.0, 1), (3.0, 2), (3.0, 3), (2.0, 4)] {
        a.offer(v, k);
    }
    assert_eq!(a.get(), Some((3.0, 2)));
}

#[test]
fn single_test_reads_table() {
    let trim = TrimPolicy::for_level(0.9);
    let key = TableKey { functional: Functional::G, param: trim.trim_fraction, steps: 10, paths: 100, seed: 0 };
    let table = estimate_quantiles_with(&key, &[0.95], |_| Ok(40.0)).unwrap();
    let spec = RiskSpec::upper(0.9).unwrap();
    let x = TimeSeries::new(noise(200, 3)).unwrap();
    let r = single_test(&x, &spec, Measure::Es, 0.05, &trim, &table).unwrap();
    assert_eq!(r.critical_value, 40.0);
    assert_eq!(r.reject, r.statistic > 40.0);
    assert_eq!(r.location, Some(r.single.as_ref().unwrap().argmax));
    assert!(single_test(&x, &spec, Measure::Es, 0.01, &trim, &table).is_err());
    let other = TrimPolicy { trim_fraction: 0.05, ..trim };
    assert!(single_test(&x, &spec, Measure::Es, 0.05, &other, &table).is_err());
}

#[test]
fn multiple_test_requires_grid_and_matching_delta() {
    let options = HnOptions::for_level(0.9);
    let key = TableKey { functional: Functional::Htilde, param: options.delta, steps: 10, paths: 100, seed: 0 };
    let table = estimate_quantiles_with(&key, &[0.95], |_| Ok(130.0)).unwrap();
    let spec = RiskSpec::upper(0.9).unwrap();
    let x = TimeSeries::new(noise(300, 3)).unwrap();
    let r = multiple_test(&x, &spec, Measure::Es, 0.05, &options, &table).unwrap();
    assert_eq!(r.location, None);
    assert_eq!(r.reject, r.statistic > 130.0);
    let full = HnOptions { mode: GridMode::Full, ..options };
    assert!(multiple_test(&x, &spec, Measure::Es, 0.05, &full, &table).is_err());
    let other = HnOptions { delta: 0.05, ..options };
    assert!(multiple_test(&x, &spec, Measure::Es, 0.05, &other, &table).is_err());
}

#[test]
fn lower_tail_equals_upper_tail_of_negation() {
    let v = noise(300, 8);
    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
    let lower = RiskSpec::lower(0.1).unwrap();
    let upper = RiskSpec::upper(0.9).unwrap();
    let trim = TrimPolicy::for_level(0.9);
    let a = gn_statistic(&TimeSeries::new(v.clone()).unwrap(), &lower, Measure::Es, &trim).unwrap();
    let b = gn_statistic(&TimeSeries::new(neg.clone()).unwrap(), &upper, Measure::Es, &trim).unwrap();
    assert_eq!(a.value, b.value);
    let o = HnOptions::for_level(0.9);
    let a = hn_statistic(&TimeSeries::new(v).unwrap(), &lower, Measure::Es, &o).unwrap();
    let b = hn_statistic(&TimeSeries::new(neg).unwrap(), &upper, Measure::Es, &o).unwrap();
    assert_eq!(a.value, b.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn statistics_are_scale_invariant(seed in 0u64..10_000, k in -8i32..8, lambda in 0.01f64..100.0) {
        let x = TimeSeries::new(noise(240, seed)).unwrap();
        let spec = RiskSpec::upper(0.9).unwrap();
        let trim = TrimPolicy::for_level(0.9);
        let o = HnOptions { i_min: 5, ..HnOptions::for_level(0.9) };
        let g = gn_statistic(&x, &spec, Measure::Es, &trim).unwrap();
        let h = hn_statistic(&x, &spec, Measure::Es, &o).unwrap();
        let y = x.scaled(2f64.powi(k)).unwrap();
        let gy = gn_statistic(&y, &spec, Measure::Es, &trim).unwrap();
        let hy = hn_statistic(&y, &spec, Measure::Es, &o).unwrap();
        prop_assert_eq!(g.value, gy.value);
        prop_assert_eq!(g.argmax, gy.argmax);
        prop_assert_eq!(h.value, hy.value);
        let z = x.scaled(lambda).unwrap();
        let gz = gn_statistic(&z, &spec, Measure::Es, &trim).unwrap();
        let hz = hn_statistic(&z, &spec, Measure::Es, &o).unwrap();
        prop_assert!(close(g.value, gz.value, 1e-10));
        prop_assert!(close(h.value, hz.value, 1e-10));
    }

    #[test]
    fn gn_is_reversal_symmetric(seed in 0u64..10_000, n in 60usize..200) {
        let v = noise(n, seed);
        let mut r = v.clone();
        r.reverse();
        let spec = RiskSpec::upper(0.8).unwrap();
        let trim = TrimPolicy::for_level(0.8);
        let a = gn_statistic(&TimeSeries::new(v).unwrap(), &spec, Measure::Es, &trim).unwrap();
        let b = gn_statistic(&TimeSeries::new(r).unwrap(), &spec, Measure::Es, &trim).unwrap();
        // candidate k of the series is candidate n - k of its reversal
        let m = a.trace.ratio.len();
        for i in 0..m {
            let (x, y) = (a.trace.ratio[i].unwrap(), b.trace.ratio[m - 1 - i].unwrap());
            prop_assert!(close(x, y, 1e-10), "{} vs {}", x, y);
        }
    }

    #[test]
    fn grid_never_exceeds_full(seed in 0u64..10_000, n in 50usize..90) {
        let x = TimeSeries::new(noise(n, seed)).unwrap();
        let spec = RiskSpec::upper(0.75).unwrap();
        let grid = HnOptions { delta: 0.1, mode: GridMode::Grid, i_min: 2 };
        let full = HnOptions { mode: GridMode::Full, ..grid };
        let g = hn_statistic(&x, &spec, Measure::Es, &grid).unwrap();
        let f = hn_statistic(&x, &spec, Measure::Es, &full).unwrap();
        prop_assert!(g.forward <= f.forward && g.backward <= f.backward);
        prop_assert!(g.value >= 0.0);
    }
}
