use super::*;
use crate::error::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn direct_energy(w: &[f64], a: usize, b: usize) -> f64 {
    let n = (w.len() - 1) as f64;
    (a..=b)
        .map(|j| {
            let frac = (j - a) as f64 / (b - a) as f64;
            (w[j] - w[a] - frac * (w[b] - w[a])).powi(2)
        })
        .sum::<f64>()
        / n
}

fn direct_g(path: &BrownianPath, trim: f64) -> f64 {
    let w = path.values();
    let n = path.steps();
    let (lo, hi) = g_candidates(n, trim);
    (lo..=hi)
        .map(|k| {
            let t = k as f64 / n as f64;
            (w[k] - t * w[n]).powi(2) / (direct_energy(w, 0, k) + direct_energy(w, k, n))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn direct_htilde(path: &BrownianPath, delta: f64) -> (f64, f64) {
    let w = path.values();
    let n = path.steps();
    let nf = n as f64;
    let bridge = |a: usize, j: usize, c: usize| {
        let frac = (j - a) as f64 / (c - a) as f64;
        (w[j] - w[a] - frac * (w[c] - w[a])).powi(2)
    };
    let mut f = f64::NEG_INFINITY;
    for (k2, lo, hi) in forward_pairs(n, delta) {
        for k1 in lo..=hi {
            let r = (k2 as f64 / nf) * bridge(0, k1, k2) / (direct_energy(w, 0, k1) + direct_energy(w, k1, k2));
            f = f.max(r);
        }
    }
    let mut b = f64::NEG_INFINITY;
    for (k1, lo, hi) in backward_pairs(n, delta) {
        for k2 in lo..=hi {
            let r = ((n - k1) as f64 / nf) * bridge(k1, k2, n) / (direct_energy(w, k1, k2) + direct_energy(w, k2, n));
            b = b.max(r);
        }
    }
    (f, b)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn zero_increments_give_zero_path() {
    let p = BrownianPath::from_increments(&[0.0; 20]).unwrap();
    assert!(p.values().iter().all(|&x| x == 0.0));
    assert!(matches!(lobato_pivot(&p), Err(Error::Degenerate { .. })));
    assert!(g_functional(&p, 0.1).is_err());
}

#[test]
fn linear_path_has_no_bridge() {
    let p = BrownianPath::from_increments(&[1.0; 50]).unwrap();
    assert!((p.values()[50] - 50f64.sqrt()).abs() < 1e-12);
    // W(t) - t W(1) vanishes identically
    assert!(matches!(lobato_pivot(&p), Err(Error::Degenerate { .. })));
}

#[test]
fn too_few_steps() {
    assert!(BrownianPath::simulate(9, 1, 0).is_err());
}

#[test]
fn same_seed_same_path() {
    let a = BrownianPath::simulate(100, 17, 3).unwrap();
    let b = BrownianPath::simulate(100, 17, 3).unwrap();
    assert_eq!(a.values(), b.values());
    assert_eq!(a.values()[0], 0.0);
    assert_eq!(a.provenance(), (17, 3));
}

#[test]
fn terminal_variance_is_one() {
    let xs: Vec<f64> = (0..10_000)
        .map(|i| BrownianPath::simulate(50, 2024, i).unwrap().values()[50])
        .collect();
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    assert!((0.97..=1.03).contains(&v), "var {v}");
}

#[test]
fn energy_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in 0..20 {
        let path = BrownianPath::simulate(500, 99, s).unwrap();
        let sums = BridgeSums::new(&path);
        for _ in 0..50 {
            let a = rng.random_range(0..499);
            let b = rng.random_range(a + 1..=500);
            let e = sums.energy(a, b);
            let d = direct_energy(path.values(), a, b);
            // the O(1) form resolves energies to rounding of sum W_j^2 over the range
            let w = path.values();
            let raw: f64 = (a..=b).map(|j| w[j] * w[j]).sum::<f64>() / 500.0;
            assert!((e - d).abs() <= 1e-9 * d + 1e-12 * raw, "{a} {b}: {e} vs {d}");
        }
    }
}

#[test]
fn g_matches_direct_quadrature() {
    for s in 0..20 {
        let path = BrownianPath::simulate(500, 5, s).unwrap();
        let g = g_functional(&path, 0.02).unwrap();
        assert!(g >= 0.0);
        assert!(rel(g, direct_g(&path, 0.02)) < 1e-9);
    }
}

#[test]
fn htilde_matches_direct_quadrature() {
    for s in 0..20 {
        let path = BrownianPath::simulate(500, 6, s).unwrap();
        let h = htilde_parts(&path, 0.1).unwrap();
        let (f, b) = direct_htilde(&path, 0.1);
        assert!(h.forward >= 0.0 && h.backward >= 0.0);
        assert!(rel(h.forward, f) < 1e-9);
        assert!(rel(h.backward, b) < 1e-9);
    }
}

#[test]
fn htilde_reversal_swaps_parts() {
    for s in 0..20 {
        let path = BrownianPath::simulate(400, 8, s).unwrap();
        let h = htilde_parts(&path, 0.1).unwrap();
        let r = htilde_parts(&path.reversed(), 0.1).unwrap();
        assert!(rel(h.forward, r.backward) < 1e-9, "{} {}", h.forward, r.backward);
        assert!(rel(h.backward, r.forward) < 1e-9);
    }
}

#[test]
fn functionals_are_scale_invariant() {
    let path = BrownianPath::simulate(300, 12, 0).unwrap();
    for lambda in [0.25, 2.0, 1024.0] {
        let scaled = path.scaled(lambda);
        assert_eq!(g_functional(&path, 0.05).unwrap(), g_functional(&scaled, 0.05).unwrap());
        assert_eq!(htilde_functional(&path, 0.1).unwrap(), htilde_functional(&scaled, 0.1).unwrap());
        assert_eq!(lobato_pivot(&path).unwrap(), lobato_pivot(&scaled).unwrap());
    }
    let g = g_functional(&path, 0.05).unwrap();
    assert!(rel(g, g_functional(&path.scaled(3.7), 0.05).unwrap()) < 1e-12);
}

#[test]
fn coarse_grid_values() {
    let g = coarse_grid(0.1);
    assert_eq!(g.len(), 21);
    assert!((g[0] - 0.0).abs() < 1e-12 && (g[10] - 0.5).abs() < 1e-12 && (g[20] - 1.0).abs() < 1e-12);
    assert!(htilde_functional(&BrownianPath::simulate(100, 1, 1).unwrap(), 0.4).is_err());
}

#[test]
fn constant_functional_table() {
    let key = TableKey {
        functional: Functional::Lobato,
        param: 0.0,
        steps: 10,
        paths: 100,
        seed: 1,
    };
    let t = estimate_quantiles_with(&key, &[0.5], |_| Ok(7.0)).unwrap();
    assert_eq!(t.quantiles, vec![QuantileEntry { q: 0.5, value: 7.0 }]);
    let few = TableKey { paths: 99, ..key };
    assert!(estimate_quantiles_with(&few, &[0.5], |_| Ok(7.0)).is_err());
}

#[test]
fn quantile_is_order_statistic() {
    let xs: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_eq!(empirical_quantile(&xs, 0.95), 95.0);
    assert_eq!(empirical_quantile(&xs, 0.951), 96.0);
    assert_eq!(empirical_quantile(&xs, 0.001), 1.0);
}

#[test]
fn tables_are_deterministic_across_thread_counts() {
    let key = TableKey {
        functional: Functional::G,
        param: 0.05,
        steps: 200,
        paths: 300,
        seed: 44,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_quantiles(&key, &DEFAULT_LEVELS).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.quantiles.windows(2).all(|w| w[0].value <= w[1].value));
}

#[test]
fn table_round_trip_and_lookup() {
    let key = TableKey {
        functional: Functional::Htilde,
        param: 0.1,
        steps: 100,
        paths: 100,
        seed: 3,
    };
    let t = estimate_quantiles(&key, &[0.9, 0.95]).unwrap();
    let text = t.to_json();
    let back = CriticalValueTable::from_json(&text).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_json(), text);

    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(lookup(dir.path(), &key), Err(Error::MissingCriticalValue(_))));
    let loaded = load_or_simulate(dir.path(), &key).unwrap();
    assert_eq!(loaded.quantile(0.95).unwrap(), t.quantile(0.95).unwrap());
    assert_eq!(lookup(dir.path(), &key).unwrap(), loaded);
    assert!(t.quantile(0.95).is_ok());
    assert!(t.quantile(0.99).is_err());
    assert!(t.ensure_matches(Functional::Htilde, Some(0.1)).is_ok());
    assert!(t.ensure_matches(Functional::Htilde, Some(0.05)).is_err());
    assert!(t.ensure_matches(Functional::G, None).is_err());
}
