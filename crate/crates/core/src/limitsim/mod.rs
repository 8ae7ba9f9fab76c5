//! Monte Carlo simulation of the pivotal limit distributions that supply
//! critical values.
//!
//! Path `i` of a run with master seed `s` is drawn from stream `(s, i)`, so
//! a table depends only on its key and never on how many threads computed it.

mod functionals;
mod table;

pub use functionals::{
    backward_pairs, backward_pairs_in, coarse_grid, forward_pairs, forward_pairs_in, g_candidates, g_functional, htilde_functional,
    htilde_parts, lobato_pivot, BridgeSums, BrownianPath, HtildeParts, Simplex, MIN_STEPS,
};
pub use table::{
    cache_dir, lookup, CriticalValueTable, Functional, FunctionalParams, QuantileEntry, TableKey,
    CACHE_DIR_ENV, DEFAULT_LEVELS,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::check_probability;

/// Paper-scale path count and discretization.
pub const REFERENCE_PATHS: usize = 10_000;
pub const REFERENCE_STEPS: usize = 5_000;
/// Master seed of the reference tables.
pub const REFERENCE_SEED: u64 = 7;

/// Trim fraction of the single change-point functional by default.
pub const DEFAULT_G_TRIM: f64 = 0.01;
/// Trim of the multiple change-point functional by default.
pub const DEFAULT_DELTA: f64 = 0.10;

/// Value of a functional on one path.
pub fn evaluate(functional: Functional, param: f64, path: &BrownianPath) -> Result<f64> {
    match functional {
        Functional::Lobato => lobato_pivot(path),
        Functional::G => g_functional(path, param),
        Functional::Htilde => htilde_functional(path, param),
    }
}

/// `ceil(q * m)`-th order statistic of `sorted` (no interpolation).
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let k = ((q * m as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(m) - 1]
}

/// Draws `key.paths` functional values and tabulates their quantiles.
pub fn estimate_quantiles(key: &TableKey, qs: &[f64]) -> Result<CriticalValueTable> {
    let (functional, param) = (key.functional, key.param);
    estimate_quantiles_with(key, qs, |path| evaluate(functional, param, path))
}

/// As [`estimate_quantiles`] with an arbitrary per-path functional.
pub fn estimate_quantiles_with<F>(key: &TableKey, qs: &[f64], f: F) -> Result<CriticalValueTable>
where
    F: Fn(&BrownianPath) -> Result<f64> + Sync,
{
    let values = simulate_values(key, f)?;
    tabulate(key, qs, values)
}

/// Functional values on paths `0..key.paths`, in path order.
pub fn simulate_values<F>(key: &TableKey, f: F) -> Result<Vec<f64>>
where
    F: Fn(&BrownianPath) -> Result<f64> + Sync,
{
    if key.paths < 100 {
        return Err(Error::invalid(format!("at least 100 paths required, got {}", key.paths)));
    }
    (0..key.paths)
        .into_par_iter()
        .map(|i| {
            let path = BrownianPath::simulate(key.steps, key.seed, i as u64)?;
            f(&path)
        })
        .collect()
}

fn tabulate(key: &TableKey, qs: &[f64], mut values: Vec<f64>) -> Result<CriticalValueTable> {
    let mut levels = qs.to_vec();
    for &q in &levels {
        check_probability(q)?;
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    values.sort_by(f64::total_cmp);
    let quantiles = levels
        .iter()
        .map(|&q| QuantileEntry {
            q,
            value: empirical_quantile(&values, q),
        })
        .collect();
    Ok(CriticalValueTable {
        functional: key.functional,
        params: key.params(),
        steps: key.steps,
        paths: key.paths,
        seed: key.seed,
        quantiles,
        created: None,
    })
}

/// Cached table for `key`, simulating and storing it when absent.
pub fn load_or_simulate(dir: &std::path::Path, key: &TableKey) -> Result<CriticalValueTable> {
    match lookup(dir, key) {
        Ok(t) => Ok(t),
        Err(Error::MissingCriticalValue(_)) => {
            let table = estimate_quantiles(key, &DEFAULT_LEVELS)?;
            table.save(&dir.join(key.file_name()))?;
            Ok(table)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests;
