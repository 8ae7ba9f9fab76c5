//! Monte Carlo replication harness for interval coverage and test power.
//!
//! Replication `r` draws its series from stream `(seed, offset + r)` at
//! every grid point, so grid points share random numbers and any split of
//! a run into disjoint offsets reproduces the pooled run's replications.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::{multiple_test, single_test, HnOptions, TrimPolicy};
use crate::ci::{section_estimates, sectioning_interval, sectioning_pivot, selfnorm_interval, DEFAULT_SECTIONS};
use crate::dgp::{inject_location_shift, Change, DgpSpec, Family, Init, Innovation};
use crate::error::{Error, Result};
use crate::estimators::Measure;
use crate::limitsim::CriticalValueTable;
use crate::numerics::{ks_distance, normal_pdf, normal_quantile, student_t_cdf};
use crate::series::RiskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// grid: sample sizes
    Coverage,
    /// grid unused
    TStatHist,
    /// grid: location shift magnitudes at the midpoint
    PowerLocation,
    /// grid: value of the first regime change of the template
    PowerGeneral,
    /// grid: value of the first regime change, both tests per replication
    PowerMulti,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dgp: DgpSpec,
    pub grid: Vec<f64>,
    pub replications: usize,
    /// first replication index
    #[serde(default)]
    pub offset: u64,
    pub n: usize,
    /// upper-tail level of the risk measure
    pub p: f64,
    /// coverage for intervals, significance for tests
    pub level: f64,
    #[serde(default = "default_sections")]
    pub sections: usize,
    pub seed: u64,
}

fn default_sections() -> usize {
    DEFAULT_SECTIONS
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, dgp: DgpSpec, grid: Vec<f64>, replications: usize, n: usize, p: f64, level: f64, seed: u64) -> Self {
        Self { kind, dgp, grid, replications, offset: 0, n, p, level, sections: DEFAULT_SECTIONS, seed }
    }

    fn validate(&self, needs_grid: bool) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if needs_grid && self.grid.is_empty() {
            return Err(Error::invalid("experiment grid is empty"));
        }
        RiskSpec::upper(self.p)?;
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(format!("level {} outside (0, 1)", self.level)));
        }
        self.dgp.validate()
    }

    fn dgp_at(&self, n: usize) -> DgpSpec {
        self.dgp.clone().with_n(n).with_seed(self.seed)
    }

    fn streams(&self) -> impl ParallelIterator<Item = u64> {
        let offset = self.offset;
        (0..self.replications as u64).into_par_iter().map(move |r| offset + r)
    }
}

/// Critical-value tables an experiment may need.
#[derive(Debug, Clone, Default)]
pub struct Tables {
    pub lobato: Option<CriticalValueTable>,
    pub g: Option<CriticalValueTable>,
    pub htilde: Option<CriticalValueTable>,
}

fn need<'a>(t: &'a Option<CriticalValueTable>, name: &str) -> Result<&'a CriticalValueTable> {
    t.as_ref().ok_or_else(|| Error::MissingCriticalValue(format!("experiment needs a {name} table")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub grid: f64,
    pub metric: String,
    pub value: f64,
    /// Monte Carlo standard error
    pub mc_se: f64,
    /// replications that contributed
    pub valid: usize,
    /// replications with a degenerate self-normalizer or dispersion
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: ExperimentConfig,
    /// cache file names of the tables used
    pub tables: Vec<String>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    /// Value of `metric` at grid point `grid`.
    pub fn get(&self, grid: f64, metric: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.metric == metric && (r.grid - grid).abs() < 1e-12)
    }

    /// Rows as CSV with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn provenance_json(&self) -> String {
        serde_json::to_string_pretty(&self.provenance).expect("provenance serializes")
    }
}

/// Rate with its binomial standard error over the valid replications.
fn rate_row(grid: f64, metric: &str, hits: usize, valid: usize, degenerate: usize) -> ReportRow {
    let r = if valid == 0 { f64::NAN } else { hits as f64 / valid as f64 };
    ReportRow { grid, metric: metric.into(), value: r, mc_se: (r * (1.0 - r) / valid as f64).sqrt(), valid, degenerate }
}

fn mean_row(grid: f64, metric: &str, xs: &[f64], degenerate: usize) -> ReportRow {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    ReportRow { grid, metric: metric.into(), value: mean, mc_se: (var / m).sqrt(), valid: xs.len(), degenerate }
}

/// ES at level `p` of the stationary marginal, available in closed form for
/// the Gaussian AR(1): `sigma phi(z_p) / (1 - p)` with `sigma^2 = 1/(1 - phi^2)`.
pub fn true_es(dgp: &DgpSpec, p: f64) -> Result<f64> {
    match (dgp.family, dgp.innovation, dgp.regimes.is_empty()) {
        (Family::Ar1 { phi }, Innovation::Normal, true) => {
            let sigma = (1.0 - phi * phi).sqrt().recip();
            Ok(sigma * normal_pdf(normal_quantile(p)?) / (1.0 - p))
        }
        _ => Err(Error::invalid("true ES is only available for the Gaussian AR(1) without regime changes")),
    }
}

/// Outcome of one replication of an interval or a test.
enum Outcome<T> {
    Ok(T),
    Degenerate,
}

fn classify<T>(r: Result<T>) -> Result<Outcome<T>> {
    match r {
        Ok(v) => Ok(Outcome::Ok(v)),
        Err(Error::Degenerate { .. }) => Ok(Outcome::Degenerate),
        Err(e) => Err(e),
    }
}

fn split<T>(xs: Vec<Outcome<T>>) -> (Vec<T>, usize) {
    let mut ok = Vec::with_capacity(xs.len());
    let mut bad = 0;
    for x in xs {
        match x {
            Outcome::Ok(v) => ok.push(v),
            Outcome::Degenerate => bad += 1,
        }
    }
    (ok, bad)
}

fn table_names(tables: &[Option<&CriticalValueTable>]) -> Vec<String> {
    tables.iter().flatten().map(|t| t.key().file_name()).collect()
}

/// Coverage and mean width of sectioning and self-normalized ES intervals
/// for each sample size in the grid.
pub fn run_coverage(config: &ExperimentConfig, tables: &Tables) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate(true)?;
    let lobato = need(&tables.lobato, "lobato")?;
    let truth = true_es(&config.dgp, config.p)?;
    let spec = RiskSpec::upper(config.p)?;
    let mut rows = Vec::new();
    for &g in &config.grid {
        let n = g as usize;
        if n as f64 != g || n == 0 {
            return Err(Error::invalid(format!("coverage grid holds sample sizes, got {g}")));
        }
        let dgp = config.dgp_at(n);
        let outcomes: Vec<(Outcome<(bool, f64)>, Outcome<(bool, f64)>)> = config
            .streams()
            .map(|r| {
                let x = dgp.generate(r)?;
                let s = classify(sectioning_interval(&x, &spec, Measure::Es, config.sections, config.level))?;
                let b = classify(selfnorm_interval(&x, &spec, Measure::Es, config.level, lobato))?;
                let f = |o: Outcome<crate::ci::IntervalResult>| match o {
                    Outcome::Ok(i) => Outcome::Ok((i.contains(truth), i.width())),
                    Outcome::Degenerate => Outcome::Degenerate,
                };
                Ok((f(s), f(b)))
            })
            .collect::<Result<_>>()?;
        let (sec, sn): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
        for (name, o) in [("sectioning", sec), ("selfnorm", sn)] {
            let (ok, bad) = split(o);
            let hits = ok.iter().filter(|v| v.0).count();
            let widths: Vec<f64> = ok.iter().map(|v| v.1).collect();
            rows.push(rate_row(g, &format!("coverage_{name}"), hits, ok.len(), bad));
            rows.push(mean_row(g, &format!("width_{name}"), &widths, bad));
        }
    }
    Ok(ExperimentReport {
        rows,
        provenance: Provenance {
            config: config.clone(),
            tables: table_names(&[Some(lobato)]),
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TStatReport {
    /// studentized section means, in replication order
    pub statistics: Vec<f64>,
    pub degenerate: usize,
    /// Kolmogorov-Smirnov distance to `t_{m-1}`
    pub ks_distance: f64,
    pub mean: f64,
    pub provenance: Provenance,
}

/// Sectioning pivots `sqrt(m) (mean - ES) / S` and their distance to the
/// reference `t_{m-1}` law.
pub fn run_tstat_hist(config: &ExperimentConfig) -> Result<TStatReport> {
    let start = Instant::now();
    config.validate(false)?;
    let truth = true_es(&config.dgp, config.p)?;
    let dgp = config.dgp_at(config.n);
    let m = config.sections;
    let outcomes: Vec<Outcome<f64>> = config
        .streams()
        .map(|r| {
            let x = dgp.generate(r)?;
            let est = section_estimates(x.values(), config.p, Measure::Es, m)?;
            classify(sectioning_pivot(&est, truth))
        })
        .collect::<Result<_>>()?;
    let (statistics, degenerate) = split(outcomes);
    let df = (m - 1) as f64;
    let ks = ks_distance(&statistics, |t| student_t_cdf(t, df));
    let mean = statistics.iter().sum::<f64>() / statistics.len() as f64;
    Ok(TStatReport {
        statistics,
        degenerate,
        ks_distance: ks,
        mean,
        provenance: Provenance { config: config.clone(), tables: Vec::new(), runtime_seconds: start.elapsed().as_secs_f64() },
    })
}

/// Single-test rejection rate for each midpoint location shift in the grid.
pub fn run_power_location(config: &ExperimentConfig, tables: &Tables) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate(true)?;
    let g_table = need(&tables.g, "g")?;
    let spec = RiskSpec::upper(config.p)?;
    let trim = TrimPolicy { trim_fraction: g_table.key().param, ..TrimPolicy::for_level(config.p) };
    let dgp = config.dgp_at(config.n);
    let mut rows = Vec::new();
    for &shift in &config.grid {
        let o: Vec<Outcome<bool>> = config
            .streams()
            .map(|r| {
                let x = dgp.generate(r)?;
                let x = if shift == 0.0 { x } else { inject_location_shift(&x, 0.5, shift)? };
                classify(single_test(&x, &spec, Measure::Es, config.level, &trim, g_table).map(|t| t.reject))
            })
            .collect::<Result<_>>()?;
        let (ok, bad) = split(o);
        rows.push(rate_row(shift, "power_single", ok.iter().filter(|&&v| v).count(), ok.len(), bad));
    }
    Ok(ExperimentReport {
        rows,
        provenance: Provenance {
            config: config.clone(),
            tables: table_names(&[Some(g_table)]),
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Replaces the value carried by the template's first regime change.
pub fn with_first_change(dgp: &DgpSpec, value: f64) -> Result<DgpSpec> {
    let mut d = dgp.clone();
    let r = d.regimes.first_mut().ok_or_else(|| Error::invalid("template has no regime change to sweep"))?;
    r.change = match r.change {
        Change::Phi(_) => Change::Phi(value),
        Change::Beta(_) => Change::Beta(value),
        Change::Lambda(_) => Change::Lambda(value),
        Change::Innovation(Innovation::StudentT { .. }) => Change::Innovation(Innovation::StudentT { df: value }),
        Change::Innovation(Innovation::Normal) => return Err(Error::invalid("cannot sweep a normal innovation")),
    };
    if d.init == Init::Stationary {
        d.validate()?;
    }
    Ok(d)
}

/// Single-test rejection rate as the template's first regime change sweeps the grid.
pub fn run_power_general(config: &ExperimentConfig, tables: &Tables) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate(true)?;
    let g_table = need(&tables.g, "g")?;
    let spec = RiskSpec::upper(config.p)?;
    let trim = TrimPolicy { trim_fraction: g_table.key().param, ..TrimPolicy::for_level(config.p) };
    let mut rows = Vec::new();
    for &v in &config.grid {
        let dgp = with_first_change(&config.dgp_at(config.n), v)?;
        let o: Vec<Outcome<bool>> = config
            .streams()
            .map(|r| {
                let x = dgp.generate(r)?;
                classify(single_test(&x, &spec, Measure::Es, config.level, &trim, g_table).map(|t| t.reject))
            })
            .collect::<Result<_>>()?;
        let (ok, bad) = split(o);
        rows.push(rate_row(v, "power_single", ok.iter().filter(|&&b| b).count(), ok.len(), bad));
    }
    Ok(ExperimentReport {
        rows,
        provenance: Provenance {
            config: config.clone(),
            tables: table_names(&[Some(g_table)]),
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Rejection rates of both tests on the same replications as the
/// template's first regime change sweeps the grid.
pub fn run_power_multi(config: &ExperimentConfig, tables: &Tables) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate(true)?;
    let g_table = need(&tables.g, "g")?;
    let h_table = need(&tables.htilde, "htilde")?;
    let spec = RiskSpec::upper(config.p)?;
    let trim = TrimPolicy { trim_fraction: g_table.key().param, ..TrimPolicy::for_level(config.p) };
    let options = HnOptions { delta: h_table.key().param, ..HnOptions::for_level(config.p) };
    let mut rows = Vec::new();
    for &v in &config.grid {
        let dgp = with_first_change(&config.dgp_at(config.n), v)?;
        let o: Vec<(Outcome<bool>, Outcome<bool>)> = config
            .streams()
            .map(|r| {
                let x = dgp.generate(r)?;
                let s = classify(single_test(&x, &spec, Measure::Es, config.level, &trim, g_table).map(|t| t.reject))?;
                let m = classify(multiple_test(&x, &spec, Measure::Es, config.level, &options, h_table).map(|t| t.reject))?;
                Ok((s, m))
            })
            .collect::<Result<_>>()?;
        let (s, m): (Vec<_>, Vec<_>) = o.into_iter().unzip();
        for (name, o) in [("power_single", s), ("power_multiple", m)] {
            let (ok, bad) = split(o);
            rows.push(rate_row(v, name, ok.iter().filter(|&&b| b).count(), ok.len(), bad));
        }
    }
    Ok(ExperimentReport {
        rows,
        provenance: Provenance {
            config: config.clone(),
            tables: table_names(&[Some(g_table), Some(h_table)]),
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    })
}
