use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use tailbreak_core::changepoint::{multiple_test, single_test, HnOptions, TrimPolicy};
use tailbreak_core::ci::{sectioning_interval, selfnorm_interval, IntervalMethod};
use tailbreak_core::dgp::{inject_location_shift, DgpSpec};
use tailbreak_core::estimators::{estimate, Measure};
use tailbreak_core::experiments::{
    run_coverage, run_power_general, run_power_location, run_power_multi, run_tstat_hist, ExperimentConfig,
    ExperimentKind, Tables,
};
use tailbreak_core::io::{read_csv, rolling_band, Column, CsvOptions};
use tailbreak_core::limitsim::{
    cache_dir, estimate_quantiles, lookup, CriticalValueTable, Functional, TableKey, DEFAULT_DELTA, DEFAULT_G_TRIM,
    DEFAULT_LEVELS,
};
use tailbreak_core::series::{log_returns, RiskSpec, TimeSeries};
use tailbreak_core::Error;

use crate::args::*;
use crate::SCHEMA;

/// Runs one subcommand and returns its JSON document.
pub fn run(command: Command, argv: Vec<String>) -> Result<Value> {
    let (name, result, details) = match command {
        Command::Estimate(a) => ("estimate", estimate_cmd(&a)?, to_value(&a)),
        Command::Ci(a) => ("ci", ci_cmd(&a)?, to_value(&a)),
        Command::TestSingle(a) => ("test-single", test_single_cmd(&a)?, to_value(&a)),
        Command::TestMultiple(a) => ("test-multiple", test_multiple_cmd(&a)?, to_value(&a)),
        Command::Critvals(a) => ("critvals", critvals_cmd(&a)?, to_value(&a)),
        Command::Simulate(a) => ("simulate", simulate_cmd(&a)?, to_value(&a)),
        Command::Experiment(a) => ("experiment", experiment_cmd(&a)?, to_value(&a)),
        Command::RollingBand(a) => ("rolling-band", rolling_band_cmd(&a)?, to_value(&a)),
    };
    Ok(json!({
        "schema": SCHEMA,
        "command": name,
        "result": result,
        "provenance": {
            "version": env!("CARGO_PKG_VERSION"),
            "argv": argv,
            "parameters": details,
        },
    }))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("arguments serialize")
}

fn load_series(a: &InputArgs) -> Result<TimeSeries> {
    let mut options = CsvOptions::new(Column::parse(&a.column), !a.no_header);
    if let Some(d) = &a.date_column {
        options = options.with_date(Column::parse(d));
    }
    let series = read_csv(&a.input, &options).with_context(|| format!("reading {}", a.input.display()))?;
    Ok(match a.transform {
        Transform::None => series,
        Transform::LogReturns => log_returns(&series)?,
    })
}

fn risk(a: &RiskArgs) -> Result<(RiskSpec, Measure)> {
    let spec = match a.tail {
        Tail::Upper => RiskSpec::upper(a.p)?,
        Tail::Lower => RiskSpec::lower(a.p)?,
    };
    Ok(match (a.measure, a.beta) {
        (MeasureArg::Var, None) => (spec, Measure::Var),
        (MeasureArg::Es, None) => (spec, Measure::Es),
        (MeasureArg::Ctm, Some(beta)) => (spec.with_beta(beta)?, Measure::Ctm(beta)),
        (MeasureArg::Ctm, None) => bail!(Error::InvalidInput("--measure ctm needs --beta".into())),
        (_, Some(_)) => bail!(Error::InvalidInput("--beta only applies to --measure ctm".into())),
    })
}

fn table_dir(dir: &Option<PathBuf>) -> PathBuf {
    dir.clone().unwrap_or_else(cache_dir)
}

/// Cached table for the key, or an error naming the command that builds it.
fn table(a: &TableArgs, functional: Functional, param: f64) -> Result<CriticalValueTable> {
    let key = TableKey { functional, param, steps: a.table_steps, paths: a.table_paths, seed: a.table_seed };
    let dir = table_dir(&a.cache_dir);
    lookup(&dir, &key).map_err(|e| match e {
        Error::MissingCriticalValue(_) => {
            let param = match functional {
                Functional::Lobato => String::new(),
                _ => format!(" --param {param}"),
            };
            Error::MissingCriticalValue(format!(
                "no cached table {} in {}; run `tailbreak critvals --functional {}{param} --paths {} --steps {} --seed {}` first",
                key.file_name(),
                dir.display(),
                functional.name(),
                key.paths,
                key.steps,
                key.seed
            ))
        }
        e => e,
    })
    .map_err(Into::into)
}

fn check_sections(m: usize) -> Result<()> {
    if m < 2 {
        bail!(Error::InvalidInput(format!("sectioning needs --m >= 2, got {m}")));
    }
    Ok(())
}

fn estimate_cmd(a: &EstimateArgs) -> Result<Value> {
    let (spec, measure) = risk(&a.risk)?;
    let x = load_series(&a.input)?;
    let value = estimate(&x, &spec, measure)?;
    Ok(json!({
        "measure": measure,
        "p": spec.p(),
        "side": spec.side(),
        "effective_p": spec.effective_p(),
        "n": x.len(),
        "value": value,
    }))
}

fn ci_cmd(a: &CiArgs) -> Result<Value> {
    let (spec, measure) = risk(&a.risk)?;
    if a.method == Method::Sectioning {
        check_sections(a.m)?;
    }
    let x = load_series(&a.input)?;
    let (r, tables) = match a.method {
        Method::Sectioning => (sectioning_interval(&x, &spec, measure, a.m, a.level)?, vec![]),
        Method::Selfnorm => {
            let t = table(&a.table, Functional::Lobato, 0.0)?;
            (selfnorm_interval(&x, &spec, measure, a.level, &t)?, vec![t.key().file_name()])
        }
    };
    let mut v = to_value(&r);
    v["n"] = json!(x.len());
    v["tables"] = json!(tables);
    Ok(v)
}

fn test_single_cmd(a: &TestSingleArgs) -> Result<Value> {
    let (spec, measure) = risk(&a.risk)?;
    let default = TrimPolicy::for_spec(&spec);
    let i_min = a.i_min.unwrap_or(default.i_min);
    let n_min = a.n_min.unwrap_or(default.n_min.max(i_min));
    let trim = TrimPolicy::new(n_min, i_min, a.trim)?;
    let t = table(&a.table, Functional::G, a.trim)?;
    let x = load_series(&a.input)?;
    let r = single_test(&x, &spec, measure, a.level, &trim, &t)?;
    let mut v = to_value(&r);
    if !a.trace {
        if let Some(s) = v["single"].as_object_mut() {
            s.remove("trace");
        }
    }
    Ok(v)
}

fn test_multiple_cmd(a: &TestMultipleArgs) -> Result<Value> {
    let (spec, measure) = risk(&a.risk)?;
    let mut options = HnOptions { delta: a.delta, ..HnOptions::for_spec(&spec) };
    if let Some(i) = a.i_min {
        options.i_min = i;
    }
    let t = table(&a.table, Functional::Htilde, a.delta)?;
    let x = load_series(&a.input)?;
    let r = multiple_test(&x, &spec, measure, a.level, &options, &t)?;
    let mut v = to_value(&r);
    if !a.trace {
        if let Some(s) = v["multiple"].as_object_mut() {
            s.remove("trace");
        }
    }
    Ok(v)
}

fn critvals_cmd(a: &CritvalsArgs) -> Result<Value> {
    let (functional, param) = match a.functional {
        FunctionalArg::Lobato => (Functional::Lobato, 0.0),
        FunctionalArg::G => (Functional::G, a.param.unwrap_or(DEFAULT_G_TRIM)),
        FunctionalArg::Htilde => (Functional::Htilde, a.param.unwrap_or(DEFAULT_DELTA)),
    };
    if functional == Functional::Lobato && a.param.is_some() {
        bail!(Error::InvalidInput("the lobato functional takes no --param".into()));
    }
    let key = TableKey { functional, param, steps: a.steps, paths: a.paths, seed: a.seed };
    let levels = if a.levels.is_empty() { DEFAULT_LEVELS.to_vec() } else { a.levels.clone() };
    let table = estimate_quantiles(&key, &levels)?;
    let path = match &a.out {
        Some(p) => p.clone(),
        None => {
            let dir = table_dir(&a.cache_dir);
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            dir.join(key.file_name())
        }
    };
    table.save(&path)?;
    let mut v = to_value(&table);
    v["file"] = json!(path);
    Ok(v)
}

fn simulate_cmd(a: &SimulateArgs) -> Result<Value> {
    let spec = match a.dgp {
        DgpKind::Ar1 => DgpSpec::ar1(a.phi, a.n, a.seed),
        DgpKind::Arch1 => DgpSpec::arch1(a.beta, a.lambda, a.n, a.seed),
        DgpKind::DfChange => DgpSpec::df_change(a.df, a.n, a.seed),
        DgpKind::LambdaChange => DgpSpec::lambda_change(a.lambda, a.n, a.seed),
        DgpKind::ThreeRegime => DgpSpec::three_regime_t(a.df, a.n, a.seed),
    };
    let mut x = spec.generate(a.replication)?;
    if let Some(shift) = a.shift {
        x = inject_location_shift(&x, a.shift_at, shift)?;
    }
    let mut v = json!({ "dgp": spec, "replication": a.replication, "n": x.len() });
    match &a.out {
        Some(path) => {
            write_series(path, &x)?;
            v["file"] = json!(path);
        }
        None => v["values"] = json!(x.values()),
    }
    Ok(v)
}

fn write_series(path: &Path, x: &TimeSeries) -> Result<()> {
    let mut text = String::from("value\n");
    for v in x.values() {
        text.push_str(&format!("{v:?}\n"));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn experiment_cmd(a: &ExperimentArgs) -> Result<Value> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    let kind = config.kind;
    let mut tables = Tables::default();
    match kind {
        ExperimentKind::Coverage => tables.lobato = Some(table(&a.table, Functional::Lobato, 0.0)?),
        ExperimentKind::TStatHist => {}
        ExperimentKind::PowerLocation | ExperimentKind::PowerGeneral => {
            tables.g = Some(table(&a.table, Functional::G, a.trim)?)
        }
        ExperimentKind::PowerMulti => {
            tables.g = Some(table(&a.table, Functional::G, a.trim)?);
            tables.htilde = Some(table(&a.table, Functional::Htilde, a.delta)?);
        }
    }
    if kind == ExperimentKind::TStatHist {
        let r = run_tstat_hist(&config)?;
        if a.csv.is_some() {
            bail!(Error::InvalidInput("t-statistic experiments report in JSON only".into()));
        }
        return Ok(to_value(&r));
    }
    let report = match kind {
        ExperimentKind::Coverage => run_coverage(&config, &tables)?,
        ExperimentKind::PowerLocation => run_power_location(&config, &tables)?,
        ExperimentKind::PowerGeneral => run_power_general(&config, &tables)?,
        ExperimentKind::PowerMulti => run_power_multi(&config, &tables)?,
        ExperimentKind::TStatHist => unreachable!(),
    };
    if let Some(path) = &a.csv {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        report.write_csv(file)?;
        let sidecar = path.with_extension("json");
        std::fs::write(&sidecar, report.provenance_json()).with_context(|| format!("writing {}", sidecar.display()))?;
    }
    Ok(to_value(&report))
}

fn rolling_band_cmd(a: &RollingBandArgs) -> Result<Value> {
    let (spec, measure) = risk(&a.risk)?;
    let method = match a.method {
        Method::Sectioning => {
            check_sections(a.m)?;
            IntervalMethod::Sectioning { m: a.m }
        }
        Method::Selfnorm => IntervalMethod::SelfNorm,
    };
    let t = match a.method {
        Method::Selfnorm => Some(table(&a.table, Functional::Lobato, 0.0)?),
        Method::Sectioning => None,
    };
    let x = load_series(&a.input)?;
    let band = rolling_band(&x, &spec, measure, a.window, a.shift, method, a.level, t.as_ref())?;
    if let Some(path) = &a.csv {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        band.write_csv(file)?;
    }
    let mut v = to_value(&band);
    v["tables"] = json!(t.iter().map(|t| t.key().file_name()).collect::<Vec<_>>());
    Ok(v)
}
