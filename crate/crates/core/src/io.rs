//! CSV ingestion and rolling-window interval bands.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ci::{sectioning_interval, selfnorm_interval, IntervalMethod, IntervalResult};
use crate::error::{Error, Result};
use crate::estimators::Measure;
use crate::limitsim::CriticalValueTable;
use crate::series::{RiskSpec, SegmentRef, TimeSeries};

/// Column chosen by header name or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Column {
    /// A bare non-negative integer selects by position, anything else by name.
    pub fn parse(s: &str) -> Self {
        s.parse().map(Column::Index).unwrap_or_else(|_| Column::Name(s.to_string()))
    }

    fn resolve(&self, headers: Option<&csv::StringRecord>, width: usize) -> Result<usize> {
        match self {
            Column::Index(i) if *i < width => Ok(*i),
            Column::Index(i) => Err(Error::invalid(format!("column {i} out of range for {width} columns"))),
            Column::Name(name) => match headers {
                Some(h) => h
                    .iter()
                    .position(|c| c.trim() == name)
                    .ok_or_else(|| Error::invalid(format!("no column named {name:?}"))),
                None => Err(Error::invalid(format!("column {name:?} selected by name but the file has no header"))),
            },
        }
    }

    fn label(&self) -> String {
        match self {
            Column::Index(i) => i.to_string(),
            Column::Name(n) => n.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub value: Column,
    #[serde(default)]
    pub date: Option<Column>,
    pub has_header: bool,
}

impl CsvOptions {
    pub fn new(value: Column, has_header: bool) -> Self {
        Self { value, date: None, has_header }
    }

    pub fn with_date(mut self, date: Column) -> Self {
        self.date = Some(date);
        self
    }
}

/// Reads one numeric column, and optionally a date-label column, from a
/// comma-separated file. Rows in errors are 1-based file lines.
pub fn read_csv(path: &Path, options: &CsvOptions) -> Result<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv_from(file, options)
}

pub fn read_csv_from<R: Read>(reader: R, options: &CsvOptions) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(options.has_header).flexible(true).from_reader(reader);
    let headers = if options.has_header {
        Some(rdr.headers().map_err(|e| csv_error(&e, "header"))?.clone())
    } else {
        None
    };
    let mut values = Vec::new();
    let mut dates = Vec::new();
    let mut columns: Option<(usize, Option<usize>)> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&e, &options.value.label()))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let (vi, di) = match columns {
            Some(c) => c,
            None => {
                let width = headers.as_ref().map_or(record.len(), |h| h.len().max(record.len()));
                let vi = options.value.resolve(headers.as_ref(), width)?;
                let di = options.date.as_ref().map(|d| d.resolve(headers.as_ref(), width)).transpose()?;
                *columns.insert((vi, di))
            }
        };
        let cell = |i: usize, col: &Column| {
            record.get(i).ok_or_else(|| Error::Csv { row, column: col.label(), message: "missing cell".into() })
        };
        let raw = cell(vi, &options.value)?.trim();
        let v: f64 = raw.parse().map_err(|_| Error::Csv {
            row,
            column: options.value.label(),
            message: format!("cannot parse {raw:?} as a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Csv { row, column: options.value.label(), message: format!("non-finite value {raw:?}") });
        }
        values.push(v);
        if let (Some(di), Some(dc)) = (di, options.date.as_ref()) {
            dates.push(cell(di, dc)?.trim().to_string());
        }
    }
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if options.date.is_some() {
        TimeSeries::with_timestamps(values, dates)
    } else {
        TimeSeries::new(values)
    }
}

fn csv_error(e: &csv::Error, column: &str) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Csv { row, column: column.to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    /// 1-based index of the first observation in the window
    pub start: usize,
    /// 1-based index of the last observation in the window
    pub end: usize,
    pub start_label: String,
    pub end_label: String,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingBandResult {
    pub window: usize,
    pub shift: usize,
    pub method: IntervalMethod,
    pub measure: Measure,
    pub level: f64,
    pub rows: Vec<BandRow>,
}

impl RollingBandResult {
    /// Rows as CSV with a header line.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Interval for every full window starting at `1, 1 + shift, 1 + 2 shift, ...`.
///
/// Self-normalized bands need the Lobato table; sectioning bands ignore it.
#[allow(clippy::too_many_arguments)]
pub fn rolling_band(
    series: &TimeSeries,
    spec: &RiskSpec,
    measure: Measure,
    window: usize,
    shift: usize,
    method: IntervalMethod,
    level: f64,
    table: Option<&CriticalValueTable>,
) -> Result<RollingBandResult> {
    let n = series.len();
    if window == 0 || window > n {
        return Err(Error::invalid(format!("window {window} must be in [1, {n}]")));
    }
    if shift == 0 || shift > window {
        return Err(Error::invalid(format!("shift {shift} must be in [1, window = {window}]")));
    }
    let interval = |w: &TimeSeries| -> Result<IntervalResult> {
        match method {
            IntervalMethod::Sectioning { m } => sectioning_interval(w, spec, measure, m, level),
            IntervalMethod::SelfNorm => {
                let t = table.ok_or_else(|| Error::MissingCriticalValue("self-normalized band needs a lobato table".into()))?;
                selfnorm_interval(w, spec, measure, level, t)
            }
        }
    };
    let rows = (0..=n - window)
        .step_by(shift)
        .map(|l| {
            let w = series.slice(SegmentRef::new(l + 1, l + window, n)?);
            let r = interval(&w)?;
            Ok(BandRow {
                start: l + 1,
                end: l + window,
                start_label: series.label(l + 1),
                end_label: series.label(l + window),
                point: r.point,
                lo: r.lo,
                hi: r.hi,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RollingBandResult { window, shift, method, measure, level, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::DgpSpec;

    fn read(text: &str, options: &CsvOptions) -> Result<TimeSeries> {
        read_csv_from(text.as_bytes(), options)
    }

    #[test]
    fn date_and_close_columns() {
        let text = "date,close\n2020-01-01,1.0\n2020-01-02,2.5\n2020-01-03,-1\n2020-01-06,4e-1\n2020-01-07,3\n";
        let opts = CsvOptions::new(Column::parse("close"), true).with_date(Column::parse("date"));
        let s = read(text, &opts).unwrap();
        assert_eq!(s.values(), &[1.0, 2.5, -1.0, 0.4, 3.0]);
        assert_eq!(s.timestamps().unwrap()[4], "2020-01-07");
        let by_index = read(text, &CsvOptions::new(Column::parse("1"), true)).unwrap();
        assert_eq!(by_index.values(), s.values());
        assert!(by_index.timestamps().is_none());
    }

    #[test]
    fn bad_cell_names_its_row() {
        let err = read("1\n2\nabc\n4\n", &CsvOptions::new(Column::Index(0), false)).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 3, .. }), "{err:?}");
        assert!(err.to_string().contains("row 3"));
        let err = read("x\n1\nabc\n", &CsvOptions::new(Column::Index(0), true)).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn header_flag_controls_first_row() {
        let text = "1.5\n2\n3\n";
        assert_eq!(read(text, &CsvOptions::new(Column::Index(0), false)).unwrap().len(), 3);
        assert_eq!(read(text, &CsvOptions::new(Column::Index(0), true)).unwrap().values(), &[2.0, 3.0]);
        assert!(read("v\n", &CsvOptions::new(Column::Index(0), true)).is_err());
        assert!(read("", &CsvOptions::new(Column::Index(0), false)).is_err());
    }

    #[test]
    fn missing_columns_are_reported() {
        assert!(read("a,b\n1,2\n", &CsvOptions::new(Column::parse("c"), true)).is_err());
        assert!(read("1,2\n", &CsvOptions::new(Column::Index(2), false)).is_err());
        assert!(read("1,2\n", &CsvOptions::new(Column::parse("b"), false)).is_err());
        assert!(read("a,b\n1,2\n3\n", &CsvOptions::new(Column::parse("b"), true)).is_err());
        assert!(read("a\nNaN\n", &CsvOptions::new(Column::Index(0), true)).is_err());
    }

    fn series(n: usize) -> TimeSeries {
        DgpSpec::ar1(0.5, n, 4).generate(0).unwrap()
    }

    fn band(n: usize, window: usize, shift: usize) -> Result<RollingBandResult> {
        let spec = RiskSpec::upper(0.9).unwrap();
        rolling_band(&series(n), &spec, Measure::Es, window, shift, IntervalMethod::Sectioning { m: 5 }, 0.95, None)
    }

    #[test]
    fn window_starts() {
        assert_eq!(band(100, 100, 20).unwrap().rows.len(), 1);
        let b = band(140, 100, 20).unwrap();
        assert_eq!(b.rows.iter().map(|r| r.start).collect::<Vec<_>>(), vec![1, 21, 41]);
        assert_eq!(b.rows[2].end, 140);
        assert_eq!(b.rows[0].end_label, "100");
        assert!(b.rows.iter().all(|r| r.lo <= r.hi));
        assert_eq!(band(159, 100, 20).unwrap().rows.len(), 3);
        let mut out = Vec::new();
        b.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("start,end,start_label,end_label,point,lo,hi\n1,100,1,100,"));
    }

    #[test]
    fn invalid_windows() {
        assert!(band(100, 101, 20).is_err());
        assert!(band(100, 50, 0).is_err());
        assert!(band(100, 50, 51).is_err());
        assert!(matches!(band(100, 40, 10), Err(Error::TooShort { len: 40, .. })));
        let spec = RiskSpec::upper(0.9).unwrap();
        let r = rolling_band(&series(100), &spec, Measure::Es, 100, 10, IntervalMethod::SelfNorm, 0.95, None);
        assert!(matches!(r, Err(Error::MissingCriticalValue(_))));
    }

    #[test]
    fn band_tracks_variance_increase() {
        let base = series(2000);
        let v: Vec<f64> =
            base.values().iter().enumerate().map(|(i, x)| if i >= 1000 { x * 2f64.sqrt() } else { *x }).collect();
        let s = TimeSeries::new(v).unwrap();
        let spec = RiskSpec::upper(0.9).unwrap();
        let b = rolling_band(&s, &spec, Measure::Es, 200, 50, IntervalMethod::Sectioning { m: 5 }, 0.95, None).unwrap();
        let mean = |rows: Vec<&BandRow>| rows.iter().map(|r| r.point).sum::<f64>() / rows.len() as f64;
        let pre = mean(b.rows.iter().filter(|r| r.end <= 1000).collect());
        let post = mean(b.rows.iter().filter(|r| r.start > 1000).collect());
        assert!(post > pre, "{pre} {post}");
    }

    #[test]
    fn lower_tail_band_is_mirrored() {
        let s = series(300);
        let neg = s.scaled(-1.0).unwrap();
        let m = IntervalMethod::Sectioning { m: 5 };
        let up = rolling_band(&s, &RiskSpec::upper(0.9).unwrap(), Measure::Es, 150, 50, m, 0.9, None).unwrap();
        let lo = rolling_band(&neg, &RiskSpec::lower(0.1).unwrap(), Measure::Es, 150, 50, m, 0.9, None).unwrap();
        for (a, b) in up.rows.iter().zip(&lo.rows) {
            assert!((a.point + b.point).abs() < 1e-12 && (a.lo + b.hi).abs() < 1e-12);
        }
    }
}
