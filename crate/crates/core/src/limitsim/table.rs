use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming the critical-value cache directory.
pub const CACHE_DIR_ENV: &str = "TAILBREAK_CACHE_DIR";

/// Pivotal limit functional behind a critical-value table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    /// `|W(1)| / sqrt(int (W - t W(1))^2)`, parameter unused
    Lobato,
    /// single change-point functional, parameter = trim fraction
    G,
    /// grid multiple change-point functional, parameter = delta
    Htilde,
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::Lobato => "lobato",
            Functional::G => "g",
            Functional::Htilde => "htilde",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lobato" => Ok(Functional::Lobato),
            "g" => Ok(Functional::G),
            "htilde" | "h" => Ok(Functional::Htilde),
            other => Err(Error::invalid(format!("unknown functional '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
}

/// Everything that determines a table's values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableKey {
    pub functional: Functional,
    /// trim fraction for `G`, delta for `Htilde`, ignored for `Lobato`
    pub param: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
}

impl TableKey {
    pub fn params(&self) -> FunctionalParams {
        match self.functional {
            Functional::Lobato => FunctionalParams { trim: None, delta: None },
            Functional::G => FunctionalParams { trim: Some(self.param), delta: None },
            Functional::Htilde => FunctionalParams { trim: None, delta: Some(self.param) },
        }
    }

    /// Cache file name; the parameter is spelled out in full precision.
    pub fn file_name(&self) -> String {
        let param = match self.functional {
            Functional::Lobato => String::new(),
            _ => format!("_{}", self.param),
        };
        format!(
            "{}{}_n{}_m{}_s{}.json",
            self.functional.name(),
            param,
            self.steps,
            self.paths,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEntry {
    pub q: f64,
    pub value: f64,
}

/// Monte Carlo quantiles of a limit functional with full provenance.
///
/// Serialized as JSON with fields in the order
/// `functional, params, steps, paths, seed, quantiles, created`.
/// `created` is a Unix timestamp in seconds, or `null` when the table was
/// written without a stamp so that reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub functional: Functional,
    pub params: FunctionalParams,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub quantiles: Vec<QuantileEntry>,
    pub created: Option<u64>,
}

/// Quantile levels stored by default.
pub const DEFAULT_LEVELS: [f64; 7] = [0.5, 0.8, 0.9, 0.95, 0.975, 0.99, 0.995];

const LEVEL_TOL: f64 = 1e-12;

impl CriticalValueTable {
    pub fn key(&self) -> TableKey {
        let param = match self.functional {
            Functional::Lobato => 0.0,
            Functional::G => self.params.trim.unwrap_or(0.0),
            Functional::Htilde => self.params.delta.unwrap_or(0.0),
        };
        TableKey {
            functional: self.functional,
            param,
            steps: self.steps,
            paths: self.paths,
            seed: self.seed,
        }
    }

    /// Stored quantile at level `q`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        self.quantiles
            .iter()
            .find(|e| (e.q - q).abs() < LEVEL_TOL)
            .map(|e| e.value)
            .ok_or_else(|| {
                Error::MissingCriticalValue(format!(
                    "quantile {q} of {} table {}",
                    self.functional.name(),
                    self.key().file_name()
                ))
            })
    }

    /// Checks that the table was built for `functional` with parameter `param`.
    pub fn ensure_matches(&self, functional: Functional, param: Option<f64>) -> Result<()> {
        let key = self.key();
        let param_ok = match param {
            Some(p) => (key.param - p).abs() < LEVEL_TOL,
            None => true,
        };
        if key.functional != functional || !param_ok {
            return Err(Error::MissingCriticalValue(format!(
                "need a {} table with parameter {:?}, got {}",
                functional.name(),
                param,
                key.file_name()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad table file: {e}")))?;
        if t.quantiles.windows(2).any(|w| w[0].q >= w[1].q || w[0].value > w[1].value) {
            return Err(Error::invalid("table quantiles are not monotone"));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Writes the table atomically: a temporary file in the target
    /// directory is renamed over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.{}.tmp",
            path.file_name().and_then(|f| f.to_str()).unwrap_or("table"),
            std::process::id()
        ));
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Directory holding cached tables: `$TAILBREAK_CACHE_DIR`, else
/// `.tailbreak-cache` in the working directory.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".tailbreak-cache"))
}

/// Looks up a cached table by exact key.
pub fn lookup(dir: &Path, key: &TableKey) -> Result<CriticalValueTable> {
    let path = dir.join(key.file_name());
    if !path.exists() {
        return Err(Error::MissingCriticalValue(format!(
            "no table {} in {}; run `tailbreak critvals` first",
            key.file_name(),
            dir.display()
        )));
    }
    let table = CriticalValueTable::load(&path)?;
    if table.key() != *key {
        return Err(Error::MissingCriticalValue(format!("table {} has a different key", path.display())));
    }
    Ok(table)
}
