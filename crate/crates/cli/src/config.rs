//! Run configuration: TOML file, `--set key=value` overrides, defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use khessian_core::problem::TabulatedDatum;
use khessian_core::{BoundaryKind, Datum, ProblemSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("config key `{path}`: {message}")]
    Key { path: String, message: String },
    #[error("`{key}` = {value} is out of range: {expected}")]
    Range { key: &'static str, value: String, expected: &'static str },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("problem definition: {0}")]
    Problem(#[from] khessian_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Portrait,
    Manifold,
    Scan,
    Branch,
    Threshold,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Portrait => "portrait",
            Command::Manifold => "manifold",
            Command::Scan => "scan",
            Command::Branch => "branch",
            Command::Threshold => "threshold",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Navier,
    Entire,
}

impl From<Boundary> for BoundaryKind {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Dirichlet => BoundaryKind::Dirichlet,
            Boundary::Navier => BoundaryKind::Navier,
            Boundary::Entire => BoundaryKind::Entire,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumConfig {
    Zero,
    PowerLaw { c: f64, p: f64 },
    Indicator { a: f64, b: f64, c: f64 },
    /// Two-column CSV `s,g`, relative to the working directory.
    Tabulated { path: PathBuf },
}

impl DatumConfig {
    pub fn build(&self) -> Result<Datum, ConfigError> {
        Ok(match self {
            DatumConfig::Zero => Datum::Zero,
            DatumConfig::PowerLaw { c, p } => Datum::power_law(*c, *p)?,
            DatumConfig::Indicator { a, b, c } => Datum::indicator(*a, *b, *c)?,
            DatumConfig::Tabulated { path } => Datum::Tabulated(TabulatedDatum::from_csv_path(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numeric {
    pub tol: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub grid_nodes: usize,
    pub s_window: [f64; 2],
    /// Samples of the shooting scan.
    pub samples: usize,
    pub lambda_step: f64,
    pub lambda_max: f64,
    /// Time horizon of manifold traces.
    pub horizon: f64,
}

impl Default for Numeric {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            t_end: 25.0,
            grid_nodes: 4001,
            s_window: [-10.0, 10.0],
            samples: 2001,
            lambda_step: 0.5,
            lambda_max: 1e3,
            horizon: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for Output {
    fn default() -> Self {
        Self { directory: PathBuf::from("runs"), formats: vec![Format::Csv, Format::Json] }
    }
}

impl Output {
    pub fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    pub fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }
}

fn default_k() -> u32 {
    2
}

fn default_dim() -> u32 {
    4
}

fn default_boundary() -> Boundary {
    Boundary::Dirichlet
}

fn default_datum() -> DatumConfig {
    DatumConfig::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(rename = "N", default = "default_dim")]
    pub dim: u32,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_datum")]
    pub datum: DatumConfig,
    #[serde(default)]
    pub numeric: Numeric,
    #[serde(default)]
    pub output: Output,
}

fn range_error(key: &'static str, value: impl fmt::Display, expected: &'static str) -> ConfigError {
    ConfigError::Range { key, value: value.to_string(), expected }
}

impl RunConfig {
    /// Parses a TOML document, then checks every numeric range.
    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Malformed(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_table(table: Table) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| ConfigError::Key {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Layers `file` (if any), then `overrides`, then `command` over the defaults.
    pub fn assemble(command: Option<Command>, file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
                text.parse().map_err(|e: toml::de::Error| ConfigError::Malformed(format!("{}: {e}", path.display())))?
            }
            None => Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        if let Some(command) = command {
            table.insert("command".into(), Value::String(command.name().into()));
        }
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim < 2 {
            return Err(range_error("N", self.dim, "N >= 2"));
        }
        if !(2..=3).contains(&self.k) {
            return Err(range_error("k", self.k, "k = 2 or k = 3"));
        }
        if self.k > self.dim {
            return Err(range_error("k", self.k, "k <= N"));
        }
        if !self.lambda.is_finite() {
            return Err(range_error("lambda", self.lambda, "a finite number"));
        }
        let n = &self.numeric;
        if !(1e-13..=1e-3).contains(&n.tol) {
            return Err(range_error("numeric.tol", n.tol, "1e-13 <= tol <= 1e-3"));
        }
        if !(n.t_end > 0.0 && n.t_end <= 200.0) {
            return Err(range_error("numeric.T", n.t_end, "0 < T <= 200"));
        }
        if !(1000..=1_000_000).contains(&n.grid_nodes) {
            return Err(range_error("numeric.grid_nodes", n.grid_nodes, "1000 <= grid_nodes <= 1000000"));
        }
        let [lo, hi] = n.s_window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(range_error("numeric.s_window", format!("[{lo}, {hi}]"), "finite with lo < hi"));
        }
        if !(2..=1_000_000).contains(&n.samples) {
            return Err(range_error("numeric.samples", n.samples, "2 <= samples <= 1000000"));
        }
        if !(n.lambda_step.is_finite() && n.lambda_step != 0.0) {
            return Err(range_error("numeric.lambda_step", n.lambda_step, "finite and nonzero"));
        }
        if !(n.lambda_max.is_finite() && n.lambda_max != 0.0 && n.lambda_max.signum() == n.lambda_step.signum()) {
            return Err(range_error("numeric.lambda_max", n.lambda_max, "finite, with the sign of lambda_step"));
        }
        if !(n.horizon > 0.0 && n.horizon <= 1000.0) {
            return Err(range_error("numeric.horizon", n.horizon, "0 < horizon <= 1000"));
        }
        if self.output.formats.is_empty() {
            return Err(range_error("output.formats", "[]", "a nonempty subset of [\"csv\", \"json\"]"));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec, ConfigError> {
        Ok(ProblemSpec::new(self.k, self.dim, self.lambda, self.boundary.into(), self.datum.build()?)?)
    }

    /// Hex SHA-256 of the canonical JSON form, output directory excluded;
    /// names the run directory.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut content = self.clone();
        content.output.directory = PathBuf::new();
        let canonical = serde_json::to_vec(&content).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `a.b.c=value`; the value is read as a TOML literal, falling back to a bare string.
fn apply_override(table: &mut Table, item: &str) -> Result<(), ConfigError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError::Malformed(format!("--set expects key=value, got `{item}`")))?;
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Malformed(format!("empty key segment in `{key}`")));
    }
    let last = parts.pop().expect("split yields one part");
    let mut node = table;
    for part in parts {
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Malformed(format!("`{part}` in `{key}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}
