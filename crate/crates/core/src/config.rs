//! Model files.
//!
//! ```toml
//! [model]
//! a = 0.0                    # number, "const:<v>" or "samples:<t,value csv>"
//! A = "const:1"
//! mu = -1.0
//! T = 1.0
//!
//! [lambda]
//! l11 = 2.0
//! l12 = -1.0
//! l22 = 1.0
//!
//! [grid]
//! N = 2000
//!
//! [experiment]               # optional
//! seed = 1
//! n = 100000
//! horizons = [1.0, 2.0]
//! ```
//!
//! Sample paths are resolved relative to the model file and must list the grid
//! nodes in order; shorter horizons use a prefix of them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::io::{fmt_f64, read_series, series_on_grid};
use crate::model::{validate_model, Coefficient, LambdaSpec, ModelSpec, ValidatedModel};

pub const MIN_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum CoefSource {
    Const(f64),
    Samples { path: PathBuf, series: Vec<(f64, f64)> },
}

impl CoefSource {
    fn canonical(&self) -> String {
        match self {
            CoefSource::Const(v) => format!("const:{}", fmt_f64(*v)),
            CoefSource::Samples { series, .. } => {
                let body: Vec<String> = series
                    .iter()
                    .map(|(t, v)| format!("{}:{}", fmt_f64(*t), fmt_f64(*v)))
                    .collect();
                format!("samples:{}", body.join(","))
            }
        }
    }

    fn resolve(&self, grid: &TimeGrid<f64>, key: &str) -> Result<Coefficient<f64>> {
        Ok(match self {
            CoefSource::Const(v) => Coefficient::Const(*v),
            CoefSource::Samples { series, .. } => {
                Coefficient::Samples(series_on_grid(series, grid, key)?.into_values())
            }
        })
    }
}

/// Optional `[experiment]` settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Experiment {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub horizons: Vec<f64>,
    pub stride: Option<usize>,
    pub kernel: Option<PathBuf>,
    pub mean: Option<PathBuf>,
}

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub a: CoefSource,
    pub obs_gain: CoefSource,
    pub l11: CoefSource,
    pub l12: CoefSource,
    pub l22: CoefSource,
    pub mu: f64,
    pub horizon: f64,
    pub steps: usize,
    pub experiment: Experiment,
}

fn cfg_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn section<'a>(root: &'a Table, name: &str) -> Result<&'a Table> {
    match root.get(name) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(cfg_err(name, "expected a section")),
        None => Err(cfg_err(name, "missing section")),
    }
}

fn number(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(cfg_err(key, "expected a number")),
    }
}

fn coef(t: &Table, sec: &str, name: &str, base: &Path) -> Result<CoefSource> {
    let key = format!("{sec}.{name}");
    let v = t.get(name).ok_or_else(|| cfg_err(&key, "missing key"))?;
    let src = match v {
        Value::String(s) => {
            if let Some(rest) = s.strip_prefix("const:") {
                CoefSource::Const(
                    rest.trim()
                        .parse()
                        .map_err(|_| cfg_err(&key, format!("bad constant {rest:?}")))?,
                )
            } else if let Some(rest) = s.strip_prefix("samples:") {
                let path = base.join(rest.trim());
                let series = read_series(&path).map_err(|e| cfg_err(&key, e.to_string()))?;
                CoefSource::Samples { path, series }
            } else {
                return Err(cfg_err(
                    &key,
                    format!("expected a number, \"const:<v>\" or \"samples:<path>\", got {s:?}"),
                ));
            }
        }
        other => CoefSource::Const(number(other, &key)?),
    };
    if let CoefSource::Const(c) = src {
        if !c.is_finite() {
            return Err(cfg_err(&key, "value is not finite"));
        }
    }
    Ok(src)
}

fn constant(t: &Table, sec: &str, name: &str, base: &Path) -> Result<f64> {
    match coef(t, sec, name, base)? {
        CoefSource::Const(c) => Ok(c),
        CoefSource::Samples { .. } => Err(cfg_err(&format!("{sec}.{name}"), "must be a constant")),
    }
}

fn count(t: &Table, key: &str, name: &str) -> Result<Option<usize>> {
    match t.get(name) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
        Some(_) => Err(cfg_err(key, "expected a nonnegative integer")),
    }
}

impl ModelConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses a model file; sample paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| cfg_err("", e.message().to_owned()))?;
        let model = section(&root, "model")?;
        let lambda = section(&root, "lambda")?;
        let grid = section(&root, "grid")?;
        let steps = count(grid, "grid.N", "N")?.ok_or_else(|| cfg_err("grid.N", "missing key"))?;
        if steps < MIN_STEPS {
            return Err(cfg_err("grid.N", format!("must be at least {MIN_STEPS}, got {steps}")));
        }
        let horizon = constant(model, "model", "T", base)?;
        if !(horizon > 0.0) {
            return Err(cfg_err("model.T", "must be positive"));
        }
        let experiment = match root.get("experiment") {
            None => Experiment::default(),
            Some(_) => Self::experiment(section(&root, "experiment")?, base)?,
        };
        Ok(Self {
            a: coef(model, "model", "a", base)?,
            obs_gain: coef(model, "model", "A", base)?,
            l11: coef(lambda, "lambda", "l11", base)?,
            l12: coef(lambda, "lambda", "l12", base)?,
            l22: coef(lambda, "lambda", "l22", base)?,
            mu: constant(model, "model", "mu", base)?,
            horizon,
            steps,
            experiment,
        })
    }

    fn experiment(t: &Table, base: &Path) -> Result<Experiment> {
        let seed = match t.get("seed") {
            None => None,
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(_) => return Err(cfg_err("experiment.seed", "expected a nonnegative integer")),
        };
        let n = count(t, "experiment.n", "n")?;
        if n == Some(0) {
            return Err(cfg_err("experiment.n", "must be at least 1"));
        }
        let horizons = match t.get("horizons") {
            None => Vec::new(),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| number(v, "experiment.horizons"))
                .collect::<Result<_>>()?,
            Some(_) => return Err(cfg_err("experiment.horizons", "expected an array of numbers")),
        };
        let file = |name: &str| -> Result<Option<PathBuf>> {
            match t.get(name) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(base.join(s))),
                Some(_) => Err(cfg_err(&format!("experiment.{name}"), "expected a path")),
            }
        };
        Ok(Experiment {
            seed,
            n,
            horizons,
            stride: count(t, "experiment.stride", "stride")?,
            kernel: file("kernel")?,
            mean: file("mean")?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid over `[0, horizon]` with the file's step size.
    pub fn grid_for(&self, horizon: f64) -> Result<TimeGrid<f64>> {
        let steps = (horizon / self.dt()).round();
        if !(horizon > 0.0) || steps < 1.0 || (steps * self.dt() - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::Invalid(format!(
                "horizon {horizon} is not a positive multiple of the grid step {}",
                self.dt()
            )));
        }
        TimeGrid::new(horizon, steps as usize)
    }

    pub fn spec_for(&self, grid: &TimeGrid<f64>) -> Result<ModelSpec<f64>> {
        Ok(ModelSpec {
            drift: self.a.resolve(grid, "model.a")?,
            obs_gain: self.obs_gain.resolve(grid, "model.A")?,
            lambda: LambdaSpec {
                l11: self.l11.resolve(grid, "lambda.l11")?,
                l12: self.l12.resolve(grid, "lambda.l12")?,
                l22: self.l22.resolve(grid, "lambda.l22")?,
            },
            mu: self.mu,
            horizon: grid.horizon(),
        })
    }

    /// Validated model over `[0, horizon]`.
    pub fn model(&self, horizon: f64) -> Result<ValidatedModel<f64>> {
        let grid = self.grid_for(horizon)?;
        validate_model(&self.spec_for(&grid)?, &grid)
    }

    /// Resolved settings as sorted `key=value` lines.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("model.a".into(), self.a.canonical());
        m.insert("model.A".into(), self.obs_gain.canonical());
        m.insert("lambda.l11".into(), self.l11.canonical());
        m.insert("lambda.l12".into(), self.l12.canonical());
        m.insert("lambda.l22".into(), self.l22.canonical());
        m.insert("model.mu".into(), fmt_f64(self.mu));
        m.insert("model.T".into(), fmt_f64(self.horizon));
        m.insert("grid.N".into(), self.steps.to_string());
        m
    }
}

/// SHA-256 over sorted `key=value` lines, in lowercase hex.
pub fn config_hash(entries: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in entries {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
