use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimator::FitOptions;
use crate::inference::SparsitySets;
use crate::io::panel::{Layout, StateTransform};
use crate::io::report::Format;
use crate::numerics::KernelKind;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SVFM_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    /// `points` equally spaced values from `start` to `stop` inclusive.
    Range { start: f64, stop: f64, points: usize },
    List(Vec<f64>),
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Range { start, stop, points } => match points {
                0 => vec![],
                1 => vec![*start],
                p => (0..*p).map(|k| start + (stop - start) * k as f64 / (p - 1) as f64).collect(),
            },
            GridSpec::List(v) => v.clone(),
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;
    /// `start:stop:points` or a comma-separated list.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot read grid '{s}'"));
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(GridSpec::Range {
                start: parts[0].parse().map_err(|_| bad())?,
                stop: parts[1].parse().map_err(|_| bad())?,
                points: parts[2].parse().map_err(|_| bad())?,
            })
        } else {
            s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>().map(GridSpec::List)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparsitySpec {
    Diagonal,
    Banded(usize),
    Full,
}

impl SparsitySpec {
    pub fn sets(self) -> SparsitySets {
        match self {
            SparsitySpec::Diagonal => SparsitySets::banded(0),
            SparsitySpec::Banded(q) => SparsitySets::banded(q),
            SparsitySpec::Full => SparsitySets::full(),
        }
    }
}

impl FromStr for SparsitySpec {
    type Err = Error;
    /// `diagonal`, `banded:q` or `full`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(SparsitySpec::Diagonal),
            "full" => Ok(SparsitySpec::Full),
            _ => s
                .strip_prefix("banded:")
                .and_then(|q| q.parse().ok())
                .map(SparsitySpec::Banded)
                .ok_or_else(|| Error::Config(format!("cannot read sparsity '{s}'"))),
        }
    }
}

/// Settings shared by every command. Read from flat `key = value` text, then overridden by flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelKind,
    pub h: f64,
    pub r: usize,
    pub grid: GridSpec,
    pub sparsity: SparsitySpec,
    pub min_effective_size: f64,
    /// Relative weight floor for unprojecting factors.
    pub floor_rel: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub format: Format,
    pub layout: Layout,
    pub state_column: Option<String>,
    pub state_transform: StateTransform,
    pub demean: bool,
    pub reps: Option<usize>,
    pub initial_train: Option<usize>,
    pub refit_every: usize,
    pub periods_per_year: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelKind::Gaussian,
            h: 0.3,
            r: 1,
            grid: GridSpec::Range { start: -1.5, stop: 1.5, points: 31 },
            sparsity: SparsitySpec::Diagonal,
            min_effective_size: 10.0,
            floor_rel: crate::estimator::DEFAULT_FLOOR_REL,
            seed: 0,
            output_dir: std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("svfm-out")),
            format: Format::Csv,
            layout: Layout::RowsAreTime,
            state_column: None,
            state_transform: StateTransform::None,
            demean: false,
            reps: None,
            initial_train: None,
            refit_every: 21,
            periods_per_year: 252.0,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "kernel",
        "h",
        "r",
        "grid",
        "sparsity",
        "min_effective_size",
        "floor_rel",
        "seed",
        "output_dir",
        "format",
        "layout",
        "state_column",
        "state_transform",
        "demean",
        "reps",
        "initial_train",
        "refit_every",
        "periods_per_year",
    ];

    /// Sets one key. Dashes in the key are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "kernel" => self.kernel = value.parse().map_err(|_| Error::Config(format!("unknown kernel '{value}'")))?,
            "h" => self.h = num(&key, value)?,
            "r" => self.r = num(&key, value)?,
            "grid" => self.grid = value.parse()?,
            "sparsity" => self.sparsity = value.parse()?,
            "min_effective_size" => self.min_effective_size = num(&key, value)?,
            "floor_rel" => self.floor_rel = num(&key, value)?,
            "seed" => self.seed = num(&key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "format" => self.format = value.parse()?,
            "layout" => self.layout = value.parse()?,
            "state_column" => self.state_column = Some(value.to_string()),
            "state_transform" => self.state_transform = value.parse()?,
            "demean" => self.demean = num(&key, value)?,
            "reps" => self.reps = Some(num(&key, value)?),
            "initial_train" => self.initial_train = Some(num(&key, value)?),
            "refit_every" => self.refit_every = num(&key, value)?,
            "periods_per_year" => self.periods_per_year = num(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
            self.set(key.trim(), value).map_err(|e| Error::Config(format!("line {}: {e}", k + 1)))?;
        }
        Ok(())
    }

    pub fn from_str_checked(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.merge_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        RunConfig::from_str_checked(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if self.r == 0 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        if self.grid.values().is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if !(self.floor_rel >= 0.0) {
            return Err(Error::Config("floor_rel must be nonnegative".into()));
        }
        if self.refit_every == 0 {
            return Err(Error::Config("refit_every must be at least 1".into()));
        }
        if !(self.periods_per_year > 0.0) {
            return Err(Error::Config("periods_per_year must be positive".into()));
        }
        Ok(())
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions { kernel: self.kernel, min_effective_size: self.min_effective_size, demean: self.demean, ..Default::default() }
    }

    /// `key = value` text that reads back to this configuration.
    pub fn to_text(&self) -> String {
        let grid = match &self.grid {
            GridSpec::Range { start, stop, points } => format!("{start}:{stop}:{points}"),
            GridSpec::List(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        };
        let sparsity = match self.sparsity {
            SparsitySpec::Diagonal => "diagonal".to_string(),
            SparsitySpec::Banded(q) => format!("banded:{q}"),
            SparsitySpec::Full => "full".to_string(),
        };
        let mut lines = vec![
            format!("kernel = {}", self.kernel),
            format!("h = {}", self.h),
            format!("r = {}", self.r),
            format!("grid = {grid}"),
            format!("sparsity = {sparsity}"),
            format!("min_effective_size = {}", self.min_effective_size),
            format!("floor_rel = {}", self.floor_rel),
            format!("seed = {}", self.seed),
            format!("output_dir = {}", self.output_dir.display()),
            format!("format = {}", if self.format == Format::Json { "json" } else { "csv" }),
            format!("layout = {}", if self.layout == Layout::RowsAreSeries { "rows_are_series" } else { "rows_are_time" }),
            format!(
                "state_transform = {}",
                match self.state_transform {
                    StateTransform::None => "none",
                    StateTransform::Log => "log",
                    StateTransform::LogNormalized => "log_normalized",
                }
            ),
            format!("demean = {}", self.demean),
            format!("refit_every = {}", self.refit_every),
            format!("periods_per_year = {}", self.periods_per_year),
        ];
        if let Some(c) = &self.state_column {
            lines.push(format!("state_column = {c}"));
        }
        if let Some(r) = self.reps {
            lines.push(format!("reps = {r}"));
        }
        if let Some(t) = self.initial_train {
            lines.push(format!("initial_train = {t}"));
        }
        lines.join("\n") + "\n"
    }
}
