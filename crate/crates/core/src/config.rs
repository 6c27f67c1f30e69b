//! Run configuration files.
//!
//! One `key = value` pair per line. Blank lines are ignored and `#` starts a
//! comment anywhere on a line. Keys may appear once; unknown keys are errors.
//!
//! ```text
//! command  = sweep
//! model_id = counterexample
//! schedule = power_law(1, -1/6)
//! regime   = shrinking
//! n_list   = 256, 1024, 4096
//! seeds    = 0..10          # or a list: 1, 5, 9
//! out      = sweep.csv
//! ```
//!
//! | key | meaning |
//! |-----|---------|
//! | `command` | `fit`, `entropy`, `oracle`, `counterexample`, `sweep`, `concentration` or `generate` |
//! | `model_id` | registered model; `param.<name>` sets its parameters |
//! | `space` | hypothesis space, defaults to the model's own |
//! | `schedule`, `regime` | bandwidth schedule and the regime it must satisfy |
//! | `n_list`, `seeds` | sweep sizes and seeds |
//! | `n`, `h`, `seed` | sample size, fixed bandwidth and seed for single runs |
//! | `theta` | hypothesis parameters for `entropy`, `oracle`, `counterexample` |
//! | `data` | dataset CSV for `fit` instead of sampling |
//! | `restarts`, `max_iters`, `step`, `tol_grad`, `bound` | optimizer settings |
//! | `reps`, `eps`, `grid` | concentration replicates, thresholds and grid size |
//! | `out`, `format`, `timing` | output path (stdout if absent), `csv` or `json`, wall-clock timing |

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fit::{FitConfig, StepRule};
use crate::hypothesis::{split_call, SpaceKind};
use crate::lab::{BandwidthSchedule, Regime};
use crate::model::model_by_id;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Entropy,
    Oracle,
    Counterexample,
    Sweep,
    Concentration,
    Generate,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fit" => Command::Fit,
            "entropy" => Command::Entropy,
            "oracle" => Command::Oracle,
            "counterexample" => Command::Counterexample,
            "sweep" => Command::Sweep,
            "concentration" => Command::Concentration,
            "generate" => Command::Generate,
            _ => return Err(Error::field("command", format!("unknown command `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::field("format", format!("expected csv or json, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model_id: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub space: Option<SpaceKind>,
    pub schedule: Option<BandwidthSchedule>,
    pub regime: Regime,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub theta: Option<Vec<f64>>,
    pub data: Option<PathBuf>,
    pub fit: FitConfig,
    pub reps: usize,
    pub eps: Vec<f64>,
    pub grid: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub timing: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            model_id: None,
            params: BTreeMap::new(),
            space: None,
            schedule: None,
            regime: Regime::Any,
            n_list: Vec::new(),
            seeds: vec![0],
            n: None,
            h: None,
            theta: None,
            data: None,
            fit: FitConfig::default(),
            reps: 100,
            eps: vec![0.05, 0.1, 0.2],
            grid: 41,
            out: None,
            format: Format::Csv,
            timing: false,
        }
    }

    /// Bandwidth for sample size `n`: the fixed `h` if set, else the schedule.
    pub fn bandwidth(&self, n: usize) -> Result<f64> {
        match (self.h, &self.schedule) {
            (Some(h), _) => Ok(h),
            (None, Some(s)) => Ok(s.bandwidth(n)),
            (None, None) => Err(Error::field("h", "set `h` or `schedule`")),
        }
    }

    /// Cross-field checks, run after parsing.
    pub fn validate(&self) -> Result<()> {
        let fit_on_file = self.command == Command::Fit && self.data.is_some();
        match self.model_id.as_deref() {
            Some(id) => {
                model_by_id(id, &self.params)?;
            }
            None if fit_on_file => {
                if self.space.is_none() {
                    return Err(Error::field("space", "required when fitting a data file without a model"));
                }
            }
            None if self.command == Command::Counterexample => {}
            None => return Err(Error::field("model_id", "required")),
        }
        if let Some(s) = &self.schedule {
            s.check_regime(self.regime)?;
        }
        if let Some(h) = self.h {
            crate::error::check_bandwidth(h).map_err(|_| Error::field("h", format!("must be finite and > 0, got {h}")))?;
        }
        self.fit.validate()?;
        match self.command {
            Command::Sweep => {
                if self.n_list.is_empty() {
                    return Err(Error::field("n_list", "a sweep needs at least one sample size"));
                }
                if self.schedule.is_none() && self.h.is_none() {
                    return Err(Error::field("schedule", "a sweep needs `schedule` or `h`"));
                }
            }
            Command::Fit | Command::Generate | Command::Concentration => {
                if self.data.is_none() && self.n.is_none() {
                    return Err(Error::field("n", "required"));
                }
                if self.command != Command::Generate && self.schedule.is_none() && self.h.is_none() {
                    return Err(Error::field("h", "set `h` or `schedule`"));
                }
            }
            Command::Entropy | Command::Oracle | Command::Counterexample => {}
        }
        if self.command == Command::Concentration && self.grid < 2 {
            return Err(Error::field("grid", "needs at least two points"));
        }
        Ok(())
    }
}

fn value_of<T: FromStr>(field: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::field(field, format!("cannot parse `{v}`")))
}

fn list_of<T: FromStr>(field: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value_of(field, s))
        .collect()
}

fn seeds(v: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = value_of("seeds", a.trim())?;
        let b: u64 = value_of("seeds", b.trim())?;
        if b <= a {
            return Err(Error::field("seeds", format!("empty range `{v}`")));
        }
        return Ok((a..b).collect());
    }
    list_of("seeds", v)
}

fn step_rule(v: &str) -> Result<StepRule> {
    let bad = || Error::field("step", format!("expected fixed(eta) or backtracking(shrink), got `{v}`"));
    let (name, args) = split_call(v).ok_or_else(bad)?;
    let [arg] = args.as_slice() else { return Err(bad()) };
    let x: f64 = arg.parse().map_err(|_| bad())?;
    match name {
        "fixed" => Ok(StepRule::Fixed(x)),
        "backtracking" => Ok(StepRule::Backtracking(x)),
        _ => Err(bad()),
    }
}

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::ConfigParse {
                line: line_no,
                message: "empty key".into(),
            });
        }
        if !seen.insert(k.to_string()) {
            return Err(Error::ConfigParse {
                line: line_no,
                message: format!("duplicate key `{k}`"),
            });
        }
        pairs.push((line_no, k.to_string(), v.to_string()));
    }
    let command = pairs
        .iter()
        .find(|(_, k, _)| k == "command")
        .ok_or_else(|| Error::field("command", "required"))?;
    let mut cfg = RunConfig::new(value_of::<String>("command", &command.2)?.parse()?);
    for (line, k, v) in &pairs {
        let v = v.as_str();
        match k.as_str() {
            "command" => {}
            "model_id" => cfg.model_id = Some(v.to_string()),
            "space" => cfg.space = Some(v.parse().map_err(|e: Error| Error::field("space", e.to_string()))?),
            "schedule" => cfg.schedule = Some(v.parse()?),
            "regime" => cfg.regime = v.parse()?,
            "n_list" => cfg.n_list = list_of("n_list", v)?,
            "seeds" => cfg.seeds = seeds(v)?,
            "n" => cfg.n = Some(value_of("n", v)?),
            "h" => cfg.h = Some(value_of("h", v)?),
            "theta" => cfg.theta = Some(list_of("theta", v)?),
            "data" => cfg.data = Some(PathBuf::from(v)),
            "restarts" => cfg.fit.restarts = value_of("restarts", v)?,
            "max_iters" => cfg.fit.max_iters = value_of("max_iters", v)?,
            "step" => cfg.fit.step_rule = step_rule(v)?,
            "tol_grad" => cfg.fit.tol_grad = value_of("tol_grad", v)?,
            "bound" => cfg.fit.bound = value_of("bound", v)?,
            "seed" => cfg.fit.seed = value_of("seed", v)?,
            "reps" => cfg.reps = value_of("reps", v)?,
            "eps" => cfg.eps = list_of("eps", v)?,
            "grid" => cfg.grid = value_of("grid", v)?,
            "out" => cfg.out = Some(PathBuf::from(v)),
            "format" => cfg.format = v.parse()?,
            "timing" => cfg.timing = value_of("timing", v)?,
            other => match other.strip_prefix("param.") {
                Some(name) if !name.is_empty() => {
                    cfg.params.insert(name.to_string(), value_of(other, v)?);
                }
                _ => {
                    return Err(Error::ConfigParse {
                        line: *line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            },
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
