//! Executing a parsed [`RunConfig`]; the `mee` binary is a thin shell around
//! [`execute`].

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Command, Format, RunConfig};
use crate::error::{Error, Result};
use crate::fit::fit;
use crate::hypothesis::{Hypothesis, SpaceKind};
use crate::io::{self, emit, to_json};
use crate::lab::{fit_rate, line_grid, run_sweep, sample_error_estimate, Metric, TrialConfig};
use crate::model::{model_by_id, RegressionModel};
use crate::oracle::{cx_decompose, entropy, v_functional, CounterexampleDecomposition};
use crate::rng::stream;

// datasets from `generate` and `fit` share this stream, so fitting a
// generated file and fitting with the same seed agree
const DATA_STREAM: u64 = 0xda7a;

fn model(cfg: &RunConfig) -> Result<RegressionModel> {
    let id = cfg
        .model_id
        .as_deref()
        .ok_or_else(|| Error::field("model_id", "required"))?;
    model_by_id(id, &cfg.params)
}

fn space(cfg: &RunConfig, m: Option<&RegressionModel>) -> Result<SpaceKind> {
    cfg.space
        .clone()
        .or_else(|| m.map(|m| m.space.clone()))
        .ok_or_else(|| Error::field("space", "required"))
}

fn n(cfg: &RunConfig) -> Result<usize> {
    cfg.n.ok_or_else(|| Error::field("n", "required"))
}

/// `path` with `suffix` appended to the file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// The hypothesis named by `theta`, defaulting to `f*`.
fn hypothesis(cfg: &RunConfig, m: &RegressionModel) -> Result<Hypothesis> {
    let space = space(cfg, Some(m))?;
    match &cfg.theta {
        Some(t) => Hypothesis::new(space, t.clone(), cfg.fit.bound),
        None if space == m.space => Ok(m.f_star.clone()),
        None => Err(Error::field("theta", "required when `space` differs from the model's")),
    }
}

#[derive(Serialize)]
struct Decomposition {
    #[serde(flatten)]
    parts: CounterexampleDecomposition,
    r: f64,
}

/// Run one configured command, writing to `cfg.out` or stdout.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out.as_deref();
    match cfg.command {
        Command::Generate => {
            let m = model(cfg)?;
            let n = n(cfg)?;
            let (x, y) = m.sample_pairs(n, &mut stream(cfg.fit.seed, DATA_STREAM, n as u64));
            emit(&io::dataset_csv(&x, &y), out)
        }
        Command::Fit => {
            let m = cfg.model_id.as_ref().map(|_| model(cfg)).transpose()?;
            let data = match (&cfg.data, &m) {
                (Some(p), _) => io::read_dataset(p)?,
                (None, Some(m)) => {
                    let n = n(cfg)?;
                    m.sample(n, &mut stream(cfg.fit.seed, DATA_STREAM, n as u64))?
                }
                (None, None) => return Err(Error::field("data", "set `data` or `model_id`")),
            };
            let space = space(cfg, m.as_ref())?;
            let fitted = fit(&data, &space, cfg.bandwidth(data.len())?, &cfg.fit)?;
            emit(&io::fitted_model_json(&fitted), out)?;
            if let Some(p) = out {
                emit(&io::residuals_csv(&data.residuals(&fitted.hypothesis)), Some(&sibling(p, ".residuals.csv")))?;
            }
            Ok(())
        }
        Command::Entropy | Command::Oracle => {
            let m = model(cfg)?;
            let f = hypothesis(cfg, &m)?;
            let (report, value) = if cfg.command == Command::Entropy {
                let r = entropy(&m, &f)?;
                (r, r.r)
            } else {
                let r = v_functional(&m, &f)?;
                (r, r.v)
            };
            emit(&io::oracle_report_json(&report, value, &m.id, &f.theta), out)
        }
        Command::Counterexample => {
            let bound = cfg.fit.bound;
            match cfg.theta.as_deref() {
                Some(&[f1, f2]) => {
                    let parts = cx_decompose(f1, f2, bound)?;
                    emit(&to_json(&Decomposition { parts, r: parts.r() }), out)
                }
                Some(_) => Err(Error::field("theta", "the counterexample takes two values (f1, f2)")),
                None => {
                    let k = cfg.grid.max(2);
                    let rows = (0..k)
                        .map(|i| {
                            let t = -2.0 * bound + 4.0 * bound * i as f64 / (k - 1) as f64;
                            cx_decompose(0.5 * t, -0.5 * t, bound)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    match cfg.format {
                        Format::Csv => emit(&io::decomposition_csv(&rows), out),
                        Format::Json => emit(&to_json(&rows), out),
                    }
                }
            }
        }
        Command::Sweep => {
            let m = model(cfg)?;
            let space = space(cfg, Some(&m))?;
            let schedule = match (cfg.h, cfg.schedule) {
                (Some(h), _) => crate::lab::BandwidthSchedule::Fixed(h),
                (None, Some(s)) => s,
                (None, None) => return Err(Error::field("schedule", "required")),
            };
            let trial = TrialConfig {
                fit: cfg.fit.clone(),
                timing: cfg.timing,
            };
            let outcome = run_sweep(&m, &space, &cfg.n_list, &schedule, &cfg.seeds, &trial)?;
            emit(&io::records_text(&outcome.records, cfg.format), out)?;
            let mut rates = Vec::new();
            let mut skipped = Vec::new();
            for metric in Metric::ALL {
                match fit_rate(&outcome.records, metric) {
                    Ok(r) => rates.push(r),
                    Err(e) => skipped.push((metric.as_str(), e.to_string())),
                }
            }
            let summary = io::summary_json(&rates, &skipped, &outcome.failures);
            match out {
                Some(p) => emit(&summary, Some(&sibling(p, ".summary.json"))),
                None => {
                    eprint!("{summary}");
                    Ok(())
                }
            }
        }
        Command::Concentration => {
            let m = model(cfg)?;
            let space = space(cfg, Some(&m))?;
            let n = n(cfg)?;
            let grid = line_grid(&space, cfg.fit.bound, cfg.grid, 0.0)?;
            let report = sample_error_estimate(&m, &grid, n, cfg.bandwidth(n)?, cfg.reps, cfg.fit.seed, &cfg.eps)?;
            match cfg.format {
                Format::Csv => emit(&io::concentration_csv(&report), out)?,
                Format::Json => emit(&to_json(&report), out)?,
            }
            match report.rows.iter().find(|r| !r.ok) {
                Some(r) => Err(Error::Tolerance(format!(
                    "exceedance {} at ε = {} is above {} + {}",
                    r.freq, r.eps, r.bound, r.slack
                ))),
                None => Ok(()),
            }
        }
    }
}
