//! Synthetic consistency experiments.
//!
//! A trial samples `n` points from a model, fits with a bandwidth taken from
//! a [`BandwidthSchedule`], and scores the fit with the oracle. Sweeps run
//! trials over `n × seeds` in parallel; each trial draws from its own stream
//! keyed by `(seed, n)`, so a record never depends on which other trials ran.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_bandwidth, Error, Result};
use crate::fit::{fit, FitConfig};
use crate::hypothesis::{Hypothesis, SpaceKind};
use crate::model::RegressionModel;
use crate::objective::Objective;
use crate::oracle::{cx_minimizer_distance, entropy, info_error_true, CX_OPTIMAL_V};
use crate::rng::stream;

pub use crate::oracle::l2_centered_error;

/// `h` as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSchedule {
    /// `c · n^θ`.
    PowerLaw { c: f64, theta: f64 },
    Fixed(f64),
}

impl BandwidthSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthSchedule::PowerLaw { c, theta } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::field("schedule", format!("power-law constant must be finite and > 0, got {c}")));
                }
                if !theta.is_finite() {
                    return Err(Error::field("schedule", "power-law exponent must be finite"));
                }
                Ok(())
            }
            BandwidthSchedule::Fixed(h) => check_bandwidth(h),
        }
    }

    pub fn bandwidth(&self, n: usize) -> f64 {
        match *self {
            BandwidthSchedule::PowerLaw { c, theta } => c * (n as f64).powf(theta),
            BandwidthSchedule::Fixed(h) => h,
        }
    }

    /// Check that the schedule falls in the given asymptotic regime.
    pub fn check_regime(&self, regime: Regime) -> Result<()> {
        self.validate()?;
        let ok = match (regime, *self) {
            (Regime::Any, _) => true,
            (Regime::Fixed, BandwidthSchedule::Fixed(_)) => true,
            // h → 0 while h²√n → ∞
            (Regime::Shrinking, BandwidthSchedule::PowerLaw { theta, .. }) => theta > -0.25 && theta < 0.0,
            // h → ∞ while h^4 = o(n)
            (Regime::Growing, BandwidthSchedule::PowerLaw { theta, .. }) => theta > 0.0 && theta < 0.25,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::field("schedule", format!("{self} does not satisfy the {regime} regime")))
        }
    }
}

impl fmt::Display for BandwidthSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthSchedule::PowerLaw { c, theta } => write!(f, "power_law({c},{theta})"),
            BandwidthSchedule::Fixed(h) => write!(f, "fixed({h})"),
        }
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad number `{s}`"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad number `{s}`"))?;
        return Ok(a / b);
    }
    s.parse().map_err(|_| format!("bad number `{s}`"))
}

/// `power_law(c,theta)` or `fixed(h)`; numbers may be written as fractions
/// such as `-1/6`.
impl FromStr for BandwidthSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| Error::field("schedule", m);
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| bad(format!("expected power_law(c,theta) or fixed(h), got `{s}`")))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| bad(format!("missing `)` in `{s}`")))?;
        let args: Vec<f64> = args.split(',').map(parse_number).collect::<Result<_, _>>().map_err(bad)?;
        let schedule = match (name.trim(), args.as_slice()) {
            ("power_law", &[c, theta]) => BandwidthSchedule::PowerLaw { c, theta },
            ("fixed", &[h]) => BandwidthSchedule::Fixed(h),
            _ => return Err(bad(format!("unrecognized schedule `{s}`"))),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Asymptotic bandwidth regimes a sweep can be required to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `h → 0` and `h²√n → ∞`.
    Shrinking,
    /// `h → ∞` and `h⁴/n → 0`.
    Growing,
    Fixed,
    Any,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Shrinking => "shrinking",
            Regime::Growing => "growing",
            Regime::Fixed => "fixed",
            Regime::Any => "any",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "shrinking" => Ok(Regime::Shrinking),
            "growing" => Ok(Regime::Growing),
            "fixed" => Ok(Regime::Fixed),
            "any" => Ok(Regime::Any),
            other => Err(Error::field("regime", format!("expected shrinking, growing, fixed or any, got `{other}`"))),
        }
    }
}

/// Scores of one fitted trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub model_id: String,
    pub space: String,
    pub n: usize,
    pub seed: u64,
    pub h: f64,
    /// `R(f_z) - R*`.
    pub entropy_gap: f64,
    /// `‖f_z + E(f* - f_z) - f*‖²`.
    pub l2_centered: f64,
    /// Distance to the minimizer set, where it is known.
    pub dist_minset: Option<f64>,
    /// `min_b ‖f_z + b - f*‖`, the square root of `l2_centered`.
    pub min_b_l2: f64,
    /// Zero unless timing was requested, so records stay reproducible.
    pub wall_time_ms: u64,
}

/// Settings shared by every trial of a sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialConfig {
    pub fit: FitConfig,
    /// Record wall-clock time per trial.
    pub timing: bool,
}

// grid resolution for R* when no exact optimum is known
const OPTIMUM_GRID: usize = 201;

/// `R* = inf_f R(f)`.
///
/// Exact for the two-interval model and for homoskedastic noise, where the
/// optimum is `f*` itself (up to constants); otherwise the minimum over a grid
/// in the model's own space.
pub fn optimal_entropy(model: &RegressionModel) -> Result<f64> {
    if model.id == "counterexample" {
        return Ok(-(-CX_OPTIMAL_V).ln());
    }
    if model.is_homoskedastic() {
        return Ok(entropy(model, &model.f_star)?.r);
    }
    let space = &model.space;
    let m = model.bound;
    let axis: Vec<f64> = (0..OPTIMUM_GRID)
        .map(|i| -m + 2.0 * m * i as f64 / (OPTIMUM_GRID - 1) as f64)
        .collect();
    let grid: Vec<Vec<f64>> = match space.dim() {
        1 => axis.iter().map(|&a| vec![a]).collect(),
        2 => axis.iter().flat_map(|&a| axis.iter().map(move |&b| vec![a, b])).collect(),
        d => {
            return Err(Error::InvalidModel(format!(
                "no exact optimum and a {d}-parameter space is too large to grid"
            )))
        }
    };
    grid.par_iter()
        .filter(|t| space.sup_bound(t) <= m)
        .map(|t| entropy(model, &Hypothesis::new(space.clone(), t.clone(), m)?).map(|r| r.r))
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
}

// stream tags: (seed, TRIAL_STREAM, n) for trials, (seed, CONC_STREAM, rep)
// for concentration replicates
const TRIAL_STREAM: u64 = 0x7a1a;
const CONC_STREAM: u64 = 0xc0c0;

/// Scores of a fitted hypothesis against the model, `r_star` precomputed.
pub fn score(model: &RegressionModel, f: &Hypothesis, r_star: f64) -> Result<(f64, f64, Option<f64>)> {
    let gap = entropy(model, f)?.r - r_star;
    let l2 = l2_centered_error(model, f);
    let dist = (model.id == "counterexample").then(|| cx_minimizer_distance(f));
    Ok((gap, l2, dist))
}

/// Sample, fit and score one trial.
pub fn run_trial(
    model: &RegressionModel,
    space: &SpaceKind,
    n: usize,
    schedule: &BandwidthSchedule,
    seed: u64,
    cfg: &TrialConfig,
) -> Result<ExperimentRecord> {
    let r_star = optimal_entropy(model)?;
    trial_with_optimum(model, space, n, schedule, seed, cfg, r_star)
}

fn trial_with_optimum(
    model: &RegressionModel,
    space: &SpaceKind,
    n: usize,
    schedule: &BandwidthSchedule,
    seed: u64,
    cfg: &TrialConfig,
    r_star: f64,
) -> Result<ExperimentRecord> {
    let started = Instant::now();
    schedule.validate()?;
    let h = schedule.bandwidth(n);
    let mut rng = stream(seed, TRIAL_STREAM, n as u64);
    let data = model.sample(n, &mut rng)?;
    let fit_cfg = FitConfig {
        seed: rng.next_u64(),
        ..cfg.fit.clone()
    };
    let fitted = fit(&data, space, h, &fit_cfg)?;
    let (entropy_gap, l2_centered, dist_minset) = score(model, &fitted.hypothesis, r_star)?;
    Ok(ExperimentRecord {
        model_id: model.id.clone(),
        space: space.to_string(),
        n,
        seed,
        h,
        entropy_gap,
        l2_centered,
        dist_minset,
        min_b_l2: l2_centered.sqrt(),
        wall_time_ms: if cfg.timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        },
    })
}

/// A trial that returned an error instead of a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub n: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepOutcome {
    /// Ordered by `n` as listed, then by seed as listed.
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<TrialFailure>,
}

/// Every `(n, seed)` combination; a failing trial is reported and the rest
/// continue.
pub fn run_sweep(
    model: &RegressionModel,
    space: &SpaceKind,
    n_list: &[usize],
    schedule: &BandwidthSchedule,
    seeds: &[u64],
    cfg: &TrialConfig,
) -> Result<SweepOutcome> {
    schedule.validate()?;
    cfg.fit.validate()?;
    if n_list.is_empty() || seeds.is_empty() {
        return Ok(SweepOutcome::default());
    }
    let r_star = optimal_entropy(model)?;
    let jobs: Vec<(usize, u64)> = n_list
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let results: Vec<Result<ExperimentRecord>> = jobs
        .par_iter()
        .map(|&(n, seed)| trial_with_optimum(model, space, n, schedule, seed, cfg, r_star))
        .collect();
    let mut out = SweepOutcome::default();
    for ((n, seed), r) in jobs.into_iter().zip(results) {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.failures.push(TrialFailure {
                n,
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Record fields that rates can be fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    EntropyGap,
    L2Centered,
    DistMinset,
    MinBL2,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::EntropyGap, Metric::L2Centered, Metric::DistMinset, Metric::MinBL2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::EntropyGap => "entropy_gap",
            Metric::L2Centered => "l2_centered",
            Metric::DistMinset => "dist_minset",
            Metric::MinBL2 => "min_b_l2",
        }
    }

    pub fn get(&self, r: &ExperimentRecord) -> Option<f64> {
        match self {
            Metric::EntropyGap => Some(r.entropy_gap),
            Metric::L2Centered => Some(r.l2_centered),
            Metric::DistMinset => r.dist_minset,
            Metric::MinBL2 => Some(r.min_b_l2),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown metric `{s}`")))
    }
}

/// Least-squares line through `(log n, log median)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub metric: Metric,
    pub slope: f64,
    pub intercept: f64,
    /// `(n, median)` per distinct `n`, ascending.
    pub medians: Vec<(usize, f64)>,
    /// Values dropped for being non-positive (or missing).
    pub excluded: usize,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Ordinary least squares `y = intercept + slope · x`.
pub fn ols(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("a line needs at least two points".into()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Log-log slope of the per-`n` median of `metric`.
pub fn fit_rate(records: &[ExperimentRecord], metric: Metric) -> Result<RateFit> {
    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    let mut excluded = 0;
    for r in records {
        match metric.get(r) {
            Some(v) if v > 0.0 && v.is_finite() => by_n.entry(r.n).or_default().push(v),
            _ => excluded += 1,
        }
    }
    let medians: Vec<(usize, f64)> = by_n
        .into_iter()
        .filter_map(|(n, mut v)| median(&mut v).map(|m| (n, m)))
        .collect();
    if medians.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs at least 3 distinct n with positive values, got {}",
            medians.len()
        )));
    }
    let points: Vec<(f64, f64)> = medians.iter().map(|&(n, m)| ((n as f64).ln(), m.ln())).collect();
    let (slope, intercept) = ols(&points)?;
    Ok(RateFit {
        metric,
        slope,
        intercept,
        medians,
        excluded,
    })
}

/// One row of the exceedance table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exceedance {
    pub eps: f64,
    /// Fraction of replicates with `S_z - mean_S > ε`.
    pub freq: f64,
    /// `exp(-2nh²ε²)`.
    pub bound: f64,
    /// Three binomial standard deviations at the bound.
    pub slack: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub h: f64,
    pub reps: usize,
    /// `None` when no replicates were run.
    pub mean_s: Option<f64>,
    /// `S_z` per replicate.
    pub samples: Vec<f64>,
    pub rows: Vec<Exceedance>,
}

/// `S_z = max_{f ∈ grid} |E_{h,z}(f) - E_h(f)|` over fresh samples, and how
/// often it exceeds its mean by more than each `ε`.
pub fn sample_error_estimate(
    model: &RegressionModel,
    grid: &[Hypothesis],
    n: usize,
    h: f64,
    reps: usize,
    seed: u64,
    eps: &[f64],
) -> Result<ConcentrationReport> {
    check_bandwidth(h)?;
    let Some(first) = grid.first() else {
        return Err(Error::InvalidInput("parameter grid is empty".into()));
    };
    let space = &first.space;
    if grid.iter().any(|f| &f.space != space) {
        return Err(Error::InvalidInput("grid hypotheses must share one space".into()));
    }
    if n < 1 {
        return Err(Error::DegenerateSample { needed: 1, got: n });
    }
    if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::InvalidInput(format!("ε must be finite and > 0, got {e}")));
    }
    let truth: Vec<f64> = grid
        .par_iter()
        .map(|f| info_error_true(model, f, h))
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = model.sample(n, &mut stream(seed, CONC_STREAM, rep))?;
            let obj = Objective::new(&data, space, h)?;
            Ok(grid
                .iter()
                .zip(&truth)
                .map(|(f, t)| (obj.value(&f.theta) - t).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    if reps == 0 {
        return Ok(ConcentrationReport {
            n,
            h,
            reps,
            mean_s: None,
            samples,
            rows: Vec::new(),
        });
    }
    let mean = samples.iter().sum::<f64>() / reps as f64;
    let rows = eps
        .iter()
        .map(|&e| {
            let hits = samples.iter().filter(|&&s| s - mean > e).count();
            let freq = hits as f64 / reps as f64;
            let bound = (-2.0 * n as f64 * h * h * e * e).exp();
            let p = bound.min(1.0);
            let slack = 3.0 * (p * (1.0 - p) / reps as f64).sqrt();
            Exceedance {
                eps: e,
                freq,
                bound,
                slack,
                ok: freq <= bound + slack,
            }
        })
        .collect();
    Ok(ConcentrationReport {
        n,
        h,
        reps,
        mean_s: Some(mean),
        samples,
        rows,
    })
}

/// Hypotheses in `space` on an evenly spaced grid, one axis per free
/// parameter, restricted to `sup |f| ≤ bound`.
///
/// For two-piece constant spaces only the difference between the pieces
/// matters to the objective, so `first` fixes `θ₁` and the grid runs over
/// `θ₂` alone.
pub fn line_grid(space: &SpaceKind, bound: f64, k: usize, first: f64) -> Result<Vec<Hypothesis>> {
    if k < 2 {
        return Err(Error::InvalidInput("grid needs at least two points".into()));
    }
    if space.dim() != 2 {
        return Err(Error::InvalidInput("line grids need a two-parameter space".into()));
    }
    (0..k)
        .map(|i| {
            let t = -bound + 2.0 * bound * i as f64 / (k - 1) as f64;
            Hypothesis::new(space.clone(), vec![first, t], bound)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::model_by_id;

    #[test]
    fn schedules() {
        let s = BandwidthSchedule::PowerLaw { c: 1.0, theta: -1.0 / 6.0 };
        assert!((s.bandwidth(64) - 0.5).abs() < 1e-15);
        let s = BandwidthSchedule::PowerLaw { c: 1.0, theta: 1.0 / 8.0 };
        assert!((s.bandwidth(256) - 2.0).abs() < 1e-15);
        assert_eq!(BandwidthSchedule::Fixed(1.0).bandwidth(12345), 1.0);
        let parsed: BandwidthSchedule = "power_law(1, -1/6)".parse().unwrap();
        assert_eq!(parsed, BandwidthSchedule::PowerLaw { c: 1.0, theta: -1.0 / 6.0 });
        assert_eq!("fixed(8)".parse::<BandwidthSchedule>().unwrap(), BandwidthSchedule::Fixed(8.0));
        assert!("fixed(0)".parse::<BandwidthSchedule>().is_err());
        assert!("power_law(-1, 0.1)".parse::<BandwidthSchedule>().is_err());
        assert!("cosine(1)".parse::<BandwidthSchedule>().is_err());
    }

    #[test]
    fn regimes() {
        let shrink = BandwidthSchedule::PowerLaw { c: 1.0, theta: -1.0 / 6.0 };
        let grow = BandwidthSchedule::PowerLaw { c: 1.0, theta: 1.0 / 8.0 };
        assert!(shrink.check_regime(Regime::Shrinking).is_ok());
        assert!(shrink.check_regime(Regime::Growing).is_err());
        assert!(grow.check_regime(Regime::Growing).is_ok());
        assert!(BandwidthSchedule::PowerLaw { c: 1.0, theta: -0.3 }.check_regime(Regime::Shrinking).is_err());
        assert!(BandwidthSchedule::PowerLaw { c: 1.0, theta: 0.25 }.check_regime(Regime::Growing).is_err());
        assert!(BandwidthSchedule::Fixed(1.0).check_regime(Regime::Fixed).is_ok());
        assert!(BandwidthSchedule::Fixed(1.0).check_regime(Regime::Shrinking).is_err());
    }

    fn record(n: usize, v: f64) -> ExperimentRecord {
        ExperimentRecord {
            model_id: "m".into(),
            space: "s".into(),
            n,
            seed: 0,
            h: 1.0,
            entropy_gap: v,
            l2_centered: v,
            dist_minset: None,
            min_b_l2: v.sqrt(),
            wall_time_ms: 0,
        }
    }

    #[test]
    fn exact_power_laws_give_exact_slopes() {
        let ns = [100, 400, 1600, 6400];
        let recs: Vec<_> = ns.iter().map(|&n| record(n, (n as f64).powf(-1.0 / 6.0))).collect();
        let r = fit_rate(&recs, Metric::EntropyGap).unwrap();
        assert!((r.slope + 1.0 / 6.0).abs() < 1e-12, "{}", r.slope);
        let recs: Vec<_> = ns.iter().map(|&n| record(n, 3.0 * (n as f64).powf(-0.5))).collect();
        let r = fit_rate(&recs, Metric::L2Centered).unwrap();
        assert!((r.slope + 0.5).abs() < 1e-12);
        assert!((r.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_excludes_and_requires_three_sizes() {
        let mut recs: Vec<_> = [10, 20, 40].iter().map(|&n| record(n, 1.0 / n as f64)).collect();
        recs.push(record(40, -1.0));
        recs.push(record(40, 0.0));
        let r = fit_rate(&recs, Metric::EntropyGap).unwrap();
        assert_eq!(r.excluded, 2);
        assert!(fit_rate(&recs[..2], Metric::EntropyGap).is_err());
        // dist_minset is missing on every record
        assert!(fit_rate(&recs, Metric::DistMinset).is_err());
        assert_eq!("min_b_l2".parse::<Metric>().unwrap(), Metric::MinBL2);
        assert!("nope".parse::<Metric>().is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    fn cfg() -> TrialConfig {
        TrialConfig {
            fit: FitConfig {
                restarts: 2,
                ..FitConfig::default()
            },
            timing: false,
        }
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let m = model_by_id("counterexample", &BTreeMap::new()).unwrap();
        let s = BandwidthSchedule::PowerLaw { c: 1.0, theta: -1.0 / 6.0 };
        let out = run_sweep(&m, &m.space, &[40, 80], &s, &[1, 2, 3], &cfg()).unwrap();
        assert_eq!(out.records.len(), 6);
        assert!(out.failures.is_empty());
        let again = run_sweep(&m, &m.space, &[40, 80], &s, &[1, 2, 3], &cfg()).unwrap();
        assert_eq!(out, again);
        assert_eq!(out.records[3].n, 80);
        assert_eq!(out.records[3].seed, 1);
        for r in &out.records {
            assert!(r.entropy_gap >= -1e-9);
            assert!(r.l2_centered >= 0.0);
            assert!(r.dist_minset.is_some());
            assert_eq!(r.wall_time_ms, 0);
        }
        // a trial does not depend on its neighbours
        let single = run_trial(&m, &m.space, 80, &s, 2, &cfg()).unwrap();
        assert_eq!(single, out.records[4]);
        assert!(run_sweep(&m, &m.space, &[], &s, &[1], &cfg()).unwrap().records.is_empty());
    }

    #[test]
    fn failed_trials_are_collected() {
        let m = model_by_id("gaussian", &BTreeMap::new()).unwrap();
        let s = BandwidthSchedule::Fixed(1.0);
        let out = run_sweep(&m, &m.space, &[1, 30], &s, &[0], &cfg()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].n, 1);
    }

    #[test]
    fn optimal_entropy_values() {
        let cx = model_by_id("counterexample", &BTreeMap::new()).unwrap();
        assert!((optimal_entropy(&cx).unwrap() - 0.470_003_629_245_735_5).abs() < 1e-12);
        let g = model_by_id("gaussian", &BTreeMap::new()).unwrap();
        // -log(1/(2√π))
        let want = (2.0 * std::f64::consts::PI.sqrt()).ln();
        assert!((optimal_entropy(&g).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn concentration_report() {
        let m = model_by_id("gaussian", &BTreeMap::new()).unwrap();
        let grid = line_grid(&m.space, 1.0, 5, 0.0).unwrap();
        let r = sample_error_estimate(&m, &grid, 100, 1.0, 0, 0, &[0.2]).unwrap();
        assert!(r.rows.is_empty() && r.mean_s.is_none());
        let r = sample_error_estimate(&m, &grid, 100, 1.0, 20, 0, &[0.2]).unwrap();
        assert!((r.rows[0].bound - (-8f64).exp()).abs() < 1e-18);
        assert!(r.mean_s.unwrap() > 0.0);
        assert!(r.rows[0].ok);
        assert!(sample_error_estimate(&m, &[], 100, 1.0, 5, 0, &[0.2]).is_err());
        assert!(sample_error_estimate(&m, &grid, 100, 0.0, 5, 0, &[0.2]).is_err());
    }
}
