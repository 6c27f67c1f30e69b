//! Ground-truth functionals of the error law.
//!
//! Everything here is a deterministic function of `(model, hypothesis,
//! parameters)`: the true error density `p_E`, the quadratic functional
//! `V(f) = -∫ p_E²`, the entropy `R = -log(-V)`, and the smoothed information
//! error `E_h(f)`. Each quantity has a quadrature route and, where the model
//! allows it, an exact closed form used as a cross-check and as a fast path in
//! experiments.

mod counterexample;
mod density;
mod theory;

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;
use statrs::function::erf::erfc;

pub use counterexample::{
    cx_decompose, cx_fourier_identity_check, cx_minimizer_distance, CounterexampleDecomposition,
    CX_OPTIMAL_V,
};
pub use density::{error_density, ErrorDensity};
use density::LawPart;
pub use theory::{
    p1_convergence_constant, p1_convergence_constant_with, p2_curvature, p2_curvature_lower_bound,
    p2_slope, p2_threshold,
};

use crate::error::{check_bandwidth, Error, Result};
use crate::hypothesis::Hypothesis;
use crate::model::RegressionModel;
use crate::noise::{geometric_breaks, Input, NoiseFamily};
use crate::quadrature::{
    adaptive, adaptive_half_line, adaptive_line_with_breaks, composite_nodes, oscillatory_half_line,
    panel_edges, GaussLegendre, Oscillator, QuadResult, Tolerance,
};

/// How an [`EntropyReport`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    Plancherel,
    ClosedForm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Plancherel => "plancherel",
            Method::ClosedForm => "closed-form",
        }
    }
}

/// `V(f)` together with `R(f) = -log(-V(f))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyReport {
    pub v: f64,
    pub r: f64,
    pub method: Method,
    pub est_abs_error: f64,
}

impl EntropyReport {
    fn new(v: f64, method: Method, est_abs_error: f64) -> Self {
        EntropyReport {
            v,
            r: -(-v).ln(),
            method,
            est_abs_error,
        }
    }
}

fn line_tolerance(noise: &NoiseFamily) -> Tolerance {
    if noise.heavy_tailed() {
        Tolerance::abs(1e-6)
    } else {
        Tolerance::abs(1e-9)
    }
}

/// Integrate `g` over the support of `p_E` (or the real line), resolving
/// every breakpoint of `p_E`.
fn integrate_over_errors<F: FnMut(f64) -> f64>(
    pe: &ErrorDensity<'_>,
    noise: &NoiseFamily,
    g: F,
    tol: Tolerance,
) -> Result<QuadResult> {
    let mut breaks = pe.breakpoints();
    let r = match pe.support() {
        Some((lo, hi)) => return adaptive(g, lo, hi, &breaks, tol).require(),
        None => noise.tail_radius(1e-6),
    };
    let centre = breaks.iter().sum::<f64>() / breaks.len().max(1) as f64;
    breaks.extend(geometric_breaks(r).into_iter().map(|b| b + centre));
    adaptive_line_with_breaks(g, &breaks, tol).require()
}

/// `V(f) = -∫ p_E(e)² de` by adaptive quadrature on the breakpoints of `p_E`.
///
/// The absolute tolerance is `1e-9`, relaxed to `1e-6` for heavy-tailed noise.
pub fn v_functional(model: &RegressionModel, f: &Hypothesis) -> Result<EntropyReport> {
    model.validate()?;
    let pe = ErrorDensity::new(model, f);
    let q = integrate_over_errors(
        &pe,
        &model.noise,
        |e| {
            let p = pe.eval(e);
            p * p
        },
        line_tolerance(&model.noise),
    )?;
    Ok(EntropyReport::new(-q.value, Method::Quadrature, q.abs_error))
}

/// `V(f)` in closed form when `f - f*` is piecewise constant and the noise
/// has a closed-form autocorrelation.
pub fn v_closed_form(model: &RegressionModel, f: &Hypothesis) -> Option<EntropyReport> {
    let atoms = ErrorDensity::new(model, f).atoms()?;
    let mut sum = 0.0;
    for &(x, c, w) in &atoms {
        for &(u, c2, w2) in &atoms {
            sum += w * w2 * model.noise.cross_correlation(x, u, c - c2)?;
        }
    }
    Some(EntropyReport::new(-sum, Method::ClosedForm, 0.0))
}

/// Closed form where available, quadrature otherwise.
pub fn entropy(model: &RegressionModel, f: &Hypothesis) -> Result<EntropyReport> {
    match v_closed_form(model, f) {
        Some(r) => Ok(r),
        None => v_functional(model, f),
    }
}

/// `K(s) = (1/π) ∫_0^∞ |p̂(ξ)|² cos(sξ) dξ`, the autocorrelation of the
/// noise density recovered from its characteristic function.
struct FourierAutocorrelation<'a> {
    noise: &'a NoiseFamily,
    trig: Option<Vec<(f64, f64)>>,
    memo: HashMap<u64, f64>,
    error: f64,
}

// `|p̂|²` of the trigonometric families is integrated numerically up to here,
// the remaining tail exactly.
const TRIG_CUT: f64 = 40.0;

impl<'a> FourierAutocorrelation<'a> {
    fn new(noise: &'a NoiseFamily) -> Self {
        FourierAutocorrelation {
            noise,
            trig: noise.char_sq_trig(),
            memo: HashMap::new(),
            error: 0.0,
        }
    }

    fn at(&mut self, s: f64) -> Result<f64> {
        let s = s.abs();
        if let Some(&v) = self.memo.get(&s.to_bits()) {
            return Ok(v);
        }
        let noise = self.noise;
        let tol = Tolerance::abs(1e-12);
        let (value, err) = match &self.trig {
            Some(terms) => {
                let breaks: Vec<f64> = (1..TRIG_CUT as usize).map(|k| k as f64).collect();
                let head = adaptive(|xi| noise.char_sq(xi) * (s * xi).cos(), 0.0, TRIG_CUT, &breaks, tol).require()?;
                let tail: f64 = terms
                    .iter()
                    .map(|&(c, w)| {
                        0.5 * c
                            * (crate::special::cos_over_square_tail(w + s, TRIG_CUT)
                                + crate::special::cos_over_square_tail(w - s, TRIG_CUT))
                    })
                    .sum();
                (head.value + tail, head.abs_error)
            }
            None => {
                // |p̂|² is decreasing on ξ > 0 for every registered family
                let scale = 1.0 / noise.tail_radius(0.5).max(1e-12);
                let breaks: Vec<f64> = (-4..12).map(|k| scale * 2f64.powi(k)).collect();
                let q = if s == 0.0 {
                    adaptive_half_line(|xi| noise.char_sq(xi), 0.0, tol)
                } else {
                    oscillatory_half_line(|xi| noise.char_sq(xi), 0.0, s, Oscillator::Cos, 0.0, &breaks, tol)
                }
                .require()?;
                (q.value, q.abs_error)
            }
        };
        let k = value / PI;
        self.error = self.error.max(err / PI);
        self.memo.insert(s.to_bits(), k);
        Ok(k)
    }
}

/// `V(f)` for homoskedastic noise through the Fourier route
/// `-(1/2π) ∫∫∫ |p̂(ξ)|² cos(ξ(d(x) - d(u))) dξ dρ(x) dρ(u)` with `d = f - f*`.
pub fn v_plancherel_homoskedastic(model: &RegressionModel, f: &Hypothesis) -> Result<EntropyReport> {
    model.validate()?;
    if !model.is_homoskedastic() {
        return Err(Error::InvalidModel(format!(
            "the Fourier route needs homoskedastic noise; `{}` is not",
            model.noise.id()
        )));
    }
    let law = ErrorDensity::new(model, f).d_law();
    let mut k = FourierAutocorrelation::new(&model.noise);
    // K is smooth between differences of noise breakpoints
    let bps = model.noise.breakpoints(0.0);
    let mut kinks = vec![0.0];
    for a in &bps {
        for b in &bps {
            kinks.push(a - b);
        }
    }
    let rule = GaussLegendre::cached(64);
    let mut sum = 0.0;
    for (i, a) in law.iter().enumerate() {
        for (j, b) in law.iter().enumerate().take(i + 1) {
            // K is even, so the (i, j) and (j, i) terms agree
            let mult = if i == j { 1.0 } else { 2.0 };
            let term = match (*a, *b) {
                (LawPart::Atom { at: x, mass: wa }, LawPart::Atom { at: y, mass: wb }) => wa * wb * k.at(x - y)?,
                _ => {
                    let (lo1, hi1, wa) = a.hull();
                    let (lo2, hi2, wb) = b.hull();
                    let mut corners = vec![lo1 - hi2, lo1 - lo2, hi1 - hi2, hi1 - lo2];
                    corners.sort_by(f64::total_cmp);
                    let (s_lo, s_hi) = (corners[0], corners[3]);
                    corners.extend(kinks.iter().copied());
                    let edges = panel_edges(s_lo, s_hi, &corners, 0.25);
                    let mut acc = 0.0;
                    let (ss, ws) = composite_nodes(&edges, rule);
                    for (s, w) in ss.into_iter().zip(ws) {
                        acc += w * k.at(s)? * difference_density(a, b, s);
                    }
                    wa * wb * acc
                }
            };
            sum += mult * term;
        }
    }
    Ok(EntropyReport::new(-sum, Method::Plancherel, k.error))
}

impl LawPart {
    /// `(lo, hi, mass)`, with `lo == hi` for atoms.
    fn hull(&self) -> (f64, f64, f64) {
        match *self {
            LawPart::Atom { at, mass } => (at, at, mass),
            LawPart::Uniform { lo, hi, mass } => (lo, hi, mass),
        }
    }
}

/// Density at `s` of `A - B` for independent normalized parts, at least one
/// of them uniform.
fn difference_density(a: &LawPart, b: &LawPart, s: f64) -> f64 {
    let (l1, r1, _) = a.hull();
    let (l2, r2, _) = b.hull();
    match (a, b) {
        (LawPart::Uniform { .. }, LawPart::Uniform { .. }) => {
            let overlap = (r1.min(r2 + s) - l1.max(l2 + s)).max(0.0);
            overlap / ((r1 - l1) * (r2 - l2))
        }
        (LawPart::Uniform { .. }, _) => {
            if s >= l1 - l2 && s <= r1 - l2 {
                1.0 / (r1 - l1)
            } else {
                0.0
            }
        }
        _ => {
            if s >= l1 - r2 && s <= l1 - l2 {
                1.0 / (r2 - l2)
            } else {
                0.0
            }
        }
    }
}

/// `∫∫ G_h(a - b - s) p(a | x) p(b | u) da db` in closed form, where available.
fn smoothed_cross(noise: &NoiseFamily, x: Input, u: Input, s: f64, h: f64) -> Option<f64> {
    if let NoiseFamily::Gaussian { sigma } = *noise {
        let v = 2.0 * sigma * sigma + h * h;
        return Some((-s * s / (2.0 * v)).exp() / (2.0 * PI * v).sqrt());
    }
    let px = noise.uniform_pieces(x)?;
    let pu = noise.uniform_pieces(u)?;
    // second antiderivative of G_h
    let f2 = |z: f64| {
        let t = z / h;
        let cdf = 0.5 * erfc(-t / SQRT_2);
        let pdf = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        h * (t * cdf + pdf)
    };
    let mut total = 0.0;
    for &(a1, b1, c1) in &px {
        for &(a2, b2, c2) in &pu {
            total += c1 * c2 * (f2(b1 - a2 - s) - f2(a1 - a2 - s) - f2(b1 - b2 - s) + f2(a1 - b2 - s));
        }
    }
    Some(total)
}

fn info_error_closed_form(model: &RegressionModel, f: &Hypothesis, h: f64) -> Option<f64> {
    let atoms = ErrorDensity::new(model, f).atoms()?;
    let mut sum = 0.0;
    for &(x, c, w) in &atoms {
        for &(u, c2, w2) in &atoms {
            sum += w * w2 * smoothed_cross(&model.noise, x, u, c - c2, h)?;
        }
    }
    Some(-sum)
}

/// `E_h(f)` through `-∫ p_E(e) (G_h * p_E)(e) de`, ignoring closed forms.
pub fn info_error_quadrature(model: &RegressionModel, f: &Hypothesis, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    model.validate()?;
    let pe = ErrorDensity::new(model, f);
    let breaks = pe.breakpoints();
    let rule = GaussLegendre::cached(16);
    let reach = 9.0 * h;
    let smoothed = |e: f64| {
        let kinks: Vec<f64> = breaks.iter().map(|b| e - b).collect();
        let edges = panel_edges(-reach, reach, &kinks, 0.5 * h);
        let (ts, ws) = composite_nodes(&edges, rule);
        let c = 1.0 / ((2.0 * PI).sqrt() * h);
        ts.iter()
            .zip(&ws)
            .map(|(&t, &w)| w * c * (-0.5 * (t / h) * (t / h)).exp() * pe.eval(e - t))
            .sum::<f64>()
    };
    let tol = if model.noise.heavy_tailed() {
        Tolerance::abs(1e-7)
    } else {
        Tolerance::abs(1e-10)
    };
    let q = integrate_over_errors(
        &pe,
        &model.noise,
        |e| {
            let p = pe.eval(e);
            if p == 0.0 {
                0.0
            } else {
                p * smoothed(e)
            }
        },
        tol,
    )?;
    Ok(-q.value)
}

/// The information error `E_h(f) = -∫∫ G_h(e - e') p_E(e) p_E(e') de de'`.
///
/// Uses the closed form for piecewise-constant `f - f*` under Gaussian or
/// piecewise-uniform noise and the single-convolution quadrature otherwise.
pub fn info_error_true(model: &RegressionModel, f: &Hypothesis, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    model.validate()?;
    match info_error_closed_form(model, f, h) {
        Some(v) => Ok(v),
        None => info_error_quadrature(model, f, h),
    }
}

/// Outcome of [`approx_error_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxErrorCheck {
    pub a_h_est: f64,
    /// `M' h` when the noise density has a bounded derivative.
    pub bound: Option<f64>,
}

/// Largest `|E_h(f) - V(f)|` over `f_set`, checked against `M' h`.
pub fn approx_error_bound_check(model: &RegressionModel, f_set: &[Hypothesis], h: f64) -> Result<ApproxErrorCheck> {
    check_bandwidth(h)?;
    let mut a_h = 0.0f64;
    for f in f_set {
        let v = entropy(model, f)?.v;
        let e = info_error_true(model, f, h)?;
        a_h = a_h.max((e - v).abs());
    }
    let bound = model.noise.deriv_bound().map(|m| m * h);
    if let Some(b) = bound {
        if a_h > b {
            return Err(Error::Tolerance(format!("A_h estimate {a_h:e} exceeds M'h = {b:e}")));
        }
    }
    Ok(ApproxErrorCheck { a_h_est: a_h, bound })
}

/// Extremes of `∫ p_E²` over a grid of hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub b_l: f64,
    pub b_u: f64,
}

pub fn bl_bu_bracket(model: &RegressionModel, f_grid: &[Hypothesis]) -> Result<Bracket> {
    if f_grid.is_empty() {
        return Err(Error::InvalidInput("empty hypothesis grid".into()));
    }
    let mut b_l = f64::INFINITY;
    let mut b_u = f64::NEG_INFINITY;
    for f in f_grid {
        let q = -entropy(model, f)?.v;
        b_l = b_l.min(q);
        b_u = b_u.max(q);
    }
    let m_p = model.noise.density_bound();
    if !(b_l > 0.0) || b_u > m_p * (1.0 + 1e-12) {
        return Err(Error::Tolerance(format!("bracket [{b_l}, {b_u}] escapes (0, {m_p}]")));
    }
    Ok(Bracket { b_l, b_u })
}

/// `‖f - f* - E(f - f*)‖²` in `L²(ρ)`.
pub fn l2_centered_error(model: &RegressionModel, f: &Hypothesis) -> f64 {
    let nodes = ErrorDensity::new(model, f).rho_nodes();
    let mean: f64 = nodes.iter().map(|&(_, w, d)| w * d).sum();
    nodes.iter().map(|&(_, w, d)| w * (d - mean) * (d - mean)).sum()
}

/// Both sides of `∫∫ (d(x) - d(u))² dρ dρ = 2 ‖d - E d‖²`, the left by a
/// tensor-product rule.
pub fn variance_identity(model: &RegressionModel, f: &Hypothesis) -> (f64, f64) {
    let nodes = ErrorDensity::new(model, f).rho_nodes();
    let mut lhs = 0.0;
    for &(_, wi, di) in &nodes {
        for &(_, wj, dj) in &nodes {
            lhs += wi * wj * (di - dj) * (di - dj);
        }
    }
    (lhs, 2.0 * l2_centered_error(model, f))
}
