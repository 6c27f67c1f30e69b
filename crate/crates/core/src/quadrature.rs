//! Numerical integration used by the oracles.
//!
//! Two families of rules live here:
//!
//! * [`GaussLegendre`] fixed rules and composite panels over a list of
//!   breakpoints. These have fixed node sets, so results never depend on
//!   scheduling.
//! * [`adaptive`], a globally adaptive Gauss–Kronrod (7/15) integrator that
//!   bisects the worst interval until the requested tolerance is met or the
//!   evaluation budget is spent. Known discontinuities should be passed as
//!   breakpoints; the integrator does not hunt for them efficiently.
//!
//! Infinite ranges are mapped onto `(0, 1]` with `x = (1 - t) / t`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Default evaluation budget for adaptive integration.
pub const MAX_EVALUATIONS: usize = 1_000_000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Outcome of an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub abs_error: f64,
    pub evaluations: usize,
    /// Whether the requested tolerance was met.
    pub converged: bool,
    requested: f64,
}

impl QuadResult {
    /// Turn a non-converged result into an error carrying the achieved accuracy.
    pub fn require(self) -> Result<QuadResult> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Quadrature {
                requested: self.requested,
                achieved: self.abs_error,
                evaluations: self.evaluations,
            })
        }
    }

    fn exact(value: f64) -> Self {
        QuadResult {
            value,
            abs_error: 0.0,
            evaluations: 0,
            converged: true,
            requested: 0.0,
        }
    }
}

/// Absolute/relative tolerance pair; the effective target is the larger of the two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_evaluations: usize,
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Tolerance {
            abs,
            rel: 0.0,
            max_evaluations: MAX_EVALUATIONS,
        }
    }

    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }

    pub fn with_budget(mut self, max_evaluations: usize) -> Self {
        self.max_evaluations = max_evaluations;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    seq: usize,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// `breakpoints` outside `(a, b)` are ignored. The returned result is never an
/// `Err`; check [`QuadResult::converged`] or call [`QuadResult::require`].
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> QuadResult {
    if a == b {
        return QuadResult::exact(0.0);
    }
    if a > b {
        let mut r = adaptive(f, b, a, breakpoints, tol);
        r.value = -r.value;
        return r;
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c.is_finite() && c > a && c < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    let mut finished: Vec<Segment> = Vec::new();
    let mut evaluations = 0usize;
    let mut seq = 0usize;
    for w in edges.windows(2) {
        let (value, error) = kronrod15(&mut f, w[0], w[1]);
        evaluations += 15;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
            seq,
        });
        seq += 1;
    }

    let totals = |heap: &BinaryHeap<Segment>, finished: &[Segment]| {
        let mut v = 0.0;
        let mut e = 0.0;
        for s in heap.iter().chain(finished.iter()) {
            v += s.value;
            e += s.error;
        }
        (v, e)
    };

    let (mut value, mut error) = totals(&heap, &finished);
    while error > tol.target(value) && evaluations + 30 <= tol.max_evaluations {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-15 * worst.a.abs().max(1.0)
        {
            finished.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            seq,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            seq: seq + 1,
        });
        seq += 2;
        // The running sums drift; refresh them now and then.
        if seq.is_multiple_of(512) {
            (value, error) = totals(&heap, &finished);
        }
    }
    let mut segments: Vec<Segment> = heap.into_vec();
    segments.extend(finished);
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = segments.iter().map(|s| s.value).sum();
    let error: f64 = segments.iter().map(|s| s.error).sum();
    let target = tol.target(value);
    QuadResult {
        value,
        abs_error: error,
        evaluations,
        converged: error <= target,
        requested: target,
    }
}

/// Integrate `f` over the whole real line.
pub fn adaptive_real_line<F: FnMut(f64) -> f64>(mut f: F, tol: Tolerance) -> QuadResult {
    adaptive(
        move |t: f64| {
            let x = (1.0 - t) / t;
            let w = 1.0 / (t * t);
            (f(x) + f(-x)) * w
        },
        0.0,
        1.0,
        &[],
        tol,
    )
}

/// Integrate `f` over `[a, +inf)`.
pub fn adaptive_half_line<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> QuadResult {
    adaptive(
        move |t: f64| f(a + (1.0 - t) / t) / (t * t),
        0.0,
        1.0,
        &[],
        tol,
    )
}

/// Integrate over the real line with extra resolution around `breakpoints`.
///
/// The finite hull of the breakpoints is integrated adaptively and the two
/// tails through [`adaptive_half_line`]. Half of the tolerance goes to the core.
pub fn adaptive_line_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    tol: Tolerance,
) -> QuadResult {
    let lo = breakpoints.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = breakpoints.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() && hi.is_finite() && hi > lo {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (-1.0, 1.0)
    };
    let part = Tolerance {
        abs: 0.25 * tol.abs,
        ..tol
    };
    let core = adaptive(&mut f, lo, hi, breakpoints, Tolerance { abs: 0.5 * tol.abs, ..tol });
    let right = adaptive_half_line(&mut f, hi, part);
    let left = adaptive_half_line(|y: f64| f(-y), -lo, part);
    combine(&[core, right, left])
}

fn combine(parts: &[QuadResult]) -> QuadResult {
    let mut out = QuadResult::exact(0.0);
    for p in parts {
        out.value += p.value;
        out.abs_error += p.abs_error;
        out.evaluations += p.evaluations;
        out.converged &= p.converged;
        out.requested += p.requested;
    }
    out
}

/// Which oscillating factor multiplies the integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oscillator {
    Cos,
    Sin,
}

/// `∫_a^∞ g(x) w(ω x) dx` with `w` = cos or sin.
///
/// `g` must be monotone and tend to zero beyond `monotone_from`. The integral
/// past that point is split at the zeros of `w` into an alternating series,
/// whose partial sums are accelerated by repeated averaging. Works for tails as
/// slow as `|x|^-2`, where truncation would need astronomically long ranges.
pub fn oscillatory_half_line<F: FnMut(f64) -> f64>(
    mut g: F,
    a: f64,
    omega: f64,
    kind: Oscillator,
    monotone_from: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> QuadResult {
    let sign = if kind == Oscillator::Sin && omega < 0.0 { -1.0 } else { 1.0 };
    let w = omega.abs();
    if w == 0.0 {
        return match kind {
            Oscillator::Cos => adaptive_half_line(g, a, tol),
            Oscillator::Sin => QuadResult::exact(0.0),
        };
    }
    let osc = move |x: f64| match kind {
        Oscillator::Cos => (w * x).cos(),
        Oscillator::Sin => (w * x).sin(),
    };
    let half_period = std::f64::consts::PI / w;
    let offset = match kind {
        Oscillator::Cos => 0.5,
        Oscillator::Sin => 0.0,
    };
    let start = a.max(monotone_from);
    let first = ((start / half_period - offset).floor() + 1.0).max(0.0);
    let zero = |k: f64| (k + offset) * half_period;
    let z0 = zero(first);

    let piece_tol = Tolerance {
        abs: tol.abs / 200.0,
        rel: 0.0,
        ..tol
    };
    let head = adaptive(|x| g(x) * osc(x), a, z0, breakpoints, piece_tol);
    let mut parts = vec![head];

    const TERMS: usize = 48;
    let mut partial = Vec::with_capacity(TERMS);
    let mut running = 0.0;
    for k in 0..TERMS {
        let lo = zero(first + k as f64);
        let hi = zero(first + k as f64 + 1.0);
        let r = adaptive(|x| g(x) * osc(x), lo, hi, &[], piece_tol);
        running += r.value;
        partial.push(running);
        parts.push(QuadResult { value: 0.0, ..r });
    }
    // repeated averaging of neighbouring partial sums
    let mut level = partial;
    let mut estimate = *level.last().unwrap_or(&0.0);
    let mut change = f64::INFINITY;
    while level.len() > 1 {
        let next: Vec<f64> = level.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let e = *next.last().unwrap();
        change = (e - estimate).abs();
        estimate = e;
        level = next;
        if change < 0.01 * tol.abs {
            break;
        }
    }
    let mut out = combine(&parts);
    out.value = sign * (parts[0].value + estimate);
    out.abs_error += change;
    out.requested = tol.target(out.value);
    out.converged = out.abs_error <= out.requested;
    out
}

/// Fixed `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared 16-, 32- and 64-point rules.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static GL16: OnceLock<GaussLegendre> = OnceLock::new();
        static GL32: OnceLock<GaussLegendre> = OnceLock::new();
        static GL64: OnceLock<GaussLegendre> = OnceLock::new();
        match n {
            16 => GL16.get_or_init(|| GaussLegendre::new(16)),
            32 => GL32.get_or_init(|| GaussLegendre::new(32)),
            64 => GL64.get_or_init(|| GaussLegendre::new(64)),
            _ => panic!("no cached Gauss-Legendre rule with {n} nodes"),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + r * x, r * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, d)
}

/// Panel edges covering `[a, b]`: every breakpoint inside the range is an
/// edge, and no panel is wider than `max_width`.
pub fn panel_edges(a: f64, b: f64, breakpoints: &[f64], max_width: f64) -> Vec<f64> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c > a && c < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut coarse = vec![a];
    coarse.extend(cuts);
    coarse.push(b);
    let mut edges = vec![a];
    for w in coarse.windows(2) {
        let len = w[1] - w[0];
        let pieces = if max_width.is_finite() && max_width > 0.0 {
            ((len / max_width).ceil() as usize).max(1)
        } else {
            1
        };
        for k in 1..=pieces {
            let e = if k == pieces {
                w[1]
            } else {
                w[0] + len * k as f64 / pieces as f64
            };
            edges.push(e);
        }
    }
    edges
}

/// Composite Gauss–Legendre nodes and weights over the panels in `edges`.
pub fn composite_nodes(edges: &[f64], rule: &GaussLegendre) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity((edges.len().saturating_sub(1)) * rule.len());
    let mut ws = Vec::with_capacity(xs.capacity());
    for w in edges.windows(2) {
        for (x, wt) in rule.mapped(w[0], w[1]) {
            xs.push(x);
            ws.push(wt);
        }
    }
    (xs, ws)
}
