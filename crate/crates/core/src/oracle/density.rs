//! The error density `p_E(e) = ∫ p(e + f(x) - f*(x) | x) dρ(x)`.
//!
//! The marginal is cut into segments on which `d = f - f*` is smooth and the
//! noise law does not switch branch. On each segment `d` is classified as
//! constant, affine, or general, and the inner integral is done exactly
//! (mixture term or CDF difference) whenever possible.

use crate::error::Result;
use crate::hypothesis::Hypothesis;
use crate::model::RegressionModel;
use crate::noise::{Input, NoiseFamily, TWO_INTERVAL_SPLIT};
use crate::quadrature::{adaptive, GaussLegendre, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// `d(x) = c0 + c1 x`.
    Affine { c0: f64, c1: f64 },
    General,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub lo: f64,
    pub hi: f64,
    /// Density of `ρ` on the segment.
    pub weight: f64,
    shape: Shape,
}

impl Segment {
    pub fn mid(&self) -> Input {
        0.5 * (self.lo + self.hi)
    }

    pub fn mass(&self) -> f64 {
        self.weight * (self.hi - self.lo)
    }

    /// The value of `d` when it is constant on the segment.
    pub fn constant(&self) -> Option<f64> {
        match self.shape {
            Shape::Affine { c0, c1 } if c1 == 0.0 => Some(c0),
            _ => None,
        }
    }
}

/// One component of the law of `d(X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LawPart {
    Atom { at: f64, mass: f64 },
    Uniform { lo: f64, hi: f64, mass: f64 },
}

/// `p_E` for one `(model, f)` pair.
pub struct ErrorDensity<'a> {
    noise: &'a NoiseFamily,
    f: &'a Hypothesis,
    f_star: &'a Hypothesis,
    pub(crate) segments: Vec<Segment>,
}

// below this spread in `d` an affine segment is treated as constant
const FLAT: f64 = 1e-10;

impl<'a> ErrorDensity<'a> {
    pub fn new(model: &'a RegressionModel, f: &'a Hypothesis) -> Self {
        let f_star = &model.f_star;
        let mut segments = Vec::new();
        for piece in model.marginal.pieces() {
            let mut cuts: Vec<f64> = f.breakpoints();
            cuts.extend(f_star.breakpoints());
            if !model.noise.is_homoskedastic() {
                cuts.push(TWO_INTERVAL_SPLIT);
            }
            let mut edges = vec![piece.lo];
            let mut inner: Vec<f64> = cuts.into_iter().filter(|&c| c > piece.lo && c < piece.hi).collect();
            inner.sort_by(f64::total_cmp);
            inner.dedup();
            edges.extend(inner);
            edges.push(piece.hi);
            for w in edges.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let shape = match (f.affine_on(lo, hi), f_star.affine_on(lo, hi)) {
                    (Some((a0, a1)), Some((b0, b1))) => {
                        let (c0, c1) = (a0 - b0, a1 - b1);
                        if (c1 * (hi - lo)).abs() < FLAT {
                            let mid = 0.5 * (lo + hi);
                            Shape::Affine { c0: c0 + c1 * mid, c1: 0.0 }
                        } else {
                            Shape::Affine { c0, c1 }
                        }
                    }
                    _ => Shape::General,
                };
                segments.push(Segment {
                    lo,
                    hi,
                    weight: piece.density(),
                    shape,
                });
            }
        }
        ErrorDensity {
            noise: &model.noise,
            f,
            f_star,
            segments,
        }
    }

    pub fn d(&self, x: Input) -> f64 {
        self.f.eval(x) - self.f_star.eval(x)
    }

    /// Whether `d` is constant on every segment.
    pub fn is_piecewise_constant(&self) -> bool {
        self.segments.iter().all(|s| s.constant().is_some())
    }

    /// `(input, d, mass)` atoms when `d` is piecewise constant.
    pub(crate) fn atoms(&self) -> Option<Vec<(Input, f64, f64)>> {
        self.segments
            .iter()
            .map(|s| s.constant().map(|c| (s.mid(), c, s.mass())))
            .collect()
    }

    pub fn eval(&self, e: f64) -> f64 {
        let noise = self.noise;
        let mut total = 0.0;
        for s in &self.segments {
            let x = s.mid();
            let part = match s.shape {
                Shape::Affine { c0, c1 } if c1 == 0.0 => noise.density(e + c0, x) * (s.hi - s.lo),
                Shape::Affine { c0, c1 } if noise.has_closed_cdf() => {
                    (noise.cdf(e + c0 + c1 * s.hi, x) - noise.cdf(e + c0 + c1 * s.lo, x)) / c1
                }
                _ => {
                    adaptive(
                        |t| noise.density(e + self.d(t), x),
                        s.lo,
                        s.hi,
                        &[],
                        Tolerance::abs(1e-13).with_budget(20_000),
                    )
                    .value
                }
            };
            total += s.weight * part;
        }
        total.max(0.0)
    }

    /// Range of `d` over a segment; sampled for general shapes.
    fn d_range(&self, s: &Segment) -> (f64, f64) {
        match s.shape {
            Shape::Affine { c0, c1 } => {
                let (a, b) = (c0 + c1 * s.lo, c0 + c1 * s.hi);
                (a.min(b), a.max(b))
            }
            Shape::General => {
                let rule = GaussLegendre::cached(64);
                let vals = rule
                    .mapped(s.lo, s.hi)
                    .map(|(x, _)| x)
                    .chain([s.lo, s.hi])
                    .map(|x| self.d(x));
                vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            }
        }
    }

    /// Points on the `e` axis where `p_E` may fail to be smooth, plus the
    /// shifted modes.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in &self.segments {
            let (dl, dh) = self.d_range(s);
            let mut shifts = vec![dl];
            if dh > dl {
                shifts.push(dh);
            }
            let mut bps = self.noise.breakpoints(s.mid());
            bps.push(0.0);
            for b in bps {
                for &d in &shifts {
                    out.push(b - d);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Hull of the support of `p_E`, if bounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.segments {
            let (a, b) = self.noise.support(s.mid())?;
            let (dl, dh) = match s.shape {
                Shape::General => {
                    // sampled range may miss extremes; pad with the sup bounds
                    let r = self.f.space.sup_bound(&self.f.theta) + self.f_star.space.sup_bound(&self.f_star.theta);
                    (-r, r)
                }
                _ => self.d_range(s),
            };
            lo = lo.min(a - dh);
            hi = hi.max(b - dl);
        }
        Some((lo, hi))
    }

    /// Law of `d(X)` as atoms and uniform pieces. Affine segments push `ρ`
    /// forward to a uniform law; general segments are discretized with
    /// 64-point Gauss rules.
    pub(crate) fn d_law(&self) -> Vec<LawPart> {
        let rule = GaussLegendre::cached(64);
        let mut out = Vec::new();
        for s in &self.segments {
            match s.shape {
                Shape::Affine { c0, c1 } if c1 == 0.0 => out.push(LawPart::Atom { at: c0, mass: s.mass() }),
                Shape::Affine { .. } => {
                    let (lo, hi) = self.d_range(s);
                    out.push(LawPart::Uniform { lo, hi, mass: s.mass() });
                }
                Shape::General => {
                    for (x, w) in rule.mapped(s.lo, s.hi) {
                        out.push(LawPart::Atom { at: self.d(x), mass: w * s.weight });
                    }
                }
            }
        }
        out
    }

    /// Composite Gauss nodes over `ρ` as `(x, weight, d(x))`; exact for
    /// polynomial `d` of degree up to 127 per segment.
    pub fn rho_nodes(&self) -> Vec<(Input, f64, f64)> {
        let rule = GaussLegendre::cached(64);
        let mut out = Vec::new();
        for s in &self.segments {
            if let Some(c) = s.constant() {
                out.push((s.mid(), s.mass(), c));
                continue;
            }
            for (x, w) in rule.mapped(s.lo, s.hi) {
                out.push((x, w * s.weight, self.d(x)));
            }
        }
        out
    }
}

/// `p_E(e)` for `f` under `model`.
pub fn error_density(model: &RegressionModel, f: &Hypothesis, e: f64) -> Result<f64> {
    model.validate()?;
    Ok(ErrorDensity::new(model, f).eval(e))
}
