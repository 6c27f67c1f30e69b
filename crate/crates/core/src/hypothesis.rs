//! Bounded parametric hypotheses `f_θ(x) = Σ θ_k φ_k(x)`.
//!
//! Both supported spaces are linear in `θ`: a piecewise-constant space has one
//! indicator feature per piece, a basis space uses fixed functions with
//! `sup |φ_k| ≤ 1`. The bound `|f_θ| ≤ M` is maintained by [`SpaceKind::project`].
//!
//! ```
//! use mee::hypothesis::{Hypothesis, SpaceKind};
//!
//! let space: SpaceKind = "piecewise_constant(0.75)".parse().unwrap();
//! let f = Hypothesis::new(space, vec![0.0, -1.0], 1.0).unwrap();
//! assert_eq!(f.eval(0.25), 0.0);
//! assert_eq!(f.eval(1.25), -1.0);
//! ```

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::Input;

/// A fixed basis function with values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisFn {
    Constant,
    /// Rises linearly from -1 at `lo` to 1 at `hi`, clamped outside.
    Linear { lo: f64, hi: f64 },
    /// -1 left of `at`, 1 from `at` on.
    Step { at: f64 },
    Sin { freq: f64 },
    Cos { freq: f64 },
}

impl BasisFn {
    pub fn eval(&self, x: Input) -> f64 {
        match *self {
            BasisFn::Constant => 1.0,
            BasisFn::Linear { lo, hi } => (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0),
            BasisFn::Step { at } => {
                if x < at {
                    -1.0
                } else {
                    1.0
                }
            }
            BasisFn::Sin { freq } => (freq * x).sin(),
            BasisFn::Cos { freq } => (freq * x).cos(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            BasisFn::Linear { lo, hi } => vec![lo, hi],
            BasisFn::Step { at } => vec![at],
            _ => Vec::new(),
        }
    }

    /// `(intercept, slope)` on an interval free of breakpoints, if affine there.
    fn affine_on(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let mid = 0.5 * (a + b);
        match *self {
            BasisFn::Constant | BasisFn::Step { .. } => Some((self.eval(mid), 0.0)),
            BasisFn::Linear { lo, hi } => {
                if mid <= lo || mid >= hi {
                    Some((self.eval(mid), 0.0))
                } else {
                    let slope = 2.0 / (hi - lo);
                    Some((-1.0 - slope * lo, slope))
                }
            }
            BasisFn::Sin { .. } | BasisFn::Cos { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BasisFn::Constant => true,
            BasisFn::Linear { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            BasisFn::Step { at } => at.is_finite(),
            BasisFn::Sin { freq } | BasisFn::Cos { freq } => freq.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidHypothesis(format!("malformed basis function {self}")))
        }
    }
}

impl fmt::Display for BasisFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisFn::Constant => write!(f, "const"),
            BasisFn::Linear { lo, hi } => write!(f, "linear({lo},{hi})"),
            BasisFn::Step { at } => write!(f, "step({at})"),
            BasisFn::Sin { freq } => write!(f, "sin({freq})"),
            BasisFn::Cos { freq } => write!(f, "cos({freq})"),
        }
    }
}

/// The shape of a hypothesis space.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    /// One free value per piece of the partition given by increasing `cuts`.
    PiecewiseConstant { cuts: Vec<f64> },
    Basis { functions: Vec<BasisFn> },
}

impl SpaceKind {
    pub fn piecewise_constant(cuts: &[f64]) -> Self {
        SpaceKind::PiecewiseConstant {
            cuts: cuts.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpaceKind::PiecewiseConstant { cuts } => cuts.len() + 1,
            SpaceKind::Basis { functions } => functions.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceKind::PiecewiseConstant { cuts } => {
                if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidHypothesis(
                        "piecewise-constant cuts must be finite and increasing".into(),
                    ));
                }
                Ok(())
            }
            SpaceKind::Basis { functions } => {
                if functions.is_empty() {
                    return Err(Error::InvalidHypothesis("basis space needs at least one function".into()));
                }
                functions.iter().try_for_each(BasisFn::validate)
            }
        }
    }

    /// Index of the piece containing `x` (piecewise-constant spaces only).
    pub fn piece(&self, x: Input) -> Option<usize> {
        match self {
            SpaceKind::PiecewiseConstant { cuts } => Some(cuts.partition_point(|&c| c <= x)),
            SpaceKind::Basis { .. } => None,
        }
    }

    /// `φ_k(x)`.
    pub fn feature(&self, k: usize, x: Input) -> f64 {
        match self {
            SpaceKind::PiecewiseConstant { .. } => {
                if self.piece(x) == Some(k) {
                    1.0
                } else {
                    0.0
                }
            }
            SpaceKind::Basis { functions } => functions[k].eval(x),
        }
    }

    /// Whether `φ_k` is the constant function (its coefficient is an intercept
    /// and never moves residual differences).
    pub fn is_intercept(&self, k: usize) -> bool {
        match self {
            SpaceKind::PiecewiseConstant { cuts } => cuts.is_empty(),
            SpaceKind::Basis { functions } => functions[k] == BasisFn::Constant,
        }
    }

    pub fn eval(&self, theta: &[f64], x: Input) -> f64 {
        match self {
            SpaceKind::PiecewiseConstant { .. } => theta[self.piece(x).unwrap_or(0)],
            SpaceKind::Basis { functions } => functions
                .iter()
                .zip(theta)
                .map(|(phi, t)| t * phi.eval(x))
                .sum(),
        }
    }

    /// `Σ θ_k φ_k(x)` over the non-intercept features.
    pub fn eval_varying(&self, theta: &[f64], x: Input) -> f64 {
        match self {
            SpaceKind::PiecewiseConstant { cuts } if cuts.is_empty() => 0.0,
            SpaceKind::PiecewiseConstant { .. } => self.eval(theta, x),
            SpaceKind::Basis { functions } => functions
                .iter()
                .zip(theta)
                .filter(|(phi, _)| **phi != BasisFn::Constant)
                .map(|(phi, t)| t * phi.eval(x))
                .sum(),
        }
    }

    /// Upper bound on `sup |f_θ|` implied by the parameters.
    pub fn sup_bound(&self, theta: &[f64]) -> f64 {
        match self {
            SpaceKind::PiecewiseConstant { .. } => theta.iter().fold(0.0, |m, t| m.max(t.abs())),
            SpaceKind::Basis { .. } => theta.iter().map(|t| t.abs()).sum(),
        }
    }

    /// Map `θ` back into the parameter set with `sup |f_θ| ≤ bound`: clamping
    /// for piecewise constants, radial rescaling of the ℓ¹ norm for bases.
    pub fn project(&self, theta: &mut [f64], bound: f64) {
        match self {
            SpaceKind::PiecewiseConstant { .. } => {
                for t in theta.iter_mut() {
                    *t = t.clamp(-bound, bound);
                }
            }
            SpaceKind::Basis { .. } => {
                let s: f64 = theta.iter().map(|t| t.abs()).sum();
                if s > bound {
                    let scale = bound / s;
                    for t in theta.iter_mut() {
                        *t *= scale;
                    }
                }
            }
        }
    }

    /// Uniform draw from a box inside the feasible set.
    pub fn random_theta<R: Rng + ?Sized>(&self, bound: f64, rng: &mut R) -> Vec<f64> {
        let half = match self {
            SpaceKind::PiecewiseConstant { .. } => bound,
            SpaceKind::Basis { functions } => bound / functions.len() as f64,
        };
        (0..self.dim())
            .map(|_| half * (2.0 * rng.random::<f64>() - 1.0))
            .collect()
    }

    /// Points where some `f_θ` may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            SpaceKind::PiecewiseConstant { cuts } => cuts.clone(),
            SpaceKind::Basis { functions } => functions.iter().flat_map(BasisFn::breakpoints).collect(),
        }
    }

    /// `(intercept, slope)` of `f_θ` on `[a, b]`, when `[a, b]` holds no
    /// breakpoint in its interior and every feature is affine there.
    pub fn affine_on(&self, theta: &[f64], a: f64, b: f64) -> Option<(f64, f64)> {
        match self {
            SpaceKind::PiecewiseConstant { .. } => Some((self.eval(theta, 0.5 * (a + b)), 0.0)),
            SpaceKind::Basis { functions } => {
                let mut c0 = 0.0;
                let mut c1 = 0.0;
                for (phi, t) in functions.iter().zip(theta) {
                    let (i, s) = phi.affine_on(a, b)?;
                    c0 += t * i;
                    c1 += t * s;
                }
                Some((c0, c1))
            }
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceKind::PiecewiseConstant { cuts } => {
                write!(f, "piecewise_constant(")?;
                for (i, c) in cuts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            SpaceKind::Basis { functions } => {
                write!(f, "basis(")?;
                for (i, phi) in functions.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{phi}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Split `name(args)` into the name and the top-level comma-separated args.
pub(crate) fn split_call(text: &str) -> Option<(&str, Vec<&str>)> {
    let text = text.trim();
    let open = text.find('(')?;
    if !text.ends_with(')') {
        return None;
    }
    let name = text[..open].trim();
    let inner = &text[open + 1..text.len() - 1];
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return None;
        }
    }
    if depth != 0 {
        return None;
    }
    let last = inner[start..].trim();
    if !last.is_empty() || !args.is_empty() {
        args.push(last);
    }
    Some((name, args))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidHypothesis(format!("expected a number, got `{s}`")))
}

impl FromStr for BasisFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "const" || s == "constant" {
            return Ok(BasisFn::Constant);
        }
        let (name, args) =
            split_call(s).ok_or_else(|| Error::InvalidHypothesis(format!("unknown basis function `{s}`")))?;
        let nums: Vec<f64> = args.iter().map(|a| parse_f64(a)).collect::<Result<_>>()?;
        let phi = match (name, nums.as_slice()) {
            ("linear", [lo, hi]) => BasisFn::Linear { lo: *lo, hi: *hi },
            ("step", [at]) => BasisFn::Step { at: *at },
            ("sin", [freq]) => BasisFn::Sin { freq: *freq },
            ("cos", [freq]) => BasisFn::Cos { freq: *freq },
            _ => return Err(Error::InvalidHypothesis(format!("unknown basis function `{s}`"))),
        };
        phi.validate()?;
        Ok(phi)
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    /// `piecewise_constant(c1, c2, ...)`, `basis(const, linear(lo,hi), step(a),
    /// sin(w), cos(w))`, or `constant`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "constant" {
            return Ok(SpaceKind::Basis {
                functions: vec![BasisFn::Constant],
            });
        }
        let (name, args) =
            split_call(s).ok_or_else(|| Error::InvalidHypothesis(format!("unknown space `{s}`")))?;
        let space = match name {
            "piecewise_constant" => SpaceKind::PiecewiseConstant {
                cuts: args.iter().map(|a| parse_f64(a)).collect::<Result<_>>()?,
            },
            "basis" => SpaceKind::Basis {
                functions: args.iter().map(|a| a.parse()).collect::<Result<_>>()?,
            },
            _ => return Err(Error::InvalidHypothesis(format!("unknown space `{s}`"))),
        };
        space.validate()?;
        Ok(space)
    }
}

/// A member `f_θ` of a bounded space.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub space: SpaceKind,
    pub theta: Vec<f64>,
    pub bound: f64,
}

impl Hypothesis {
    pub fn new(space: SpaceKind, theta: Vec<f64>, bound: f64) -> Result<Self> {
        space.validate()?;
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidHypothesis(format!("bound must be > 0, got {bound}")));
        }
        if theta.len() != space.dim() {
            return Err(Error::InvalidHypothesis(format!(
                "space {space} has {} parameters, got {}",
                space.dim(),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidHypothesis("parameters must be finite".into()));
        }
        let sup = space.sup_bound(&theta);
        if sup > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidHypothesis(format!(
                "sup |f| can reach {sup}, above the bound {bound}"
            )));
        }
        Ok(Hypothesis { space, theta, bound })
    }

    /// Piecewise constant with values `values` on the pieces cut at `cuts`.
    pub fn piecewise(cuts: &[f64], values: &[f64], bound: f64) -> Result<Self> {
        Hypothesis::new(SpaceKind::piecewise_constant(cuts), values.to_vec(), bound)
    }

    pub fn eval(&self, x: Input) -> f64 {
        self.space.eval(&self.theta, x)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Hypothesis::new(self.space.clone(), theta, self.bound)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.space.breakpoints()
    }

    pub fn affine_on(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        self.space.affine_on(&self.theta, a, b)
    }

    /// Whether `f` is constant on `[a, b]` (given no interior breakpoints).
    pub fn constant_on(&self, a: f64, b: f64) -> Option<f64> {
        match self.affine_on(a, b) {
            Some((c, s)) if s == 0.0 => Some(c),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn parse_and_display_round_trip() {
        for text in [
            "piecewise_constant(0.75)",
            "piecewise_constant(0.25,0.5)",
            "piecewise_constant()",
            "basis(const,linear(0,1),step(0.5),sin(3),cos(2.5))",
        ] {
            let s: SpaceKind = text.parse().unwrap();
            assert_eq!(s.to_string(), text);
            assert_eq!(s.to_string().parse::<SpaceKind>().unwrap(), s);
        }
        assert!("piecewise_constant(0.5,0.25)".parse::<SpaceKind>().is_err());
        assert!("basis(tan(1))".parse::<SpaceKind>().is_err());
        assert!("spline(3)".parse::<SpaceKind>().is_err());
    }

    #[test]
    fn pieces_and_features() {
        let s = SpaceKind::piecewise_constant(&[0.5, 1.0]);
        assert_eq!(s.piece(0.2), Some(0));
        assert_eq!(s.piece(0.5), Some(1));
        assert_eq!(s.piece(3.0), Some(2));
        assert_eq!(s.eval(&[1.0, 2.0, 3.0], 0.7), 2.0);
        assert_eq!(s.feature(1, 0.7), 1.0);
        assert_eq!(s.feature(0, 0.7), 0.0);
    }

    #[test]
    fn projection_enforces_bound() {
        let mut rng = stream(1, 0, 0);
        let spaces: Vec<SpaceKind> = vec![
            "piecewise_constant(0.5)".parse().unwrap(),
            "basis(const,linear(0,1),sin(4))".parse().unwrap(),
        ];
        for s in &spaces {
            for _ in 0..200 {
                let mut t: Vec<f64> = (0..s.dim()).map(|_| 10.0 * (rng.random::<f64>() - 0.5)).collect();
                s.project(&mut t, 1.0);
                for k in 0..=100 {
                    assert!(s.eval(&t, -0.5 + 0.02 * k as f64).abs() <= 1.0 + 1e-12);
                }
                let r = s.random_theta(1.0, &mut rng);
                assert!(s.sup_bound(&r) <= 1.0);
            }
        }
    }

    #[test]
    fn affine_pieces_match_evaluation() {
        let s: SpaceKind = "basis(const,linear(0,1),step(0.5))".parse().unwrap();
        let theta = [0.2, 0.3, -0.4];
        for (a, b) in [(-1.0, 0.0), (0.0, 0.5), (0.5, 1.0), (1.0, 2.0)] {
            let (c, sl) = s.affine_on(&theta, a, b).unwrap();
            for x in [a + 0.1 * (b - a), 0.5 * (a + b), b - 0.1 * (b - a)] {
                assert!((c + sl * x - s.eval(&theta, x)).abs() < 1e-14);
            }
        }
        let trig: SpaceKind = "basis(sin(1))".parse().unwrap();
        assert!(trig.affine_on(&[0.5], 0.0, 1.0).is_none());
    }

    #[test]
    fn construction_rejects_bound_violations() {
        assert!(Hypothesis::piecewise(&[0.5], &[0.0, 1.5], 1.0).is_err());
        assert!(Hypothesis::piecewise(&[0.5], &[0.0], 1.0).is_err());
        assert!(Hypothesis::piecewise(&[0.5], &[0.0, 1.0], 1.0).is_ok());
    }
}
