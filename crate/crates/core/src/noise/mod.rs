//! Conditional noise laws `ε | X = x`.
//!
//! Every family exposes its density, characteristic function (convention
//! `∫ p(e) e^{-iξe} de`), a sampler, and the bound metadata used by the
//! oracles: the density bound `M_p`, the derivative bound `M'` and the
//! support bound `M̃`.
//!
//! ```
//! use mee::noise::NoiseFamily;
//!
//! let g = NoiseFamily::Gaussian { sigma: 1.0 };
//! assert!((g.density(0.0, 0.5) - 0.398_942_280_401_432_7).abs() < 1e-15);
//! assert_eq!(g.char_fn(0.0, 0.5).re, 1.0);
//! ```

mod stable;

use std::f64::consts::{E, PI, SQRT_2};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{self, adaptive, oscillatory_half_line, Oscillator, Tolerance};

/// A scalar input point.
pub type Input = f64;

/// Inputs below this value take the narrow branch of [`NoiseFamily::TwoInterval`].
pub const TWO_INTERVAL_SPLIT: f64 = 0.75;

/// Class membership tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tag {
    Homoskedastic,
    P1,
    P2,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Homoskedastic => "homoskedastic",
            Tag::P1 => "P1",
            Tag::P2 => "P2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseFamily {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Uniform on `[-3/2, -1/2] ∪ [1/2, 3/2]` for every input.
    SplitUniform,
    Cauchy { gamma: f64 },
    /// Symmetric α-stable with characteristic function `exp(-γ^α |ξ|^α)`.
    Stable { gamma: f64, alpha: f64 },
    /// Linnik law with characteristic function `1 / (1 + λ^α |ξ|^α)`.
    Linnik { lambda: f64, alpha: f64 },
    /// `Exp(rate) - 1/rate`; zero mean but skewed.
    CenteredExponential { rate: f64 },
    /// Heteroskedastic: uniform on `[-1/2, 1/2]` for `x < 3/4`, uniform on
    /// `[-3/2, -1/2] ∪ [1/2, 3/2]` otherwise.
    TwoInterval,
}

impl NoiseFamily {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match *self {
            NoiseFamily::Gaussian { sigma } => positive("sigma", sigma),
            NoiseFamily::Laplace { scale } => positive("scale", scale),
            NoiseFamily::Uniform { half_width } => positive("half_width", half_width),
            NoiseFamily::Cauchy { gamma } => positive("gamma", gamma),
            NoiseFamily::CenteredExponential { rate } => positive("rate", rate),
            NoiseFamily::Stable { gamma, alpha } => {
                positive("gamma", gamma)?;
                if !(alpha > 0.2 && alpha <= 2.0) {
                    return Err(Error::InvalidModel(format!(
                        "stable alpha must lie in (0.2, 2], got {alpha}"
                    )));
                }
                Ok(())
            }
            NoiseFamily::Linnik { lambda, alpha } => {
                positive("lambda", lambda)?;
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(Error::InvalidModel(format!(
                        "Linnik alpha must lie in (1, 2] (bounded density), got {alpha}"
                    )));
                }
                Ok(())
            }
            NoiseFamily::SplitUniform | NoiseFamily::TwoInterval => Ok(()),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            NoiseFamily::Gaussian { .. } => "gaussian",
            NoiseFamily::Laplace { .. } => "laplace",
            NoiseFamily::Uniform { .. } => "uniform",
            NoiseFamily::SplitUniform => "split_uniform",
            NoiseFamily::Cauchy { .. } => "cauchy",
            NoiseFamily::Stable { .. } => "stable",
            NoiseFamily::Linnik { .. } => "linnik",
            NoiseFamily::CenteredExponential { .. } => "centered_exponential",
            NoiseFamily::TwoInterval => "two_interval",
        }
    }

    fn narrow_branch(x: Input) -> bool {
        x < TWO_INTERVAL_SPLIT
    }

    /// Conditional density `p(e | x)`.
    pub fn density(&self, e: f64, x: Input) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => {
                let z = e / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            NoiseFamily::Laplace { scale } => (-e.abs() / scale).exp() / (2.0 * scale),
            NoiseFamily::Uniform { half_width } => {
                if e.abs() <= half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            NoiseFamily::SplitUniform => split_density(e),
            NoiseFamily::Cauchy { gamma } => {
                let z = e / gamma;
                1.0 / (PI * gamma * (1.0 + z * z))
            }
            NoiseFamily::Stable { gamma, alpha } => {
                stable::stable_unit_density(alpha, e / gamma) / gamma
            }
            NoiseFamily::Linnik { lambda, alpha } => {
                stable::linnik_unit_density(alpha, e / lambda) / lambda
            }
            NoiseFamily::CenteredExponential { rate } => {
                let s = e + 1.0 / rate;
                if s >= 0.0 {
                    rate * (-rate * s).exp()
                } else {
                    0.0
                }
            }
            NoiseFamily::TwoInterval => {
                if Self::narrow_branch(x) {
                    if e.abs() <= 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    split_density(e)
                }
            }
        }
    }

    /// Closed-form characteristic function `∫ p(e|x) e^{-iξe} de`.
    pub fn char_fn(&self, xi: f64, x: Input) -> Complex64 {
        let real = |v: f64| Complex64::new(v, 0.0);
        match *self {
            NoiseFamily::Gaussian { sigma } => real((-0.5 * sigma * sigma * xi * xi).exp()),
            NoiseFamily::Laplace { scale } => real(1.0 / (1.0 + scale * scale * xi * xi)),
            NoiseFamily::Uniform { half_width } => real(sinc(half_width * xi)),
            NoiseFamily::SplitUniform => real(split_char(xi)),
            NoiseFamily::Cauchy { gamma } => real((-gamma * xi.abs()).exp()),
            NoiseFamily::Stable { gamma, alpha } => real((-(gamma * xi.abs()).powf(alpha)).exp()),
            NoiseFamily::Linnik { lambda, alpha } => {
                real(1.0 / (1.0 + (lambda * xi.abs()).powf(alpha)))
            }
            NoiseFamily::CenteredExponential { rate } => {
                // e^{iξ/r} r / (r + iξ)
                let shift = Complex64::from_polar(1.0, xi / rate);
                shift * rate / Complex64::new(rate, xi)
            }
            NoiseFamily::TwoInterval => {
                if Self::narrow_branch(x) {
                    real(sinc(0.5 * xi))
                } else {
                    real(split_char(xi))
                }
            }
        }
    }

    /// Characteristic function by quadrature of the density.
    ///
    /// Compactly supported laws are integrated over their support; the others
    /// use [`oscillatory_half_line`], which copes with `|e|^-2` tails.
    pub fn char_fn_quadrature(&self, xi: f64, x: Input, tol: f64) -> Result<Complex64> {
        let t = Tolerance::abs(tol);
        let breaks = self.breakpoints(x);
        if let Some((lo, hi)) = self.support(x) {
            let re = adaptive(|e| self.density(e, x) * (xi * e).cos(), lo, hi, &breaks, t).require()?;
            let im = if self.symmetric() {
                0.0
            } else {
                -adaptive(|e| self.density(e, x) * (xi * e).sin(), lo, hi, &breaks, t)
                    .require()?
                    .value
            };
            return Ok(Complex64::new(re.value, im));
        }
        let half = Tolerance::abs(0.5 * tol);
        let mono = breaks.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let pos: Vec<f64> = breaks.iter().copied().filter(|b| *b > 0.0).collect();
        let neg: Vec<f64> = breaks.iter().map(|b| -b).filter(|b| *b > 0.0).collect();
        let right = |kind| {
            oscillatory_half_line(|e| self.density(e, x), 0.0, xi, kind, mono, &pos, half).require()
        };
        let left = |kind| {
            oscillatory_half_line(|e| self.density(-e, x), 0.0, xi, kind, mono, &neg, half).require()
        };
        if self.symmetric() {
            let re = right(Oscillator::Cos)?.value;
            Ok(Complex64::new(2.0 * re, 0.0))
        } else {
            let re = right(Oscillator::Cos)?.value + left(Oscillator::Cos)?.value;
            // ∫ p(e) (-sin ξe) de = -∫_0^∞ p(e) sin ξe + ∫_0^∞ p(-e) sin ξe
            let im = -right(Oscillator::Sin)?.value + left(Oscillator::Sin)?.value;
            Ok(Complex64::new(re, im))
        }
    }

    /// Draw one noise value at input `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: Input, rng: &mut R) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseFamily::Laplace { scale } => {
                let w: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    scale * w
                } else {
                    -scale * w
                }
            }
            NoiseFamily::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::SplitUniform => split_sample(rng),
            NoiseFamily::Cauchy { gamma } => {
                let v = PI * (rng.random::<f64>() - 0.5);
                gamma * v.tan()
            }
            NoiseFamily::Stable { gamma, alpha } => gamma * stable_sample(alpha, rng),
            NoiseFamily::Linnik { lambda, alpha } => {
                let w: f64 = Exp1.sample(rng);
                lambda * stable_sample(alpha, rng) * w.powf(1.0 / alpha)
            }
            NoiseFamily::CenteredExponential { rate } => {
                let w: f64 = Exp1.sample(rng);
                (w - 1.0) / rate
            }
            NoiseFamily::TwoInterval => {
                if Self::narrow_branch(x) {
                    rng.random::<f64>() - 0.5
                } else {
                    split_sample(rng)
                }
            }
        }
    }

    /// Conditional distribution function. Stable and Linnik laws outside
    /// their closed-form indices integrate the density numerically.
    pub fn cdf(&self, e: f64, x: Input) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => 0.5 * erfc(-e / (sigma * SQRT_2)),
            NoiseFamily::Laplace { scale } => {
                if e < 0.0 {
                    0.5 * (e / scale).exp()
                } else {
                    1.0 - 0.5 * (-e / scale).exp()
                }
            }
            NoiseFamily::Uniform { half_width } => ((e + half_width) / (2.0 * half_width)).clamp(0.0, 1.0),
            NoiseFamily::SplitUniform => split_cdf(e),
            NoiseFamily::Cauchy { gamma } => 0.5 + (e / gamma).atan() / PI,
            NoiseFamily::Stable { gamma, alpha } if alpha == 2.0 => {
                0.5 * erfc(-e / (2.0 * gamma))
            }
            NoiseFamily::Stable { gamma, alpha } if alpha == 1.0 => 0.5 + (e / gamma).atan() / PI,
            NoiseFamily::Linnik { lambda, alpha } if alpha == 2.0 => {
                NoiseFamily::Laplace { scale: lambda }.cdf(e, x)
            }
            NoiseFamily::Stable { .. } | NoiseFamily::Linnik { .. } => {
                let mass = adaptive(
                    |s| self.density(s, x),
                    0.0,
                    e.abs(),
                    &[],
                    Tolerance::abs(1e-14).with_rel(1e-12),
                )
                .value;
                (0.5 + mass.copysign(e)).clamp(0.0, 1.0)
            }
            NoiseFamily::CenteredExponential { rate } => {
                let s = e + 1.0 / rate;
                if s <= 0.0 {
                    0.0
                } else {
                    -(-rate * s).exp_m1()
                }
            }
            NoiseFamily::TwoInterval => {
                if Self::narrow_branch(x) {
                    (e + 0.5).clamp(0.0, 1.0)
                } else {
                    split_cdf(e)
                }
            }
        }
    }

    /// Whether [`cdf`](Self::cdf) is a closed form (cheap enough for inner loops).
    pub fn has_closed_cdf(&self) -> bool {
        match *self {
            NoiseFamily::Stable { alpha, .. } => alpha == 1.0 || alpha == 2.0,
            NoiseFamily::Linnik { alpha, .. } => alpha == 2.0,
            _ => true,
        }
    }

    /// `M_p`: uniform bound on the density.
    pub fn density_bound(&self) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => 1.0 / (sigma * (2.0 * PI).sqrt()),
            NoiseFamily::Laplace { scale } => 0.5 / scale,
            NoiseFamily::Uniform { half_width } => 0.5 / half_width,
            NoiseFamily::SplitUniform => 0.5,
            NoiseFamily::Cauchy { gamma } => 1.0 / (PI * gamma),
            NoiseFamily::Stable { gamma, alpha } => gamma_fn(1.0 + 1.0 / alpha) / (PI * gamma),
            NoiseFamily::Linnik { lambda, alpha } => 1.0 / (lambda * alpha * (PI / alpha).sin()),
            NoiseFamily::CenteredExponential { rate } => rate,
            NoiseFamily::TwoInterval => 1.0,
        }
    }

    /// `M'`: bound on `|∂p/∂e|` where one is known.
    pub fn deriv_bound(&self) -> Option<f64> {
        match *self {
            NoiseFamily::Gaussian { sigma } => Some(1.0 / (sigma * sigma * (2.0 * PI * E).sqrt())),
            NoiseFamily::Laplace { scale } => Some(0.5 / (scale * scale)),
            NoiseFamily::Cauchy { gamma } => Some(3.0 * 3f64.sqrt() / (8.0 * PI * gamma * gamma)),
            // |p'(e)| ≤ (1/π) ∫ ξ exp(-(γξ)^α) dξ
            NoiseFamily::Stable { gamma, alpha } => {
                Some(gamma_fn(2.0 / alpha) / (PI * alpha * gamma * gamma))
            }
            _ => None,
        }
    }

    /// `M̃`: radius of the support, if bounded.
    pub fn support_bound(&self) -> Option<f64> {
        match *self {
            NoiseFamily::Uniform { half_width } => Some(half_width),
            NoiseFamily::SplitUniform | NoiseFamily::TwoInterval => Some(1.5),
            _ => None,
        }
    }

    /// Support at input `x`, if bounded.
    pub fn support(&self, x: Input) -> Option<(f64, f64)> {
        match *self {
            NoiseFamily::TwoInterval if Self::narrow_branch(x) => Some((-0.5, 0.5)),
            _ => self.support_bound().map(|m| (-m, m)),
        }
    }

    pub fn symmetric(&self) -> bool {
        !matches!(self, NoiseFamily::CenteredExponential { .. })
    }

    /// Polynomial rather than exponential tails.
    pub fn heavy_tailed(&self) -> bool {
        match *self {
            NoiseFamily::Cauchy { .. } => true,
            NoiseFamily::Stable { alpha, .. } | NoiseFamily::Linnik { alpha, .. } => alpha < 2.0,
            _ => false,
        }
    }

    /// Pieces `(lo, hi, height)` when the density is piecewise constant.
    pub fn uniform_pieces(&self, x: Input) -> Option<Vec<(f64, f64, f64)>> {
        let split = vec![(-1.5, -0.5, 0.5), (0.5, 1.5, 0.5)];
        match *self {
            NoiseFamily::Uniform { half_width } => Some(vec![(-half_width, half_width, 0.5 / half_width)]),
            NoiseFamily::SplitUniform => Some(split),
            NoiseFamily::TwoInterval if Self::narrow_branch(x) => Some(vec![(-0.5, 0.5, 1.0)]),
            NoiseFamily::TwoInterval => Some(split),
            _ => None,
        }
    }

    /// `∫ p(e + s | x) p(e | u) de` in closed form, where available.
    pub fn cross_correlation(&self, x: Input, u: Input, s: f64) -> Option<f64> {
        match *self {
            NoiseFamily::Gaussian { sigma } => {
                let v = 2.0 * sigma * sigma;
                Some((-s * s / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
            }
            NoiseFamily::Laplace { scale } => {
                let a = s.abs() / scale;
                Some((1.0 + a) * (-a).exp() / (4.0 * scale))
            }
            NoiseFamily::Cauchy { gamma } => Some(2.0 * gamma / (PI * (4.0 * gamma * gamma + s * s))),
            _ => {
                let px = self.uniform_pieces(x)?;
                let pu = self.uniform_pieces(u)?;
                let mut total = 0.0;
                for &(a1, b1, c1) in &px {
                    for &(a2, b2, c2) in &pu {
                        let overlap = (b1 - s).min(b2) - (a1 - s).max(a2);
                        if overlap > 0.0 {
                            total += c1 * c2 * overlap;
                        }
                    }
                }
                Some(total)
            }
        }
    }

    pub fn is_homoskedastic(&self) -> bool {
        !matches!(self, NoiseFamily::TwoInterval)
    }

    pub fn tags(&self) -> Vec<Tag> {
        let mut tags = Vec::new();
        if self.is_homoskedastic() {
            tags.push(Tag::Homoskedastic);
        }
        match self {
            NoiseFamily::Gaussian { .. }
            | NoiseFamily::Laplace { .. }
            | NoiseFamily::Cauchy { .. }
            | NoiseFamily::Stable { .. }
            | NoiseFamily::Linnik { .. } => tags.push(Tag::P1),
            NoiseFamily::Uniform { .. } | NoiseFamily::SplitUniform | NoiseFamily::TwoInterval => {
                tags.push(Tag::P2)
            }
            NoiseFamily::CenteredExponential { .. } => {}
        }
        tags
    }

    /// Points where the density (or its derivative) is not smooth.
    pub fn breakpoints(&self, x: Input) -> Vec<f64> {
        match *self {
            NoiseFamily::Laplace { .. } => vec![0.0],
            NoiseFamily::Linnik { .. } => vec![0.0],
            NoiseFamily::Uniform { half_width } => vec![-half_width, half_width],
            NoiseFamily::SplitUniform => vec![-1.5, -0.5, 0.5, 1.5],
            NoiseFamily::CenteredExponential { rate } => vec![-1.0 / rate],
            NoiseFamily::TwoInterval => {
                if Self::narrow_branch(x) {
                    vec![-0.5, 0.5]
                } else {
                    vec![-1.5, -0.5, 0.5, 1.5]
                }
            }
            _ => Vec::new(),
        }
    }

    /// Radius `R` with `P(|ε| > R) ≤ mass` (asymptotic for stable/Linnik
    /// tails, padded by a factor of two).
    pub fn tail_radius(&self, mass: f64) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => sigma * SQRT_2 * erfc_inv(mass),
            NoiseFamily::Laplace { scale } => scale * (1.0 / mass).ln(),
            NoiseFamily::Cauchy { gamma } => gamma * (0.5 * PI * (1.0 - mass)).tan(),
            NoiseFamily::Stable { gamma, alpha } => {
                if alpha == 2.0 {
                    2.0 * gamma * erfc_inv(mass)
                } else {
                    2.0 * gamma * (stable::tail_coefficient(alpha) / mass).powf(1.0 / alpha)
                }
            }
            NoiseFamily::Linnik { lambda, alpha } => {
                if alpha == 2.0 {
                    lambda * (1.0 / mass).ln()
                } else {
                    2.0 * lambda * (stable::tail_coefficient(alpha) / mass).powf(1.0 / alpha)
                }
            }
            NoiseFamily::CenteredExponential { rate } => (1.0 / mass).ln() / rate,
            _ => self.support_bound().unwrap_or(0.0),
        }
    }

    /// `|p̂(ξ)|²` of a homoskedastic law.
    pub fn char_sq(&self, xi: f64) -> f64 {
        self.char_fn(xi, 0.0).norm_sqr()
    }

    /// For laws whose `|p̂(ξ)|²` equals `ξ^-2 Σ c cos(ω ξ)`, the `(c, ω)` terms.
    /// Lets the Plancherel route integrate the slowly decaying tail exactly.
    pub fn char_sq_trig(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            NoiseFamily::Uniform { half_width: a } => {
                let c = 0.5 / (a * a);
                Some(vec![(c, 0.0), (-c, 2.0 * a)])
            }
            NoiseFamily::SplitUniform => {
                Some(vec![(1.0, 0.0), (-1.5, 1.0), (1.0, 2.0), (-0.5, 3.0)])
            }
            _ => None,
        }
    }

    /// Inputs that exercise every branch of the conditional law.
    pub fn representative_inputs(&self) -> Vec<Input> {
        match self {
            NoiseFamily::TwoInterval => vec![0.25, 1.25],
            _ => vec![0.5],
        }
    }
}

fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

fn split_density(e: f64) -> f64 {
    let a = e.abs();
    if (0.5..=1.5).contains(&a) {
        0.5
    } else {
        0.0
    }
}

fn split_char(xi: f64) -> f64 {
    // (sin 1.5ξ - sin 0.5ξ) / ξ = 1.5 sinc(1.5ξ) - 0.5 sinc(0.5ξ)
    1.5 * sinc(1.5 * xi) - 0.5 * sinc(0.5 * xi)
}

fn split_cdf(e: f64) -> f64 {
    if e < -1.5 {
        0.0
    } else if e < -0.5 {
        0.5 * (e + 1.5)
    } else if e < 0.5 {
        0.5
    } else if e < 1.5 {
        0.5 + 0.5 * (e - 0.5)
    } else {
        1.0
    }
}

fn split_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mag = 0.5 + u;
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Chambers–Mallows–Stuck draw from the unit symmetric stable law.
fn stable_sample<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// `p(e | x)`.
pub fn density_at(family: &NoiseFamily, e: f64, x: Input) -> f64 {
    family.density(e, x)
}

/// `p̂(ξ | x)`.
pub fn char_fn_at(family: &NoiseFamily, xi: f64, x: Input) -> Complex64 {
    family.char_fn(xi, x)
}

pub fn sample_noise<R: Rng + ?Sized>(family: &NoiseFamily, x: Input, rng: &mut R) -> f64 {
    family.sample(x, rng)
}

/// Why a class check failed, and where.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub kind: WitnessKind,
    /// The offending `ξ` or `e`.
    pub point: f64,
    pub x: Input,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    Asymmetric,
    NegativeCharFn,
    NotUnimodal,
    UnboundedSupport,
}

/// Grid evidence for membership in the positive-characteristic-function class.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Evidence {
    pub c0: f64,
    /// `C0`: smallest characteristic-function value on `[-c0, c0]` over the grids.
    pub big_c0: f64,
    /// Smallest characteristic-function value over the whole ξ grid.
    pub grid_min_charfn: f64,
    pub unimodal_check: bool,
}

/// Grid check for symmetric, unimodal laws with nonnegative characteristic function.
///
/// `c0` defaults to the reciprocal scale of the family. The characteristic
/// function is scanned on `xi_grid` at every input in `x_grid`; unimodality is
/// tested on 4096 points over the truncated support.
pub fn check_p1(
    family: &NoiseFamily,
    xi_grid: &[f64],
    x_grid: &[Input],
    c0: Option<f64>,
) -> std::result::Result<P1Evidence, Witness> {
    let c0 = c0.unwrap_or_else(|| natural_frequency(family));
    let mut grid_min = f64::INFINITY;
    let mut big_c0 = f64::INFINITY;
    let mut ordered: Vec<f64> = xi_grid.to_vec();
    ordered.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    for &x in x_grid {
        if !family.symmetric() {
            let point = asymmetry_witness(family, x);
            return Err(Witness {
                kind: WitnessKind::Asymmetric,
                point,
                x,
            });
        }
        for &xi in &ordered {
            let v = family.char_fn(xi, x).re;
            if v < 0.0 {
                return Err(Witness {
                    kind: WitnessKind::NegativeCharFn,
                    point: xi,
                    x,
                });
            }
            grid_min = grid_min.min(v);
            if xi.abs() <= c0 {
                big_c0 = big_c0.min(v);
            }
        }
        if let Some(e) = unimodality_witness(family, x) {
            return Err(Witness {
                kind: WitnessKind::NotUnimodal,
                point: e,
                x,
            });
        }
    }
    Ok(P1Evidence {
        c0,
        big_c0,
        grid_min_charfn: grid_min,
        unimodal_check: true,
    })
}

fn natural_frequency(family: &NoiseFamily) -> f64 {
    match *family {
        NoiseFamily::Gaussian { sigma } => 1.0 / sigma,
        NoiseFamily::Laplace { scale } => 1.0 / scale,
        NoiseFamily::Uniform { half_width } => 1.0 / half_width,
        NoiseFamily::Cauchy { gamma } | NoiseFamily::Stable { gamma, .. } => 1.0 / gamma,
        NoiseFamily::Linnik { lambda, .. } => 1.0 / lambda,
        NoiseFamily::CenteredExponential { rate } => rate,
        NoiseFamily::SplitUniform | NoiseFamily::TwoInterval => 1.0,
    }
}

fn asymmetry_witness(family: &NoiseFamily, x: Input) -> f64 {
    let r = family.tail_radius(1e-3);
    (0..=400)
        .map(|k| r * k as f64 / 400.0)
        .max_by(|a, b| {
            let da = (family.density(*a, x) - family.density(-*a, x)).abs();
            let db = (family.density(*b, x) - family.density(-*b, x)).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(0.0)
}

fn unimodality_witness(family: &NoiseFamily, x: Input) -> Option<f64> {
    const POINTS: usize = 4096;
    let r = family.tail_radius(1e-4).max(1e-12);
    let grid: Vec<f64> = (0..POINTS)
        .map(|k| -r + 2.0 * r * k as f64 / (POINTS - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&e| family.density(e, x)).collect();
    let mut last_sign = 0i8;
    let mut changes = 0;
    for k in 1..POINTS {
        let d = values[k] - values[k - 1];
        let tol = 1e-12 * values[k].max(values[k - 1]);
        let s = if d > tol {
            1
        } else if d < -tol {
            -1
        } else {
            0
        };
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                changes += 1;
                // a single switch from rising to falling is the mode
                if changes > 1 || last_sign < 0 {
                    return Some(grid[k - 1]);
                }
            }
            last_sign = s;
        }
    }
    None
}

/// Grid check for symmetric laws with compact support. Returns the tightest
/// `M̃` on the grid `e = k/1000`, `|e| ≤ 10`.
pub fn check_p2(family: &NoiseFamily) -> std::result::Result<f64, Witness> {
    let mut widest = 0.0f64;
    for x in family.representative_inputs() {
        for k in 0..=10_000 {
            let e = k as f64 / 1000.0;
            let right = family.density(e, x);
            let left = family.density(-e, x);
            if (right - left).abs() > 1e-12 * right.max(left) {
                return Err(Witness {
                    kind: WitnessKind::Asymmetric,
                    point: e,
                    x,
                });
            }
            if right > 0.0 {
                widest = widest.max(e);
            }
        }
        if family.density(10.0, x) > 0.0 {
            return Err(Witness {
                kind: WitnessKind::UnboundedSupport,
                point: 10.0,
                x,
            });
        }
    }
    Ok(widest)
}

/// Integral of `p(·|x)` over the real line; unbounded laws are cut at
/// [`NoiseFamily::tail_radius`]`(1e-9)`.
pub fn total_mass(family: &NoiseFamily, x: Input) -> Result<f64> {
    let (lo, hi) = family.support(x).unwrap_or_else(|| {
        let r = family.tail_radius(1e-9);
        (-r, r)
    });
    let mut breaks = family.breakpoints(x);
    breaks.extend(geometric_breaks(hi.max(-lo)));
    let r = quadrature::adaptive(|e| family.density(e, x), lo, hi, &breaks, Tolerance::abs(1e-10))
        .require()?;
    Ok(r.value)
}

/// `±2^k` for `2^k` up to `r`, so that adaptive rules see every scale of a
/// heavy tail.
pub(crate) fn geometric_breaks(r: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut b = 0.25;
    while b < r {
        out.push(b);
        out.push(-b);
        b *= 2.0;
    }
    out
}
