//! Closed forms for the two-interval heteroskedastic model.
//!
//! `X` is uniform on `X₁ ∪ X₂ = [0, ½] ∪ [1, 3/2]`, `f* = 0`, the noise is
//! uniform on `[-½, ½]` over `X₁` and uniform on `[-3/2, -½] ∪ [½, 3/2]` over
//! `X₂`. For `f` equal to `f₁` on `X₁` and `f₂` on `X₂`,
//! `V(f) = V₁₁ + V₂₂ + V₁₂` with `V₁₂` depending only on `t = f₁ - f₂`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypothesis::Hypothesis;
use crate::quadrature::{composite_nodes, panel_edges, GaussLegendre};

/// The minimal value of `V`, attained exactly when `|f₁ - f₂| = 1`.
pub const CX_OPTIMAL_V: f64 = -0.625;

const X1: (f64, f64) = (0.0, 0.5);
const X2: (f64, f64) = (1.0, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleDecomposition {
    pub v11: f64,
    pub v22: f64,
    pub v12: f64,
    pub v_total: f64,
    pub t: f64,
    /// `⌊t⌋`.
    pub k: i64,
    /// `t - ⌊t⌋`.
    pub b_frac: f64,
}

impl CounterexampleDecomposition {
    pub fn r(&self) -> f64 {
        -(-self.v_total).ln()
    }
}

/// Decompose `V` for the piecewise constant `f₁·1_{X₁} + f₂·1_{X₂}`.
pub fn cx_decompose(f1: f64, f2: f64, bound: f64) -> Result<CounterexampleDecomposition> {
    if !(f1.is_finite() && f2.is_finite()) || f1.abs() > bound || f2.abs() > bound {
        return Err(Error::InvalidHypothesis(format!(
            "values ({f1}, {f2}) must lie in [-{bound}, {bound}]"
        )));
    }
    let t = f1 - f2;
    let floor = t.floor();
    let k = floor as i64;
    let b = t - floor;
    let v12 = match k {
        1 | -1 => 0.25 * (b - 1.0),
        0 | -2 => -0.25 * b,
        _ => 0.0,
    };
    let (v11, v22) = (-0.25, -0.125);
    Ok(CounterexampleDecomposition {
        v11,
        v22,
        v12,
        v_total: v11 + v22 + v12,
        t,
        k,
        b_frac: b,
    })
}

/// Mean of `f` over one half of the marginal and `∫_I (f - mean)² dρ`,
/// `ρ` having density 1 there.
fn centered_moments(f: &Hypothesis, (lo, hi): (f64, f64)) -> (f64, f64) {
    let edges = panel_edges(lo, hi, &f.breakpoints(), f64::INFINITY);
    let (xs, ws) = composite_nodes(&edges, GaussLegendre::cached(64));
    let vals: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
    let mean = vals.iter().zip(&ws).map(|(v, w)| v * w).sum::<f64>() / (hi - lo);
    let spread = vals.iter().zip(&ws).map(|(v, w)| w * (v - mean) * (v - mean)).sum();
    (mean, spread)
}

/// `L²(ρ)` distance from `f` to the minimizer with `f₁ = m₁` on `X₁` and
/// `f₂ = m₁ ± 1` on `X₂`, where `mᵢ` is the mean of `f` over `Xᵢ` and the sign
/// follows `m₂ - m₁`.
///
/// The square is
/// `‖f - m₁‖²_{X₁} + ‖f - m₂‖²_{X₂} + ½(|m₁ - m₂| - 1)²`. This is an upper
/// bound on the distance to the whole minimizer set, within a factor of two
/// in the square.
pub fn cx_minimizer_distance(f: &Hypothesis) -> f64 {
    let (m1, c1) = centered_moments(f, X1);
    let (m2, c2) = centered_moments(f, X2);
    let gap = (m1 - m2).abs() - 1.0;
    (c1 + c2 + 0.5 * gap * gap).sqrt()
}

/// `sup_ξ |Σ_{|ℓ| ≤ L} |p̂(ξ + 2πℓ)|² - 1|` for the uniform density on
/// `[-½, ½]`, whose integer translates form a partition of unity.
pub fn cx_fourier_identity_check(xi_grid: &[f64], l: usize) -> Result<f64> {
    if l == 0 {
        return Err(Error::InvalidInput("L must be at least 1".into()));
    }
    let sinc_sq = |xi: f64| {
        if xi == 0.0 {
            1.0
        } else {
            let s = 2.0 * (0.5 * xi).sin() / xi;
            s * s
        }
    };
    let l = l as i64;
    let mut worst = 0.0f64;
    for &xi in xi_grid {
        let total: f64 = (-l..=l)
            .map(|j| sinc_sq(xi + 2.0 * std::f64::consts::PI * j as f64))
            .sum();
        worst = worst.max((total - 1.0).abs());
    }
    Ok(worst)
}
