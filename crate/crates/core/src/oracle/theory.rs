//! Constants and curvature checks behind fixed-bandwidth consistency.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::RegressionModel;
use crate::noise::{check_p1, Input, NoiseFamily, P1Evidence, Tag};
use crate::quadrature::{adaptive, Tolerance};

fn require_tag(model: &RegressionModel, tag: Tag) -> Result<()> {
    if model.noise.tags().contains(&tag) {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "`{}` noise is not in class {tag:?}",
            model.noise.id()
        )))
    }
}

/// `C_h = π³ / (2 c_h C₀)` with `c_h = ∫_{|ξ| ≤ a} ξ² e^{-h²ξ²/2} dξ` and
/// `a = min(π / 4M, c₀)`, from explicit class evidence.
pub fn p1_convergence_constant_with(evidence: &P1Evidence, bound: f64, h: f64) -> Result<f64> {
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    if !(evidence.big_c0 > 0.0 && evidence.c0 > 0.0) {
        return Err(Error::InvalidModel("class evidence needs c0 > 0 and C0 > 0".into()));
    }
    let a = (PI / (4.0 * bound)).min(evidence.c0);
    let c_h = 2.0
        * adaptive(
            |xi| xi * xi * (-0.5 * h * h * xi * xi).exp(),
            0.0,
            a,
            &[],
            Tolerance::abs(1e-14).with_rel(1e-13),
        )
        .require()?
        .value;
    Ok(PI.powi(3) / (2.0 * c_h * evidence.big_c0))
}

/// [`p1_convergence_constant_with`] using evidence gathered on a default grid.
pub fn p1_convergence_constant(model: &RegressionModel, h: f64) -> Result<f64> {
    require_tag(model, Tag::P1)?;
    let xi_grid: Vec<f64> = (-2000..=2000).map(|k| k as f64 * 0.01).collect();
    let evidence = check_p1(&model.noise, &xi_grid, &model.noise.representative_inputs(), None)
        .map_err(|w| Error::InvalidModel(format!("class check failed: {w:?}")))?;
    p1_convergence_constant_with(&evidence, model.bound, h)
}

/// `4M + 2M̃`, above which the curvature bound applies.
pub fn p2_threshold(bound: f64, support_bound: f64) -> f64 {
    4.0 * bound + 2.0 * support_bound
}

/// `(1/h²)(1 - (4M+2M̃)²/h²) e^{-2(2M+M̃)²/h²}` for `h` above the threshold.
pub fn p2_curvature_lower_bound(bound: f64, support_bound: f64, h: f64) -> Option<f64> {
    let r = p2_threshold(bound, support_bound);
    if h <= r {
        return None;
    }
    let s = 2.0 * bound + support_bound;
    Some((1.0 - r * r / (h * h)) * (-2.0 * s * s / (h * h)).exp() / (h * h))
}

/// Density of `ε_x - ε_u` for independent draws.
fn difference_density(noise: &NoiseFamily, x: Input, u: Input, w: f64) -> f64 {
    if let Some(g) = noise.cross_correlation(x, u, w) {
        return g;
    }
    let (lo, hi) = noise.support(u).unwrap_or_else(|| {
        let r = noise.tail_radius(1e-12);
        (-r, r)
    });
    let mut breaks = noise.breakpoints(u);
    breaks.extend(noise.breakpoints(x).into_iter().map(|b| b - w));
    adaptive(|v| noise.density(w + v, x) * noise.density(v, u), lo, hi, &breaks, Tolerance::abs(1e-14))
        .value
}

/// `∫ kernel(w - t) g_{x,u}(w) dw` over `[-2M̃, 2M̃]`.
fn against_difference_law<K: Fn(f64) -> f64>(
    model: &RegressionModel,
    x: Input,
    u: Input,
    t: f64,
    kernel: K,
) -> Result<f64> {
    require_tag(model, Tag::P2)?;
    let m = model.bound;
    if !(t.is_finite() && t.abs() <= 4.0 * m) {
        return Err(Error::InvalidRange(format!("|t| must be at most 4M = {}, got {t}", 4.0 * m)));
    }
    let noise = &model.noise;
    let m_tilde = noise
        .support_bound()
        .ok_or_else(|| Error::InvalidModel("noise support must be bounded".into()))?;
    let mut breaks = Vec::new();
    for a in noise.breakpoints(x) {
        for b in noise.breakpoints(u) {
            breaks.push(a - b);
        }
    }
    breaks.push(t);
    let q = adaptive(
        |w| kernel(w - t) * difference_density(noise, x, u, w),
        -2.0 * m_tilde,
        2.0 * m_tilde,
        &breaks,
        Tolerance::abs(1e-15).with_rel(1e-12),
    )
    .require()?;
    Ok(q.value)
}

/// `T''_{x,u}(t) = -(1/h²) ∫ e^{-(w-t)²/2h²} ((w-t)²/h² - 1) g_{x,u}(w) dw`.
///
/// Above [`p2_threshold`] the value is checked against
/// [`p2_curvature_lower_bound`].
pub fn p2_curvature(model: &RegressionModel, x: Input, u: Input, t: f64, h: f64) -> Result<f64> {
    crate::error::check_bandwidth(h)?;
    let h2 = h * h;
    let value = -against_difference_law(model, x, u, t, |s| {
        (-0.5 * s * s / h2).exp() * (s * s / h2 - 1.0)
    })? / h2;
    let m_tilde = model.noise.support_bound().unwrap_or(f64::INFINITY);
    if let Some(lb) = p2_curvature_lower_bound(model.bound, m_tilde, h) {
        if value < lb * (1.0 - 1e-12) {
            return Err(Error::Tolerance(format!("T'' = {value:e} below the bound {lb:e}")));
        }
    }
    Ok(value)
}

/// `T'_{x,u}(t) = -∫ e^{-(w-t)²/2h²} (w-t)/h² g_{x,u}(w) dw`.
pub fn p2_slope(model: &RegressionModel, x: Input, u: Input, t: f64, h: f64) -> Result<f64> {
    crate::error::check_bandwidth(h)?;
    let h2 = h * h;
    Ok(-against_difference_law(model, x, u, t, |s| (-0.5 * s * s / h2).exp() * s / h2)?)
}
