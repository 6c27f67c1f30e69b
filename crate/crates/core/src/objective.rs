//! Gaussian kernel, error-density KDE and the empirical information error
//!
//! ```text
//! E_{h,z}(f) = -(1/n²) Σ_i Σ_j G_h(e_i - e_j),   e_i = y_i - f(x_i),
//! R_z(f)     = -log(-E_{h,z}(f)).
//! ```
//!
//! The double sum is exact (diagonal included) and costs `O(n²)`. Pair
//! differences are formed as `(y_i - y_j) - (g_i - g_j)` where `g` omits the
//! intercept feature, so shifting an intercept leaves every bit unchanged; for
//! piecewise-constant spaces the same-piece pairs do not depend on `θ` at all
//! and are summed once per dataset.
//!
//! Rows are split into fixed blocks whose partial sums are combined in block
//! order, so results do not depend on the number of worker threads.

use std::f64::consts::PI;
use std::sync::Once;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{check_bandwidth, Error, Result};
use crate::hypothesis::{Hypothesis, SpaceKind};

const BLOCK: usize = 64;
const LARGE_N: usize = 200_000;

/// `G_h(t) = exp(-t²/2h²) / (√(2π) h)`.
pub fn gaussian_kernel(t: f64, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(kernel_unchecked(t, h))
}

#[inline]
fn kernel_unchecked(t: f64, h: f64) -> f64 {
    (-0.5 * (t / h) * (t / h)).exp() / ((2.0 * PI).sqrt() * h)
}

/// `exp(x)` for `x ≤ 0`, written so the pair loops vectorize.
///
/// Round-to-nearest reduction `x = k ln 2 + r` with `|r| ≤ ln 2 / 2`, a
/// degree-13 Taylor polynomial for `e^r` evaluated in Estrin form (short
/// dependency chains) and `2^k` assembled from its bits. Relative error stays
/// within a few ulps; arguments below -708 return `e^{-708}` rather than a
/// subnormal, which is far below anything that matters in a sum of kernel
/// values.
#[inline(always)]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 · 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const C: [f64; 14] = [
        1.0,
        1.0,
        0.5,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5_040.0,
        1.0 / 40_320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    let x = if x < -708.0 { -708.0 } else { x };
    let shifted = x * std::f64::consts::LOG2_E + MAGIC;
    let k = shifted - MAGIC;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let q0 = (C[0] + C[1] * r) + (C[2] + C[3] * r) * r2;
    let q1 = (C[4] + C[5] * r) + (C[6] + C[7] * r) * r2;
    let q2 = (C[8] + C[9] * r) + (C[10] + C[11] * r) * r2;
    let q3 = C[12] + C[13] * r;
    let p = (q0 + q1 * r4) + (q2 + q3 * r4) * r8;
    // the low bits of `shifted` hold k as a two's-complement integer
    let bits = shifted.to_bits().wrapping_sub(MAGIC.to_bits()).wrapping_add(1023) << 52;
    p * f64::from_bits(bits)
}

const LANES: usize = 8;

fn lane_sum(v: &[f64; LANES]) -> f64 {
    v.iter().fold(0.0, |a, b| a + b)
}

/// `Σ_j exp(inv·t_j²)` and `Σ_j t_j exp(inv·t_j²)` with `t_j = (c - ys[j]) - offset`.
#[inline]
fn shifted_row(c: f64, offset: f64, ys: &[f64], inv: f64) -> (f64, f64) {
    let mut se = [0.0; LANES];
    let mut ste = [0.0; LANES];
    let chunks = ys.chunks_exact(LANES);
    let rest = chunks.remainder();
    for ch in chunks {
        for l in 0..LANES {
            let t = (c - ch[l]) - offset;
            let e = exp_nonpos(t * t * inv);
            se[l] += e;
            ste[l] += t * e;
        }
    }
    let mut s = lane_sum(&se);
    let mut st = lane_sum(&ste);
    for &yj in rest {
        let t = (c - yj) - offset;
        let e = exp_nonpos(t * t * inv);
        s += e;
        st += t * e;
    }
    (s, st)
}

/// `Σ_j exp(inv·t_j²)` with `t_j = (yi - ys[j]) - (gi - gs[j])`.
#[inline]
fn basis_row(yi: f64, gi: f64, ys: &[f64], gs: &[f64], inv: f64) -> f64 {
    let mut se = [0.0; LANES];
    let ys_chunks = ys.chunks_exact(LANES);
    let gs_chunks = gs.chunks_exact(LANES);
    let (yr, gr) = (ys_chunks.remainder(), gs_chunks.remainder());
    for (cy, cg) in ys_chunks.zip(gs_chunks) {
        for l in 0..LANES {
            let t = (yi - cy[l]) - (gi - cg[l]);
            se[l] += exp_nonpos(t * t * inv);
        }
    }
    let mut s = lane_sum(&se);
    for (&yj, &gj) in yr.iter().zip(gr) {
        let t = (yi - yj) - (gi - gj);
        s += exp_nonpos(t * t * inv);
    }
    s
}

/// Kernel density estimate `(1/n) Σ_j G_h(e - e_j)`.
pub fn kde_at(errors: &[f64], h: f64, e: f64) -> Result<f64> {
    check_bandwidth(h)?;
    if errors.is_empty() {
        return Err(Error::InvalidInput("kde needs at least one error value".into()));
    }
    let s: f64 = errors.iter().map(|&ej| kernel_unchecked(e - ej, h)).sum();
    Ok(s / errors.len() as f64)
}

/// `E_{h,z}(f)`.
pub fn empirical_info_error(f: &Hypothesis, data: &Dataset, h: f64) -> Result<f64> {
    Ok(Objective::new(data, &f.space, h)?.value(&f.theta))
}

/// `R_z(f) = -log(-E_{h,z}(f))`.
pub fn empirical_renyi(f: &Hypothesis, data: &Dataset, h: f64) -> Result<f64> {
    Ok(-(-empirical_info_error(f, data, h)?).ln())
}

/// `∂E_{h,z}/∂θ`.
pub fn grad_info_error(f: &Hypothesis, data: &Dataset, h: f64) -> Result<Vec<f64>> {
    Ok(Objective::new(data, &f.space, h)?.value_and_grad(&f.theta).1)
}

/// `b_z = (1/n) Σ (y_i - f(x_i))`.
pub fn constant_adjustment(f: &Hypothesis, data: &Dataset) -> f64 {
    let r = data.residuals(f);
    r.iter().sum::<f64>() / r.len() as f64
}

/// `E_{h,z}` over a fixed dataset and space, prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Objective {
    h: f64,
    n: usize,
    dim: usize,
    y: Vec<f64>,
    layout: Layout,
}

#[derive(Debug, Clone)]
enum Layout {
    /// Rows sorted by piece; `ranges[p]` holds the rows of piece `p`.
    Pieces {
        piece_of_row: Vec<usize>,
        ranges: Vec<(usize, usize)>,
        within: f64,
    },
    /// `features[k][i]` for each varying (non-intercept) parameter `varying[k]`.
    Basis {
        varying: Vec<usize>,
        features: Vec<Vec<f64>>,
    },
}

impl Objective {
    pub fn new(data: &Dataset, space: &SpaceKind, h: f64) -> Result<Self> {
        check_bandwidth(h)?;
        space.validate()?;
        let n = data.len();
        if n > LARGE_N {
            static WARN: Once = Once::new();
            WARN.call_once(|| {
                eprintln!("warning: exact O(n^2) objective with n = {n}; expect long run times")
            });
        }
        let inv = -0.5 / (h * h);
        let layout;
        let y;
        match space {
            SpaceKind::PiecewiseConstant { .. } => {
                let mut rows: Vec<(usize, usize)> = data
                    .x()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| (space.piece(x).unwrap_or(0), i))
                    .collect();
                rows.sort();
                y = rows.iter().map(|&(_, i)| data.y()[i]).collect::<Vec<f64>>();
                let piece_of_row: Vec<usize> = rows.iter().map(|&(p, _)| p).collect();
                let mut ranges = vec![(0, 0); space.dim()];
                let mut start = 0;
                for p in 0..space.dim() {
                    let end = start + piece_of_row[start..].partition_point(|&q| q == p);
                    ranges[p] = (start, end);
                    start = end;
                }
                let within = block_sum(n, |rows| {
                    let mut s = 0.0;
                    for i in rows {
                        let (_, end) = ranges[piece_of_row[i]];
                        s += shifted_row(y[i], 0.0, &y[i + 1..end], inv).0;
                    }
                    s
                });
                layout = Layout::Pieces {
                    piece_of_row,
                    ranges,
                    within,
                };
            }
            SpaceKind::Basis { .. } => {
                y = data.y().to_vec();
                let varying: Vec<usize> = (0..space.dim()).filter(|&k| !space.is_intercept(k)).collect();
                let features = varying
                    .iter()
                    .map(|&k| data.x().iter().map(|&x| space.feature(k, x)).collect())
                    .collect();
                layout = Layout::Basis { varying, features };
            }
        }
        Ok(Objective {
            h,
            n,
            dim: space.dim(),
            y,
            layout,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn finish(&self, pair_sum: f64) -> f64 {
        let n = self.n as f64;
        let c = 1.0 / ((2.0 * PI).sqrt() * self.h);
        -c * (n + 2.0 * pair_sum) / (n * n)
    }

    fn varying_values(&self, theta: &[f64]) -> Vec<f64> {
        match &self.layout {
            Layout::Pieces { piece_of_row, .. } => piece_of_row.iter().map(|&p| theta[p]).collect(),
            Layout::Basis { varying, features } => {
                let mut g = vec![0.0; self.n];
                for (k, col) in varying.iter().zip(features) {
                    let t = theta[*k];
                    for (gi, f) in g.iter_mut().zip(col) {
                        *gi += t * f;
                    }
                }
                g
            }
        }
    }

    /// `E_{h,z}(f_θ)`.
    pub fn value(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim, "parameter length mismatch");
        let inv = -0.5 / (self.h * self.h);
        let y = &self.y;
        let n = self.n;
        match &self.layout {
            Layout::Pieces {
                piece_of_row,
                ranges,
                within,
            } => {
                let cross = block_sum(n, |rows| {
                    let mut s = 0.0;
                    for i in rows {
                        let a = piece_of_row[i];
                        let yi = y[i];
                        let ga = theta[a];
                        for (b, &(lo, hi)) in ranges.iter().enumerate().skip(a + 1) {
                            s += shifted_row(yi, ga - theta[b], &y[lo..hi], inv).0;
                        }
                    }
                    s
                });
                self.finish(within + cross)
            }
            Layout::Basis { .. } => {
                let g = self.varying_values(theta);
                let s = block_sum(n, |rows| {
                    let mut s = 0.0;
                    for i in rows {
                        s += basis_row(y[i], g[i], &y[i + 1..], &g[i + 1..], inv);
                    }
                    s
                });
                self.finish(s)
            }
        }
    }

    /// `(E_{h,z}(f_θ), ∇_θ E_{h,z}(f_θ))`.
    pub fn value_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(theta.len(), self.dim, "parameter length mismatch");
        let inv = -0.5 / (self.h * self.h);
        let y = &self.y;
        let n = self.n;
        let dim = self.dim;
        let (pair_sum, raw) = match &self.layout {
            Layout::Pieces {
                piece_of_row,
                ranges,
                within,
            } => {
                let parts = block_map(n, |rows| {
                    let mut s = 0.0;
                    let mut grad = vec![0.0; dim];
                    for i in rows {
                        let a = piece_of_row[i];
                        let yi = y[i];
                        let ga = theta[a];
                        for (b, &(lo, hi)) in ranges.iter().enumerate().skip(a + 1) {
                            let (se, ste) = shifted_row(yi, ga - theta[b], &y[lo..hi], inv);
                            s += se;
                            grad[a] += ste;
                            grad[b] -= ste;
                        }
                    }
                    (s, grad)
                });
                let mut s = 0.0;
                let mut grad = vec![0.0; dim];
                for (ps, pg) in parts {
                    s += ps;
                    for (g, v) in grad.iter_mut().zip(pg) {
                        *g += v;
                    }
                }
                (within + s, grad)
            }
            Layout::Basis { varying, features } => {
                let g = self.varying_values(theta);
                let m = varying.len();
                let parts = block_map(n, |rows| {
                    let mut s = 0.0;
                    let mut grad = vec![0.0; m];
                    let mut w = vec![0.0; m];
                    for i in rows {
                        let (yi, gi) = (y[i], g[i]);
                        let mut r = 0.0;
                        w.iter_mut().for_each(|v| *v = 0.0);
                        for j in i + 1..n {
                            let t = (yi - y[j]) - (gi - g[j]);
                            let e = exp_nonpos(t * t * inv);
                            s += e;
                            let te = t * e;
                            r += te;
                            for (wk, col) in w.iter_mut().zip(features) {
                                *wk += te * col[j];
                            }
                        }
                        for k in 0..m {
                            grad[k] += features[k][i] * r - w[k];
                        }
                    }
                    (s, grad)
                });
                let mut s = 0.0;
                let mut acc = vec![0.0; m];
                for (ps, pg) in parts {
                    s += ps;
                    for (g, v) in acc.iter_mut().zip(pg) {
                        *g += v;
                    }
                }
                let mut grad = vec![0.0; dim];
                for (k, v) in varying.iter().zip(acc) {
                    grad[*k] = v;
                }
                (s, grad)
            }
        };
        // ∂/∂θ_k of -(c/n²) Σ_{i,j} exp(-t²/2h²) with ∂t_ij/∂θ_k = -(φ_ik - φ_jk)
        let nf = n as f64;
        let c = 1.0 / ((2.0 * PI).sqrt() * self.h);
        let scale = -2.0 * c / (nf * nf * self.h * self.h);
        let grad = raw.into_iter().map(|v| scale * v).collect();
        (self.finish(pair_sum), grad)
    }
}

fn block_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(BLOCK))
        .map(|b| b * BLOCK..((b + 1) * BLOCK).min(n))
        .collect()
}

fn block_map<T: Send, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    block_ranges(n).into_par_iter().map(f).collect()
}

/// Sum of per-block partial sums, added in block order.
fn block_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    block_map(n, f).into_iter().fold(0.0, |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::Hypothesis;

    fn constant_space() -> Hypothesis {
        Hypothesis::new("constant".parse().unwrap(), vec![0.0], 1.0).unwrap()
    }

    /// Direct double sum over residuals.
    fn brute(residuals: &[f64], h: f64) -> f64 {
        let n = residuals.len() as f64;
        let mut s = 0.0;
        for &a in residuals {
            for &b in residuals {
                s += kernel_unchecked(a - b, h);
            }
        }
        -s / (n * n)
    }

    #[test]
    fn fast_exp_matches_libm() {
        let mut worst = 0.0f64;
        for k in 0..=200_000 {
            let x = -700.0 * (k as f64 / 200_000.0).powi(2);
            let rel = (exp_nonpos(x) - x.exp()).abs() / x.exp();
            worst = worst.max(rel);
        }
        assert!(worst < 1e-15, "{worst:e}");
        assert_eq!(exp_nonpos(0.0), 1.0);
        assert!(exp_nonpos(-1e6) < 1e-300);
        assert!(exp_nonpos(f64::NEG_INFINITY) < 1e-300);
    }

    #[test]
    fn kernel_values() {
        assert!((gaussian_kernel(0.0, 1.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((gaussian_kernel(1.0, 1.0).unwrap() - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert!((gaussian_kernel(0.0, 0.5).unwrap() - 0.797_884_560_802_865_4).abs() < 1e-15);
        assert!(matches!(gaussian_kernel(0.0, 0.0), Err(Error::InvalidBandwidth(_))));
        assert!(matches!(gaussian_kernel(0.0, -1.0), Err(Error::InvalidBandwidth(_))));
    }

    #[test]
    fn kde_values() {
        assert!((kde_at(&[0.0], 1.0, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        let two = kde_at(&[0.0, 1.0], 1.0, 0.0).unwrap();
        assert!((two - 0.5 * (0.398_942_280_401_432_7 + 0.241_970_724_519_143_37)).abs() < 1e-15);
        assert!(matches!(kde_at(&[], 1.0, 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn documented_objective_values() {
        let f = constant_space();
        let one = Dataset::from_pairs(&[(0.3, 5.0)]).unwrap();
        assert!((empirical_info_error(&f, &one, 1.0).unwrap() + 0.398_942_280_401_432_7).abs() < 1e-15);
        let two = Dataset::from_pairs(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let e = empirical_info_error(&f, &two, 1.0).unwrap();
        assert!((e + 0.320_456_502_460_288).abs() < 1e-12, "{e}");
        let r = empirical_renyi(&f, &two, 1.0).unwrap();
        assert!((r - 1.138_008_729_584_511).abs() < 1e-13, "{r}");
        let same = Dataset::from_pairs(&[(0.0, 2.0), (0.5, 2.0), (0.9, 2.0)]).unwrap();
        let r = empirical_renyi(&f, &same, 1.0).unwrap();
        assert!((r - 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_for_both_layouts() {
        let pairs: Vec<(f64, f64)> = (0..37)
            .map(|i| {
                let x = i as f64 / 36.0;
                (x, (7.3 * x).sin() + 0.1 * i as f64)
            })
            .collect();
        let data = Dataset::from_pairs(&pairs).unwrap();
        for (space, theta) in [
            ("piecewise_constant(0.3,0.6)", vec![0.2, -0.4, 0.1]),
            ("basis(const,linear(0,1),sin(3))", vec![0.3, -0.2, 0.4]),
        ] {
            let f = Hypothesis::new(space.parse().unwrap(), theta, 1.0).unwrap();
            let want = brute(&data.residuals(&f), 0.7);
            let got = empirical_info_error(&f, &data, 0.7).unwrap();
            assert!((got - want).abs() < 1e-14, "{space}: {got} vs {want}");
        }
    }

    #[test]
    fn intercept_shift_is_bit_exact() {
        let pairs: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 / 49.0, (i as f64).sqrt())).collect();
        let data = Dataset::from_pairs(&pairs).unwrap();
        let space: SpaceKind = "basis(const,linear(0,1))".parse().unwrap();
        let a = Hypothesis::new(space.clone(), vec![0.1, 0.3], 1.0).unwrap();
        let b = Hypothesis::new(space, vec![-0.6, 0.3], 1.0).unwrap();
        assert_eq!(
            empirical_info_error(&a, &data, 0.4).unwrap().to_bits(),
            empirical_info_error(&b, &data, 0.4).unwrap().to_bits()
        );
        let g = grad_info_error(&a, &data, 0.4).unwrap();
        assert_eq!(g[0], 0.0);
        let c = constant_space();
        assert_eq!(grad_info_error(&c, &data, 0.4).unwrap(), vec![0.0]);
    }

    #[test]
    fn constant_adjustment_examples() {
        let f = constant_space();
        let d = Dataset::from_pairs(&[(0.0, 1.0), (0.0, 2.0), (0.0, 3.0)]).unwrap();
        assert_eq!(constant_adjustment(&f, &d), 2.0);
        let g = Hypothesis::piecewise(&[0.5], &[1.0, 0.0], 1.0).unwrap();
        let d = Dataset::from_pairs(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(constant_adjustment(&g, &d), 0.0);
    }

    #[test]
    fn linear_gradient_sign() {
        // f_θ(x) = θ x on {(-1, 1), (1, -1)}: residual gap 2 - 2θ shrinks as θ → -1
        let space: SpaceKind = "basis(linear(-1,1))".parse().unwrap();
        let f = Hypothesis::new(space, vec![0.0], 1.0).unwrap();
        let d = Dataset::from_pairs(&[(-1.0, 1.0), (1.0, -1.0)]).unwrap();
        let g = grad_info_error(&f, &d, 1.0).unwrap();
        assert!(g[0] > 0.0, "descent direction must lower θ: {g:?}");
    }
}
