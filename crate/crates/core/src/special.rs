//! Special functions not covered by `statrs`.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Sine and cosine integrals `(Si(x), Ci(x))` for `x > 0`.
///
/// Power series below 2, continued fraction for `E1(ix)` above.
pub fn sici(x: f64) -> (f64, f64) {
    assert!(x > 0.0, "sici needs x > 0, got {x}");
    if x > 2.0 {
        let mut b = Complex64::new(1.0, x);
        let mut c = Complex64::new(1.0 / 1e-300, 0.0);
        let mut d = Complex64::new(1.0, 0.0) / b;
        let mut h = d;
        for i in 2..200 {
            let a = -((i - 1) as f64).powi(2);
            b += 2.0;
            d = Complex64::new(1.0, 0.0) / (d * a + b);
            c = b + Complex64::new(a, 0.0) / c;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
                break;
            }
        }
        h *= Complex64::new(x.cos(), -x.sin());
        (FRAC_PI_2 + h.im, -h.re)
    } else {
        let mut si = 0.0;
        let mut ci = 0.0;
        let mut term = x;
        // term holds (-1)^k x^(2k+1) / (2k+1)!
        for k in 0..40 {
            let odd = (2 * k + 1) as f64;
            si += term / odd;
            let t_even = -term * x / (odd + 1.0);
            ci += t_even / (odd + 1.0);
            term = t_even * x / (odd + 2.0);
            if term.abs() < 1e-18 * si.abs().max(1e-300) {
                break;
            }
        }
        (si, EULER_GAMMA + x.ln() + ci)
    }
}

/// `Si(x)`, odd in `x`.
pub fn sine_integral(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < 0.0 {
        -sici(-x).0
    } else {
        sici(x).0
    }
}

/// `∫_r^∞ cos(k ξ) / ξ² dξ` for `r > 0`.
pub fn cos_over_square_tail(k: f64, r: f64) -> f64 {
    let k = k.abs();
    if k == 0.0 {
        return 1.0 / r;
    }
    (k * r).cos() / r - k * (FRAC_PI_2 - sine_integral(k * r))
}
