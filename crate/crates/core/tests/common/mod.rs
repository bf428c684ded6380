//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Adaptive Simpson on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
}

/// Modified Bessel `K_0(r) = \int_0^\infty e^{-r cosh t} dt`, `r > 0`.
pub fn bessel_k0(r: f64) -> f64 {
    let upper = (2.0 * (40.0 / r).max(1.0)).ln() + 2.0;
    simpson(&|t: f64| (-r * t.cosh()).exp(), 0.0, upper, 1e-13)
}

/// `K_0(r)` by its small-argument series, for cross-checking `bessel_k0`.
pub fn bessel_k0_series(r: f64) -> f64 {
    let euler = 0.577_215_664_901_532_9;
    let q = r * r / 4.0;
    let (mut term, mut harmonic, mut i0, mut sum) = (1.0, 0.0, 0.0, 0.0);
    for k in 0..60 {
        if k > 0 {
            term *= q / (k as f64 * k as f64);
            harmonic += 1.0 / k as f64;
        }
        i0 += term;
        sum += term * harmonic;
    }
    -((r / 2.0).ln() + euler) * i0 + sum
}

/// Real-space value of the d = 1 mollified kernel: the heat kernel of
/// variance `epsilon` convolved with `(1/pi) K_0(m |y|)`.
pub fn mollified_bessel_1d(x: f64, epsilon: f64, m: f64) -> f64 {
    let heat = |u: f64| (-u * u / (2.0 * epsilon)).exp() / (2.0 * PI * epsilon).sqrt();
    let g = |y: f64| heat(x - y) * bessel_k0(m * y.abs()) / PI;
    let w = 12.0 * epsilon.sqrt();
    let (lo, hi) = (x - w, x + w);
    if lo < 0.0 && hi > 0.0 {
        // The log singularity at 0 is removed by the substitution y = +-s^2.
        let right = simpson(&|s: f64| if s == 0.0 { 0.0 } else { 2.0 * s * g(s * s) }, 0.0, hi.sqrt(), 1e-12);
        let left = simpson(&|s: f64| if s == 0.0 { 0.0 } else { 2.0 * s * g(-s * s) }, 0.0, (-lo).sqrt(), 1e-12);
        left + right
    } else {
        simpson(&g, lo, hi, 1e-12)
    }
}
