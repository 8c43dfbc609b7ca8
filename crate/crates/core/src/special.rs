//! Special functions used by the closed forms.
//!
//! `erfc` itself comes from `libm`; the scaled variant is built on top of it
//! with an exact split of `x²` so that the product `exp(x²)·erfc(x)` keeps full
//! relative precision until `erfc` underflows.

use num_complex::Complex64;
use std::f64::consts::PI;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// `exp(x²)` as a pair of factors whose product is accurate even though `x*x`
/// is rounded.
fn exp_square(x: f64) -> f64 {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    hi.exp() * lo.exp()
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 * exp_square(x) - erfcx(-x);
    }
    if x < 26.0 {
        return libm::erfc(x) * exp_square(x);
    }
    // Asymptotic series; at x ≥ 26 six terms are far below one ulp.
    let v = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..8 {
        term *= -((2 * n - 1) as f64) * v;
        sum += term;
    }
    sum * FRAC_1_SQRT_PI / x
}

/// Mittag-Leffler function of order 1/2, `E_{1/2}(z) = exp(z²)·erfc(−z)`.
pub fn mittag_leffler_half(z: f64) -> f64 {
    erfcx(-z)
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Lower incomplete gamma `∫₀^x e^{−t} t^{a−1} dt` (unregularized).
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(a, x) * statrs::function::gamma::gamma(a)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn lower_gamma_regularized(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(a, x)
}

/// `(e^{w} − 1)/w` for complex `w`, continuous through `w = 0`.
pub fn phi1(w: Complex64) -> Complex64 {
    if w.norm() < 1e-5 {
        return Complex64::new(1.0, 0.0) + w / 2.0 + w * w / 6.0;
    }
    expm1_c(w) / w
}

/// `e^{w} − 1` without cancellation for small `w`.
pub fn expm1_c(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let half = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * half * half, a.exp() * b.sin())
}

/// `∫₀^b e^{u(x−y)} e^{v y} dy`, stable when `u ≈ v` and when either
/// exponential is individually extreme.
pub fn conv_exp(u: Complex64, v: Complex64, x: f64, b: f64) -> Complex64 {
    if b <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let d = v - u;
    if (d * b).norm() < 1.0 {
        (u * x).exp() * phi1(d * b) * b
    } else {
        ((u * (x - b) + v * b).exp() - (u * x).exp()) / d
    }
}

/// Scale function of a 3/2-stable process with drift `c` at level `x ≥ 0`:
/// `(1 − E_{1/2}(−c√x))/c`, with the `c → 0` limit `2√(x/π)`.
pub fn stable_w(c: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = x.sqrt();
    let t = c * s;
    if t.abs() < 0.5 {
        // √x Σ_{n≥1} (−t)^{n−1}/Γ(n/2+1), using Γ(n/2+1) = (n/2)·Γ(n/2).
        // g[n % 2] holds Γ((n−2)/2+1); seeded with Γ(1) and Γ(1/2).
        let mut g = [1.0, PI.sqrt()];
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 1..60usize {
            let gamma = 0.5 * n as f64 * g[n % 2];
            g[n % 2] = gamma;
            let term = pow / gamma;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            pow *= -t;
        }
        return s * sum;
    }
    (1.0 - erfcx(t)) / c
}

/// Derivative of [`stable_w`] on `x > 0`: `1/√(πx) − c·E_{1/2}(−c√x)`.
pub fn stable_w_prime(c: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let t = c * x.sqrt();
    if t >= 26.0 {
        // 1 − S(t) where erfcx(t) = S(t)/(t√π).
        let v = 1.0 / (2.0 * t * t);
        let mut term = 1.0;
        let mut rest = 0.0;
        for n in 1..8 {
            term *= -((2 * n - 1) as f64) * v;
            rest -= term;
        }
        return rest * FRAC_1_SQRT_PI / x.sqrt();
    }
    FRAC_1_SQRT_PI / x.sqrt() - c * erfcx(t)
}
