//! Globally adaptive Gauss–Kronrod quadrature (10-point Gauss embedded in a
//! 21-point Kronrod rule) on finite intervals, for real and complex integrands.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

/// Values that can be integrated: a vector space over `f64` with a norm.
pub trait Integrand:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn norm(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    /// Maximum number of subintervals.
    pub limit: usize,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { abs: 1e-14, rel: 1e-12, limit: 400 }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tol { abs, rel, ..Tol::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7, 9).
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<T: Integrand, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    let mut abs_k = fc.norm() * WGK[10];
    let mut fv = [T::zero(); 21];
    fv[10] = fc;
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv[j] = f1;
        fv[20 - j] = f2;
        kron = kron + (f1 + f2) * WGK[j];
        abs_k += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kron * 0.5;
    let mut asc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        asc += WGK[j] * ((fv[j] - mean).norm() + (fv[20 - j] - mean).norm());
    }
    let value = kron * h;
    asc *= h.abs();
    abs_k *= h.abs();
    let mut err = ((kron - gauss) * h).norm();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_k);
    }
    (value, err)
}

/// Integrates `f` over `[a, b]`, splitting first at any `breaks` inside the
/// interval. Fails when the error target is not reached within `tol.limit`
/// subintervals or when the integrand produces non-finite values.
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: Tol) -> Result<Quad<T>>
where
    T: Integrand,
    F: FnMut(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::numeric(format!("quadrature bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Quad { value: T::zero(), error: 0.0, intervals: 0 });
    }
    if a > b {
        let q = integrate(f, b, a, breaks, tol)?;
        return Ok(Quad { value: q.value * -1.0, ..q });
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut edges = Vec::with_capacity(pts.len() + 2);
    edges.push(a);
    edges.extend(pts);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut err_sum = 0.0;
    for w in edges.windows(2) {
        let (v, e) = gk21(&mut f, w[0], w[1]);
        total = total + v;
        err_sum += e;
        heap.push(Piece { a: w[0], b: w[1], value: v, error: e });
    }
    loop {
        if !total.norm().is_finite() || !err_sum.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite integrand on [{a}, {b}] after {} subintervals",
                heap.len()
            )));
        }
        let target = tol.abs.max(tol.rel * total.norm());
        if err_sum <= target {
            return Ok(Quad { value: total, error: err_sum, intervals: heap.len() });
        }
        if heap.len() >= tol.limit {
            return Err(Error::numeric(format!(
                "quadrature on [{a}, {b}] did not converge: error estimate {err_sum:.3e} \
                 above target {target:.3e} after {} subintervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap holds at least one piece");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split; accept what we have.
            heap.push(Piece { error: 0.0, ..worst });
            err_sum -= worst.error;
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        err_sum += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
        if heap.len() % 32 == 0 {
            // Resum to shed accumulated rounding in the running totals.
            total = heap.iter().fold(T::zero(), |s, p| s + p.value);
            err_sum = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Real-valued convenience wrapper returning only the value.
pub fn quad<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tol) -> Result<f64> {
    integrate(f, a, b, breaks, tol).map(|q| q.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = quad(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, &[], Tol::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn kink_at_break_converges() {
        let v = quad(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], Tol::default()).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn jump_without_break_still_converges() {
        let v = quad(|x| if x < 0.37 { 1.0 } else { 2.0 }, 0.0, 1.0, &[], Tol::new(1e-10, 1e-10))
            .unwrap();
        assert!((v - (0.37 + 2.0 * 0.63)).abs() < 1e-9);
    }

    #[test]
    fn complex_oscillatory() {
        let w = Complex64::new(-0.5, 3.0);
        let q = integrate(|x| (w * x).exp(), 0.0, 4.0, &[], Tol::default()).unwrap();
        let exact = ((w * 4.0).exp() - 1.0) / w;
        assert!((q.value - exact).norm() < 1e-13);
    }

    #[test]
    fn integrable_singularity() {
        let v = quad(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &[], Tol::new(1e-10, 1e-10)).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = quad(|x| x, 1.0, 0.0, &[], Tol::default()).unwrap();
        assert!((v + 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(quad(|_| f64::NAN, 0.0, 1.0, &[], Tol::default()).is_err());
    }
}
