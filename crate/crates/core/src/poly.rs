//! Dense real polynomials (ascending coefficients) and their complex roots.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Value and derivative at a complex point (Horner).
pub fn eval_c(p: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for c in p.iter().rev() {
        d = d * z + v;
        v = v * z + c;
    }
    (v, d)
}

fn trim(p: &[f64]) -> &[f64] {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut n = p.len();
    while n > 0 && p[n - 1].abs() <= 1e-300_f64.max(scale * 1e-300) {
        n -= 1;
    }
    &p[..n]
}

/// All complex roots, from the eigenvalues of the companion matrix followed
/// by a few Newton steps on the polynomial itself.
pub fn roots(p: &[f64]) -> Result<Vec<Complex64>> {
    let p = trim(p);
    if p.len() < 2 {
        return Ok(Vec::new());
    }
    let n = p.len() - 1;
    let lead = p[n];
    let comp = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -p[n - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = comp.complex_eigenvalues();
    let mut out = Vec::with_capacity(n);
    for z0 in eig.iter() {
        if !(z0.re.is_finite() && z0.im.is_finite()) {
            return Err(Error::numeric("companion eigenvalue solver returned non-finite roots"));
        }
        let mut z = *z0;
        for _ in 0..8 {
            let (v, d) = eval_c(p, z);
            if d.norm() == 0.0 {
                break;
            }
            let step = v / d;
            if !(step.re.is_finite() && step.im.is_finite()) {
                break;
            }
            z -= step;
            if step.norm() <= 1e-16 * z.norm().max(1e-300) {
                break;
            }
        }
        out.push(z);
    }
    Ok(out)
}

/// Faddeev–LeVerrier: characteristic polynomial `det(λI − A)` (ascending,
/// monic) and the matrices `M₁..Mₙ` with `adj(λI − A) = Σ Mₖ λ^{n−k}`.
pub fn faddeev_leverrier(a: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let n = a.nrows();
    let mut coef = vec![0.0; n + 1];
    coef[n] = 1.0;
    let mut ms = Vec::with_capacity(n);
    let mut m_prev = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        let m_k = a * &m_prev + DMatrix::<f64>::identity(n, n) * coef[n + 1 - k];
        coef[n - k] = -(a * &m_k).trace() / k as f64;
        ms.push(m_k.clone());
        m_prev = m_k;
    }
    (coef, ms)
}
