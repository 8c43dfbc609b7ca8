//! Scale functions of `X` and `Y`, the refracted kernel `w^(q)` and the
//! composite kernels built from them.
//!
//! For the rational models (exponential and phase-type claims, Brownian) every
//! scale function is a finite sum of exponentials obtained by partial
//! fractions of `1/(ψ(λ) − q)`: `W^(q)(x) = Σⱼ e^{ρⱼx}/ψ′(ρⱼ)` over all roots
//! of `ψ(λ) = q`. The stable model uses the Mittag-Leffler closed form at
//! `q = 0` and quadrature for everything built on top of it.

use crate::error::{Error, Result};
use crate::model::{LevyModel, PhaseType, RefractedModel};
use crate::poly;
use crate::quad::{self, Tol};
use crate::special::{self, conv_exp, phi1};
use num_complex::Complex64;

/// Partial-fraction form `Σ aⱼ e^{ρⱼx}` of a scale function on `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct ExpSum {
    pub roots: Vec<Complex64>,
    pub coefs: Vec<Complex64>,
}

impl ExpSum {
    fn sum(&self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Complex64 {
        self.roots.iter().zip(&self.coefs).map(|(r, a)| f(*r, *a)).sum()
    }

    /// Value including the imaginary residue left by rounding.
    pub fn eval_c(&self, x: f64) -> Complex64 {
        if x < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.sum(|r, a| a * (r * x).exp())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_c(x).re
    }

    /// Derivative on `x > 0` (right derivative at 0).
    pub fn deriv(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.sum(|r, a| a * r * (r * x).exp()).re
    }

    /// `∫₀^x` of the function.
    pub fn integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.sum(|r, a| a * phi1(r * x) * x).re
    }
}

/// A scale function, either in partial-fraction form or the stable closed form.
#[derive(Debug, Clone)]
pub enum ScaleFn {
    Exp(ExpSum),
    /// 3/2-stable with drift `c`, `q = 0` only.
    Stable { c: f64 },
}

impl ScaleFn {
    pub fn w(&self, x: f64) -> f64 {
        match self {
            ScaleFn::Exp(e) => e.eval(x),
            ScaleFn::Stable { c } => special::stable_w(*c, x),
        }
    }

    /// Derivative on `(0, ∞)`; zero on the negative half-line.
    pub fn w_prime(&self, x: f64) -> f64 {
        match self {
            ScaleFn::Exp(e) => e.deriv(x),
            ScaleFn::Stable { c } => special::stable_w_prime(*c, x),
        }
    }

    /// `W(0+)`.
    pub fn w0(&self) -> f64 {
        match self {
            ScaleFn::Exp(e) => e.eval(0.0),
            ScaleFn::Stable { .. } => 0.0,
        }
    }

    fn integral(&self, x: f64) -> Result<f64> {
        match self {
            ScaleFn::Exp(e) => Ok(e.integral(x)),
            ScaleFn::Stable { c } => {
                let c = *c;
                quad::quad(|y| special::stable_w(c, y), 0.0, x.max(0.0), &[], Tol::default())
            }
        }
    }

    pub fn exp_sum(&self) -> Option<&ExpSum> {
        match self {
            ScaleFn::Exp(e) => Some(e),
            ScaleFn::Stable { .. } => None,
        }
    }
}

/// Real roots of `a λ² + b λ + c = 0` by the cancellation-free formula.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Result<[f64; 2]> {
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return Err(Error::numeric(format!(
            "scale-function roots coincide (discriminant {disc:e}); the partial-fraction form needs distinct roots"
        )));
    }
    let t = -0.5 * (b + b.signum() * disc.sqrt());
    let t = if b == 0.0 { 0.5 * disc.sqrt() } else { t };
    Ok([t / a, c / t])
}

/// Roots of `ψ(λ) = q` together with the residues `1/ψ′(ρ)`.
pub(crate) fn partial_fractions(model: &LevyModel, q: f64) -> Result<ExpSum> {
    let roots: Vec<Complex64> = match model {
        LevyModel::CramerLundbergExp { c, eta, alpha } => {
            // (cλ − q)(λ + α) − ηλ = 0
            quadratic_roots(*c, c * alpha - q - eta, -q * alpha)?.map(Complex64::from).to_vec()
        }
        LevyModel::BrownianRisk { c, sigma } => {
            quadratic_roots(0.5 * sigma * sigma, *c, -q)?.map(Complex64::from).to_vec()
        }
        LevyModel::JumpDiffusionPhaseType { c, sigma, eta, .. } => {
            let ph = PhaseType::from_model(model).expect("phase-type variant");
            phase_type_roots(model, &ph, *c, *sigma, *eta, q)?
        }
        LevyModel::StableThreeHalves { .. } => {
            return Err(Error::unsupported("stable scale functions have no partial-fraction form"))
        }
    };
    let mut coefs = Vec::with_capacity(roots.len());
    for r in &roots {
        let d = model.psi_prime_c(*r);
        if !(d.norm() >= 1e-10) {
            return Err(Error::numeric(format!(
                "near-multiple root of psi(lambda) = {q} at {r}: |psi'| = {:e}",
                d.norm()
            )));
        }
        coefs.push(1.0 / d);
    }
    for i in 0..roots.len() {
        for j in 0..i {
            if (roots[i] - roots[j]).norm() < 1e-8 {
                return Err(Error::numeric(format!(
                    "roots {} and {} of psi(lambda) = {q} are not distinct",
                    roots[i], roots[j]
                )));
            }
        }
    }
    Ok(ExpSum { roots, coefs })
}

fn phase_type_roots(
    model: &LevyModel,
    ph: &PhaseType,
    c: f64,
    sigma: f64,
    eta: f64,
    q: f64,
) -> Result<Vec<Complex64>> {
    // ψ(λ) − q = P(λ)/D(λ) with D = det(λI − T) and
    // P = (σ²λ²/2 + cλ − η − q)·D + η·𝛂 adj(λI − T) 𝐭.
    let m = ph.order();
    let (det, adj) = poly::faddeev_leverrier(&ph.t);
    let mut num = vec![0.0; m];
    for (k, mk) in adj.iter().enumerate() {
        // coefficient of λ^{m−1−k}
        num[m - 1 - k] = ph.alpha.dot(&(mk * &ph.exit));
    }
    let quad_part = [-eta - q, c, 0.5 * sigma * sigma];
    let p = poly::add(&poly::mul(&quad_part, &det), &poly::scale(&num, eta));
    let raw = poly::roots(&p)?;
    let det_scale = det.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut out = Vec::new();
    for z0 in raw {
        // Common zeros of P and D cancel in the rational function.
        let (dv, _) = poly::eval_c(&det, z0);
        if dv.norm() <= 1e-10 * det_scale.max(1.0) * (1.0 + z0.norm()).powi(m as i32) {
            continue;
        }
        let mut z = z0;
        for _ in 0..30 {
            let f = model.psi_c(z) - q;
            let d = model.psi_prime_c(z);
            let step = f / d;
            if !(step.re.is_finite() && step.im.is_finite()) {
                z = z0;
                break;
            }
            z -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1e-300) {
                break;
            }
        }
        if z.im.abs() <= 1e-13 * z.norm() {
            z.im = 0.0;
        }
        if z.norm() < 1e-13 {
            z = Complex64::new(0.0, 0.0);
        }
        out.push(z);
    }
    let expected = if sigma > 0.0 { m + 2 } else { m + 1 };
    if out.len() > expected || out.is_empty() {
        return Err(Error::numeric(format!(
            "found {} roots of psi(lambda) = {q}, expected at most {expected}",
            out.len()
        )));
    }
    // Snap the positive root onto the right-inverse for full accuracy.
    let phi = model.phi_inverse(q)?;
    if let Some(best) = out
        .iter_mut()
        .filter(|z| z.im == 0.0)
        .min_by(|a, b| (a.re - phi).abs().total_cmp(&(b.re - phi).abs()))
    {
        if (best.re - phi).abs() <= 1e-8 * phi.max(1.0) {
            *best = Complex64::from(phi);
        }
    }
    Ok(out)
}

fn scale_fn(model: &LevyModel, q: f64) -> Result<ScaleFn> {
    match model {
        LevyModel::StableThreeHalves { c } => {
            if q != 0.0 {
                Err(Error::unsupported(format!(
                    "stable scale functions are only available at q = 0 (got q = {q})"
                )))
            } else {
                Ok(ScaleFn::Stable { c: *c })
            }
        }
        _ => partial_fractions(model, q).map(ScaleFn::Exp),
    }
}

/// Scale functions of `X` and `Y` at a fixed discount rate `q`.
#[derive(Debug, Clone)]
pub struct ScaleContext {
    model: RefractedModel,
    q: f64,
    x_fn: ScaleFn,
    y_fn: ScaleFn,
    phi_q: f64,
    varphi_q: f64,
}

impl ScaleContext {
    pub fn new(model: &RefractedModel, q: f64) -> Result<Self> {
        model.validate()?;
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::validation(format!("q must be finite and >= 0, got {q}")));
        }
        let x_fn = scale_fn(&model.x_model, q)?;
        let y_model = model.y_model();
        let y_fn = if model.delta == 0.0 { x_fn.clone() } else { scale_fn(&y_model, q)? };
        Ok(ScaleContext {
            phi_q: model.x_model.phi_inverse(q)?,
            varphi_q: y_model.phi_inverse(q)?,
            model: model.clone(),
            q,
            x_fn,
            y_fn,
        })
    }

    pub fn model(&self) -> &RefractedModel {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn delta(&self) -> f64 {
        self.model.delta
    }

    /// `Φ(q)`.
    pub fn phi_q(&self) -> f64 {
        self.phi_q
    }

    /// `φ(q)`.
    pub fn varphi_q(&self) -> f64 {
        self.varphi_q
    }

    pub fn x_fn(&self) -> &ScaleFn {
        &self.x_fn
    }

    pub fn y_fn(&self) -> &ScaleFn {
        &self.y_fn
    }

    /// `W^(q)(x)`.
    pub fn scale_w(&self, x: f64) -> f64 {
        self.x_fn.w(x)
    }

    /// `W^(q)′(x)` on `x > 0`.
    pub fn scale_w_prime(&self, x: f64) -> f64 {
        self.x_fn.w_prime(x)
    }

    /// `Z^(q)(x) = 1 + q∫₀^x W^(q)`.
    pub fn scale_z(&self, x: f64) -> Result<f64> {
        if self.q == 0.0 || x <= 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 + self.q * self.x_fn.integral(x)?)
    }

    /// `𝕎^(q)(x)`.
    pub fn scale_w_y(&self, x: f64) -> f64 {
        self.y_fn.w(x)
    }

    pub fn scale_w_y_prime(&self, x: f64) -> f64 {
        self.y_fn.w_prime(x)
    }

    /// `ℤ^(q)(x)`.
    pub fn scale_z_y(&self, x: f64) -> Result<f64> {
        if self.q == 0.0 || x <= 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 + self.q * self.y_fn.integral(x)?)
    }

    /// Refracted kernel `w^(q)(x; z) = W(x−z) + δ1{x≥0}∫₀^x 𝕎(x−y)W′(y−z)dy`.
    pub fn refracted_w(&self, x: f64, z: f64) -> Result<f64> {
        if x < 0.0 || self.delta() == 0.0 {
            return Ok(self.scale_w(x - z));
        }
        if z <= 0.0 {
            return self.refracted_profile(x).eval(-z);
        }
        // z > 0: W′(y − z) vanishes for y < z.
        let integral = quad::quad(
            |y| self.scale_w_y(x - y) * self.scale_w_prime(y - z),
            z.min(x),
            x,
            &[],
            Tol::default(),
        )?;
        Ok(self.scale_w(x - z) + self.delta() * integral)
    }

    /// Same kernel by direct quadrature of the convolution, for any model.
    pub fn refracted_w_quad(&self, x: f64, z: f64) -> Result<f64> {
        if x < 0.0 || self.delta() == 0.0 {
            return Ok(self.scale_w(x - z));
        }
        let lo = z.max(0.0).min(x);
        let integral = quad::quad(
            |y| self.scale_w_y(x - y) * self.scale_w_prime(y - z),
            lo,
            x,
            &[],
            Tol::default(),
        )?;
        Ok(self.scale_w(x - z) + self.delta() * integral)
    }

    /// The map `z ↦ w^(q)(x; −z)` on `z ≥ 0` for a fixed `x`.
    pub fn refracted_profile(&self, x: f64) -> Profile<'_> {
        if x < 0.0 || self.delta() == 0.0 {
            return Profile::Shifted { ctx: self, x };
        }
        match (&self.x_fn, &self.y_fn) {
            (ScaleFn::Exp(xs), ScaleFn::Exp(ys)) => {
                // w(x;−z) = Σⱼ e^{ρⱼz}[Aⱼe^{ρⱼx} + δρⱼAⱼ Σᵢ Bᵢ ∫₀^x e^{ζᵢ(x−y)}e^{ρⱼy}dy]
                let d = self.delta();
                let terms = xs
                    .roots
                    .iter()
                    .zip(&xs.coefs)
                    .map(|(rho, a)| {
                        let mut conv = Complex64::new(0.0, 0.0);
                        if *rho != Complex64::new(0.0, 0.0) {
                            for (zeta, b) in ys.roots.iter().zip(&ys.coefs) {
                                conv += b * conv_exp(*zeta, *rho, x, x);
                            }
                        }
                        (*rho, a * (rho * x).exp() + conv * rho * a * d)
                    })
                    .collect();
                Profile::Exp(terms)
            }
            _ => Profile::Quad { ctx: self, x },
        }
    }
}

/// `z ↦ w^(q)(x; −z)` for a fixed `x`, evaluated cheaply in the rational models.
pub enum Profile<'a> {
    /// `Σ cⱼ e^{ρⱼz}`.
    Exp(Vec<(Complex64, Complex64)>),
    /// `W^(q)(x + z)`, used for `x < 0` or `δ = 0`.
    Shifted { ctx: &'a ScaleContext, x: f64 },
    /// Quadrature of the defining convolution.
    Quad { ctx: &'a ScaleContext, x: f64 },
}

impl Profile<'_> {
    pub fn eval(&self, z: f64) -> Result<f64> {
        match self {
            Profile::Exp(terms) => {
                Ok(terms.iter().map(|(r, c)| c * (r * z).exp()).sum::<Complex64>().re)
            }
            Profile::Shifted { ctx, x } => Ok(ctx.scale_w(x + z)),
            Profile::Quad { ctx, x } => ctx.refracted_w_quad(*x, -z),
        }
    }

    /// Point where the profile is not smooth (`z = −x` for `x < 0`).
    pub fn kink(&self) -> Option<f64> {
        match self {
            Profile::Shifted { x, .. } if *x < 0.0 => Some(-x),
            _ => None,
        }
    }
}

/// Which algebraic form of a kernel to evaluate by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// Integral over `[a, x]`.
    First,
    /// Integral over `[0, a]`.
    Second,
}

/// Composite kernels `𝒲_a^(p,q)`, `ℋ^(p,q)`, `𝒲_{a,δ}^(p,q)` and `ℋ_δ^(p,q)`,
/// which need scale functions at both `p` and `p + q`.
#[derive(Debug, Clone)]
pub struct Kernels {
    p: f64,
    q: f64,
    at_p: ScaleContext,
    at_pq: ScaleContext,
}

impl Kernels {
    pub fn new(model: &RefractedModel, p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite() && p >= 0.0 && p + q >= 0.0) {
            return Err(Error::validation(format!("kernels need p >= 0 and p + q >= 0 (p = {p}, q = {q})")));
        }
        let at_p = ScaleContext::new(model, p)?;
        let at_pq = if q == 0.0 { at_p.clone() } else { ScaleContext::new(model, p + q)? };
        Ok(Kernels { p, q, at_p, at_pq })
    }

    /// Reuses existing contexts at `p` and `p + q`.
    pub fn from_contexts(at_p: ScaleContext, at_pq: ScaleContext) -> Self {
        Kernels { p: at_p.q(), q: at_pq.q() - at_p.q(), at_p, at_pq }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn at_p(&self) -> &ScaleContext {
        &self.at_p
    }

    pub fn at_pq(&self) -> &ScaleContext {
        &self.at_pq
    }

    fn delta(&self) -> f64 {
        self.at_p.delta()
    }

    /// `𝒲_a^(p,q)(x) = W^(p+q)(x) − q∫₀^a W^(p+q)(x−y)W^(p)(y)dy`.
    pub fn kernel_w(&self, a: f64, x: f64) -> Result<f64> {
        if self.q == 0.0 {
            return Ok(self.at_p.scale_w(x));
        }
        let b = a.min(x).max(0.0);
        match (self.at_pq.x_fn(), self.at_p.x_fn()) {
            (ScaleFn::Exp(s), ScaleFn::Exp(pp)) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (rj, aj) in s.roots.iter().zip(&s.coefs) {
                    for (ri, ai) in pp.roots.iter().zip(&pp.coefs) {
                        acc += aj * ai * conv_exp(*rj, *ri, x, b);
                    }
                }
                Ok(self.at_pq.scale_w(x) - self.q * acc.re)
            }
            _ => self.kernel_w_quad(a, x, Form::Second),
        }
    }

    pub fn kernel_w_quad(&self, a: f64, x: f64, form: Form) -> Result<f64> {
        let (s, p, q) = (&self.at_pq, &self.at_p, self.q);
        let f = |y: f64| s.scale_w(x - y) * p.scale_w(y);
        match form {
            Form::First => {
                // Integrand vanishes outside [0, x].
                let (lo, hi) = (a.max(0.0).min(x.max(0.0)), x.max(0.0));
                Ok(p.scale_w(x) + q * quad::quad(f, lo, hi, &[], Tol::default())?)
            }
            Form::Second => {
                let b = a.min(x).max(0.0);
                Ok(s.scale_w(x) - q * quad::quad(f, 0.0, b, &[], Tol::default())?)
            }
        }
    }

    /// `ℋ^(p,q)(x) = e^{Φ(p)x}(1 + q∫₀^x e^{−Φ(p)y}W^(p+q)(y)dy)`.
    pub fn kernel_h(&self, x: f64) -> Result<f64> {
        let phi = self.at_p.phi_q();
        self.h_generic(phi, self.q, x)
    }

    pub fn kernel_h_quad(&self, x: f64) -> Result<f64> {
        let phi = self.at_p.phi_q();
        self.h_quad(phi, self.q, x)
    }

    /// `ℋ_δ^(p,q)(x) = e^{φ(p)x}(1 + (q − δφ(p))∫₀^x e^{−φ(p)y}W^(p+q)(y)dy)`.
    pub fn kernel_h_delta(&self, x: f64) -> Result<f64> {
        let vphi = self.at_p.varphi_q();
        self.h_generic(vphi, self.q - self.delta() * vphi, x)
    }

    pub fn kernel_h_delta_quad(&self, x: f64) -> Result<f64> {
        let vphi = self.at_p.varphi_q();
        self.h_quad(vphi, self.q - self.delta() * vphi, x)
    }

    fn h_generic(&self, rate: f64, coef: f64, x: f64) -> Result<f64> {
        if x <= 0.0 || coef == 0.0 {
            return Ok((rate * x).exp());
        }
        match self.at_pq.x_fn() {
            ScaleFn::Exp(s) => {
                let u = Complex64::from(rate);
                let acc: Complex64 =
                    s.roots.iter().zip(&s.coefs).map(|(r, a)| a * conv_exp(u, *r, x, x)).sum();
                Ok((rate * x).exp() + coef * acc.re)
            }
            ScaleFn::Stable { .. } => self.h_quad(rate, coef, x),
        }
    }

    fn h_quad(&self, rate: f64, coef: f64, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok((rate * x).exp());
        }
        let s = &self.at_pq;
        let i = quad::quad(|y| (rate * (x - y)).exp() * s.scale_w(y), 0.0, x, &[], Tol::default())?;
        Ok((rate * x).exp() + coef * i)
    }

    /// `𝒲_{a,δ}^(p,q)(x) = W^(p+q)(x) − ∫₀^a (qW^(p+q) − δW^(p+q)′)(x−y) 𝕎^(p)(y) dy`.
    /// A barrier `a ≤ 0` gives an empty integral.
    pub fn kernel_w_delta(&self, a: f64, x: f64) -> Result<f64> {
        let d = self.delta();
        if d == 0.0 {
            return self.kernel_w(a, x);
        }
        let b = a.min(x).max(0.0);
        match (self.at_pq.x_fn(), self.at_p.y_fn()) {
            (ScaleFn::Exp(s), ScaleFn::Exp(yy)) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (rj, aj) in s.roots.iter().zip(&s.coefs) {
                    let w = aj * (rj * (-d) + self.q);
                    for (zi, bi) in yy.roots.iter().zip(&yy.coefs) {
                        acc += w * bi * conv_exp(*rj, *zi, x, b);
                    }
                }
                Ok(self.at_pq.scale_w(x) - acc.re)
            }
            _ => self.kernel_w_delta_quad(a, x, Form::Second),
        }
    }

    pub fn kernel_w_delta_quad(&self, a: f64, x: f64, form: Form) -> Result<f64> {
        let (s, p, q, d) = (&self.at_pq, &self.at_p, self.q, self.delta());
        let f = |y: f64| (q * s.scale_w(x - y) - d * s.scale_w_prime(x - y)) * p.scale_w_y(y);
        match form {
            Form::First => {
                let (lo, hi) = (a.max(0.0).min(x.max(0.0)), x.max(0.0));
                let i = quad::quad(f, lo, hi, &[], Tol::default())?;
                Ok(p.scale_w_y(x) * (1.0 - d * s.x_fn().w0()) + i)
            }
            Form::Second => {
                let b = a.min(x).max(0.0);
                Ok(s.scale_w(x) - quad::quad(f, 0.0, b, &[], Tol::default())?)
            }
        }
    }
}

/// Residual of the convolution identity
/// `(q−p)∫₀^x 𝕎^(p)(x−y)W^(q)(y)dy = W^(q)(x) − 𝕎^(p)(x) + δ(W^(q)(0)𝕎^(p)(x) + ∫₀^x 𝕎^(p)(x−y)W^(q)′(y)dy)`,
/// with both integrals by quadrature, scaled by `max(1, |W^(q)(x)|)`.
pub fn convolution_identity_residual(at_p: &ScaleContext, at_q: &ScaleContext, x: f64) -> Result<f64> {
    let (p, q, d) = (at_p.q(), at_q.q(), at_p.delta());
    let lhs = (q - p)
        * quad::quad(|y| at_p.scale_w_y(x - y) * at_q.scale_w(y), 0.0, x, &[], Tol::default())?;
    let conv = quad::quad(|y| at_p.scale_w_y(x - y) * at_q.scale_w_prime(y), 0.0, x, &[], Tol::default())?;
    let rhs = at_q.scale_w(x) - at_p.scale_w_y(x) + d * (at_q.x_fn().w0() * at_p.scale_w_y(x) + conv);
    Ok((lhs - rhs).abs() / at_q.scale_w(x).abs().max(1.0))
}

/// Residual of the `δ = 0` special case
/// `(q−p)∫₀^x W^(p)(x−y)W^(q)(y)dy = W^(q)(x) − W^(p)(x)`.
pub fn symmetry_identity_residual(at_p: &ScaleContext, at_q: &ScaleContext, x: f64) -> Result<f64> {
    let (p, q) = (at_p.q(), at_q.q());
    let lhs =
        (q - p) * quad::quad(|y| at_p.scale_w(x - y) * at_q.scale_w(y), 0.0, x, &[], Tol::default())?;
    let rhs = at_q.scale_w(x) - at_p.scale_w(x);
    Ok((lhs - rhs).abs() / at_q.scale_w(x).abs().max(1.0))
}
