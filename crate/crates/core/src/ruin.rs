//! Classical and Parisian ruin quantities for the refracted process `U`.
//!
//! Every integral against `(z/r)P(X_r ∈ dz)` goes through
//! [`PositiveLaw::weighted_integral`]; the integrands come from the scale
//! function closed forms in [`crate::scale`].

use crate::error::{Error, Result};
use crate::lawx::PositiveLaw;
use crate::model::{LevyModel, RefractedModel};
use crate::quad::{self, Tol};
use crate::scale::{Kernels, ScaleContext, ScaleFn};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;

/// Barrier used to check the unbounded-barrier constant against the limit
/// of the barrier formula.
const LIMIT_BARRIER: f64 = 200.0;
const LIMIT_WARN: f64 = 1e-6;
/// Overshoot of `[0, 1]` attributed to rounding rather than a real failure.
const RANGE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    Hybrid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RuinResult {
    pub value: f64,
    pub method: Method,
    /// Internal cross-checks, keyed by name.
    pub diagnostics: BTreeMap<String, f64>,
}

impl RuinResult {
    fn exact(value: f64) -> Self {
        RuinResult { value, method: Method::ClosedForm, diagnostics: BTreeMap::new() }
    }

    fn hybrid(value: f64) -> Self {
        RuinResult { value, method: Method::Hybrid, diagnostics: BTreeMap::new() }
    }

    fn note(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.to_string(), v);
        self
    }
}

/// Inputs for the Parisian quantities. `q` defaults to 0 and the barrier to
/// none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParisianQuery {
    pub rm: RefractedModel,
    pub x: f64,
    pub r: f64,
    pub q: f64,
    pub a: Option<f64>,
}

impl ParisianQuery {
    pub fn new(rm: RefractedModel, x: f64, r: f64) -> Result<Self> {
        rm.validate()?;
        if !x.is_finite() {
            return Err(Error::validation(format!("x must be finite, got {x}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::validation(format!("delay r must be finite and > 0, got {r}")));
        }
        Ok(ParisianQuery { rm, x, r, q: 0.0, a: None })
    }

    pub fn with_discount(mut self, q: f64) -> Result<Self> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::validation(format!("q must be finite and >= 0, got {q}")));
        }
        self.q = q;
        Ok(self)
    }

    pub fn with_barrier(mut self, a: f64) -> Result<Self> {
        if !a.is_finite() || a < self.x.max(0.0) {
            return Err(Error::validation(format!(
                "barrier a must satisfy a >= max(x, 0) (a = {a}, x = {})",
                self.x
            )));
        }
        self.a = Some(a);
        Ok(self)
    }

    fn barrier(&self) -> Result<f64> {
        self.a.ok_or_else(|| Error::validation("this quantity needs an upper barrier a"))
    }
}

fn clamp_unit(v: f64, what: &str) -> Result<f64> {
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
        return Err(Error::numeric(format!("{what} = {v} lies outside [0, 1]")));
    }
    Ok(v.clamp(0.0, 1.0))
}

fn unrefracted(model: &LevyModel) -> Result<RefractedModel> {
    RefractedModel::new(model.clone(), 0.0)
}

/// `P_x(τ₀⁻ < ∞) = 1 − (E[X₁])₊ W(x)`.
pub fn classical_ruin_x(model: &LevyModel, x: f64) -> Result<f64> {
    let mean = model.mean_at_one();
    if mean <= 0.0 {
        return Ok(1.0);
    }
    let ctx = ScaleContext::new(&unrefracted(model)?, 0.0)?;
    clamp_unit(1.0 - mean * ctx.scale_w(x), "classical ruin probability")
}

/// `P_x(ν₀⁻ < ∞) = 1 − (E[X₁] − δ)₊ 𝕎(x)`.
pub fn classical_ruin_y(rm: &RefractedModel, x: f64) -> Result<f64> {
    let margin = rm.net_profit_margin();
    if margin <= 0.0 {
        return Ok(1.0);
    }
    let ctx = ScaleContext::new(rm, 0.0)?;
    clamp_unit(1.0 - margin * ctx.scale_w_y(x), "classical ruin probability of Y")
}

/// `P_x(κ₀⁻ < ∞) = 1 − (E[X₁] − δ)₊ w(x; 0)/(1 − δW(0))`.
pub fn classical_ruin_u(rm: &RefractedModel, x: f64) -> Result<f64> {
    let margin = rm.net_profit_margin();
    if margin <= 0.0 {
        return Ok(1.0);
    }
    let ctx = ScaleContext::new(rm, 0.0)?;
    let denom = 1.0 - rm.delta * ctx.x_fn().w0();
    let w = ctx.refracted_w(x, 0.0)?;
    clamp_unit(1.0 - margin * w / denom, "classical ruin probability of U")
}

/// `∫₀^∞ w^(q)(x; −z) (z/r) P(X_r ∈ dz)`.
fn profile_integral(law: &PositiveLaw, ctx: &ScaleContext, x: f64) -> Result<f64> {
    let profile = ctx.refracted_profile(x);
    let breaks: Vec<f64> = profile.kink().into_iter().collect();
    let v = law.weighted_integral(|z| profile.eval(z).unwrap_or(f64::NAN), &breaks)?;
    finite_or_err(v / law.r(), "integral of the refracted scale function")
}

/// `∫₀^∞ 𝒲_{x,δ}^(q,−q)(x + z) (z/r) P(X_r ∈ dz)`.
fn kernel_integral(law: &PositiveLaw, kern: &Kernels, x: f64) -> Result<f64> {
    let breaks: Vec<f64> = if x < 0.0 { vec![-x] } else { Vec::new() };
    let v = law.weighted_integral(|z| kern.kernel_w_delta(x, x + z).unwrap_or(f64::NAN), &breaks)?;
    finite_or_err(v / law.r(), "integral of the refracted convolution kernel")
}

fn finite_or_err(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(format!("{what} is not finite")))
    }
}

/// Parisian ruin probability `P_x(κ_r^U < ∞)`:
/// `1 − (E[X₁] − δ)₊ ∫w(x;−z)zP(X_r∈dz) / (∫zP(X_r∈dz) − δr)`.
///
/// The second denominator `∫(1 − δW(z))zP(X_r∈dz)` is evaluated as well and
/// its relative gap recorded under `alt_denominator_gap`.
pub fn parisian_ruin_prob(query: &ParisianQuery) -> Result<RuinResult> {
    let rm = &query.rm;
    let margin = rm.net_profit_margin();
    if margin <= 0.0 {
        return Ok(RuinResult::exact(1.0));
    }
    let law = PositiveLaw::build(&rm.x_model, query.r)?;
    let ctx = ScaleContext::new(rm, 0.0)?;
    let r = query.r;

    let numer = profile_integral(&law, &ctx, query.x)? * r;
    let moment = law.first_moment()?;
    let denom = moment - rm.delta * r;
    let denom_alt = law.weighted_integral(|z| 1.0 - rm.delta * ctx.scale_w(z), &[])?;
    if denom <= 0.0 {
        return Err(Error::numeric(format!(
            "nonpositive denominator {denom} (first moment {moment}, delta*r {})",
            rm.delta * r
        )));
    }
    let raw = 1.0 - margin * numer / denom;
    Ok(RuinResult::hybrid(clamp_unit(raw, "Parisian ruin probability")?)
        .note("unclamped", raw)
        .note("denominator", denom)
        .note("alt_denominator_gap", (denom - denom_alt).abs() / denom)
        .note("alt_value", 1.0 - margin * numer / denom_alt))
}

/// Shared pieces of the discounted identities at one `(q, r)`.
struct Discounted {
    law: PositiveLaw,
    ctx: ScaleContext,
    kern: Kernels,
    ex: Option<Expansion>,
}

impl Discounted {
    fn new(query: &ParisianQuery) -> Result<Self> {
        let law = PositiveLaw::build(&query.rm.x_model, query.r)?;
        let ctx = ScaleContext::new(&query.rm, query.q)?;
        let ctx0 = if query.q == 0.0 { ctx.clone() } else { ScaleContext::new(&query.rm, 0.0)? };
        let kern = Kernels::from_contexts(ctx.clone(), ctx0);
        let mut dc = Discounted { law, ctx, kern, ex: None };
        dc.ex = Expansion::new(&dc)?;
        Ok(dc)
    }

    fn w_int(&self, x: f64) -> Result<f64> {
        profile_integral(&self.law, &self.ctx, x)
    }

    fn kernel_int(&self, x: f64) -> Result<f64> {
        kernel_integral(&self.law, &self.kern, x)
    }

    /// `ℤ^(q)(x) + E·∫w^(q)(x;−z)(z/r)P − ∫𝒲_{x,δ}^(q,−q)(x+z)(z/r)P`.
    fn assemble(&self, x: f64, constant: f64) -> Result<f64> {
        Ok(self.ctx.scale_z_y(x)? + constant * self.w_int(x)? - self.kernel_int(x)?)
    }

    /// `E[e^{−qκ_r^U}1{κ_r^U < κ_a^+}]` started from 0.
    fn barrier_constant(&self, a: f64) -> Result<f64> {
        if let Some(ex) = &self.ex {
            let ga = ex.scaled(&ex.g, a, a);
            if !(ga > 0.0) {
                return Err(Error::numeric(format!("nonpositive normalising integral at a = {a}")));
            }
            return finite_or_err(-ex.scaled(&ex.f, a, a) / ga, "barrier constant");
        }
        let ia = self.w_int(a)?;
        if !(ia > 0.0) {
            return Err(Error::numeric(format!("nonpositive normalising integral {ia} at a = {a}")));
        }
        Ok((self.kernel_int(a)? - self.ctx.scale_z_y(a)?) / ia)
    }

    /// `E[e^{−qκ_r^U}1{κ_r^U < ∞}]` started from 0, from the `ℋ_δ` kernels.
    fn unbounded_constant(&self, q: f64) -> Result<f64> {
        let d = self.ctx.delta();
        let vphi = self.ctx.varphi_q();
        let r = self.law.r();
        let k0 = Kernels::from_contexts(self.ctx.clone(), self.ctx.clone());
        let upper = self
            .law
            .weighted_integral(|z| self.kern.kernel_h_delta(z).unwrap_or(f64::NAN), &[])?
            / r;
        let lower = self.law.weighted_integral(|z| k0.kernel_h_delta(z).unwrap_or(f64::NAN), &[])? / r;
        let denom = lower - d * (q * r).exp();
        if !(denom.is_finite() && denom != 0.0) {
            return Err(Error::numeric(format!("degenerate denominator {denom}")));
        }
        finite_or_err((upper - q / vphi - d) / denom, "unbounded Parisian constant")
    }
}

/// `ℤ^(q)(x) − ∫𝒲_{x,δ}^(q,−q)(x+z)(z/r)P` (called `F`) and
/// `∫w^(q)(x;−z)(z/r)P` (called `G`) on `x ≥ 0`, as sums `Σₖ cₖe^{λₖx}`
/// over the roots of `ψ_Y(λ) = q` and 0.
///
/// Each term `e^{ρx}` with `ρ` a root of `ψ = q` (or of `ψ = 0` in the
/// kernel) cancels exactly, since `Σᵢ Bᵢ/(ζᵢ − ρ) = 1/(δρ + q − ψ(ρ))` by
/// partial fractions of `1/(ψ_Y − q)`. Working on coefficients lets the
/// barrier formula drop its `e^{φ(q)(x+a)}` term algebraically; evaluated
/// directly, that term cancels in floating point and loses every digit once
/// `φ(q)a` is a few dozen.
struct Expansion {
    rates: Vec<Complex64>,
    f: Vec<Complex64>,
    g: Vec<Complex64>,
    /// Index of the fastest-growing rate, `φ(q)` or 0.
    dom: usize,
}

impl Expansion {
    /// `None` for the stable model, or when a root of `X` meets one of `Y`.
    fn new(dc: &Discounted) -> Result<Option<Self>> {
        let (Some(ys), Some(xq), Some(x0)) =
            (dc.ctx.y_fn().exp_sum(), dc.ctx.x_fn().exp_sum(), dc.kern.at_pq().x_fn().exp_sum())
        else {
            return Ok(None);
        };
        let (q, d) = (dc.ctx.q(), dc.ctx.delta());
        let zero = Complex64::new(0.0, 0.0);
        let mut rates = vec![zero];
        for z in &ys.roots {
            if slot(&rates, *z).is_none() {
                rates.push(*z);
            }
        }
        let mut ex = Expansion { f: vec![zero; rates.len()], g: vec![zero; rates.len()], rates, dom: 0 };
        ex.f[0] += 1.0;
        if q > 0.0 {
            for (z, b) in ys.roots.iter().zip(&ys.coefs) {
                let k = slot(&ex.rates, *z).expect("root is in the basis");
                ex.f[0] -= q * b / z;
                ex.f[k] += q * b / z;
            }
        }
        let moments = |roots: &[Complex64]| -> Result<Vec<Complex64>> {
            roots.iter().map(|rho| exp_moment(&dc.law, *rho)).collect()
        };
        let m0 = moments(&x0.roots)?;
        let mq = if q == 0.0 { m0.clone() } else { moments(&xq.roots)? };
        let ok = ex.project(x0, ys, &m0, q, d, -1.0, false) && ex.project(xq, ys, &mq, 0.0, d, 1.0, true);
        if !ok {
            return Ok(None);
        }
        ex.dom = (0..ex.rates.len()).max_by(|&i, &j| ex.rates[i].re.total_cmp(&ex.rates[j].re)).unwrap_or(0);
        Ok(Some(ex))
    }

    /// Adds `sign·Σⱼ MⱼAⱼ(e^{ρⱼx} + sⱼΣᵢBᵢ(e^{ζᵢx} − e^{ρⱼx})/(ζᵢ − ρⱼ))` with
    /// `sⱼ = δρⱼ + shift`. Unless `sⱼ = 0` only the `e^{ζᵢx}` terms survive.
    #[allow(clippy::too_many_arguments)]
    fn project(
        &mut self,
        xs: &crate::scale::ExpSum,
        ys: &crate::scale::ExpSum,
        moments: &[Complex64],
        shift: f64,
        d: f64,
        sign: f64,
        into_g: bool,
    ) -> bool {
        let out = if into_g { &mut self.g } else { &mut self.f };
        for ((rho, a), m) in xs.roots.iter().zip(&xs.coefs).zip(moments) {
            let weight = m * a * sign;
            let is_zero = *rho == Complex64::new(0.0, 0.0);
            if shift == 0.0 && (d == 0.0 || is_zero) {
                match slot(&self.rates, *rho) {
                    Some(k) => out[k] += weight,
                    None => return false,
                }
                continue;
            }
            let s = d * rho + shift;
            for (z, b) in ys.roots.iter().zip(&ys.coefs) {
                let gap = z - rho;
                if gap.norm() <= 1e-8 * rho.norm().max(1.0) {
                    return false;
                }
                let k = slot(&self.rates, *z).expect("root is in the basis");
                out[k] += weight * s * b / gap;
            }
        }
        true
    }

    fn phi(&self) -> f64 {
        self.rates[self.dom].re
    }

    /// `e^{−φ(q)a}Σₖ cₖe^{λₖx}`.
    fn scaled(&self, c: &[Complex64], x: f64, a: f64) -> f64 {
        let phi = self.phi();
        self.rates.iter().zip(c).map(|(l, ck)| ck * (l * x - phi * a).exp()).sum::<Complex64>().re
    }

    /// `F(x) − F(a)G(x)/G(a)` for `0 ≤ x ≤ a`, as
    /// `Σ_{k≠l}(f_k g_l − f_l g_k)e^{λₖx + λₗa} / G(a)`.
    fn barrier_value(&self, x: f64, a: f64) -> f64 {
        let phi = self.phi();
        let mut num = Complex64::new(0.0, 0.0);
        for k in 0..self.rates.len() {
            for l in 0..self.rates.len() {
                if k != l {
                    let c = self.f[k] * self.g[l] - self.f[l] * self.g[k];
                    num += c * (self.rates[k] * x + self.rates[l] * a - phi * a).exp();
                }
            }
        }
        num.re / self.scaled(&self.g, a, a)
    }

    /// `F(x) + C·G(x)` for `x ≥ 0` without the `e^{φ(q)x}` term, which the
    /// exact constant removes.
    fn unbounded_value(&self, x: f64, constant: f64) -> f64 {
        (0..self.rates.len())
            .filter(|&k| k != self.dom)
            .map(|k| (self.f[k] + constant * self.g[k]) * (self.rates[k] * x).exp())
            .sum::<Complex64>()
            .re
    }

    /// Relative size of the `e^{φ(q)x}` coefficient left by `constant`.
    fn growth_residual(&self, constant: f64) -> f64 {
        let (f, g) = (self.f[self.dom], self.g[self.dom]);
        (f + constant * g).norm() / f.norm().max(f64::MIN_POSITIVE)
    }
}

fn slot(rates: &[Complex64], r: Complex64) -> Option<usize> {
    rates.iter().position(|l| (l - r).norm() <= 1e-12 * r.norm().max(1.0))
}

/// `∫₀^∞ e^{ρz}(z/r)P(X_r ∈ dz)`.
fn exp_moment(law: &PositiveLaw, rho: Complex64) -> Result<Complex64> {
    let re = law.weighted_integral(|z| (rho * z).exp().re, &[])?;
    let im = if rho.im == 0.0 { 0.0 } else { law.weighted_integral(|z| (rho * z).exp().im, &[])? };
    let m = Complex64::new(re, im) / law.r();
    if m.re.is_finite() && m.im.is_finite() {
        Ok(m)
    } else {
        Err(Error::numeric(format!("exponential moment at rate {rho} is not finite")))
    }
}

/// `E_x[e^{−q(κ_r^U − r)} 1{κ_r^U < κ_a^+}]`.
pub fn parisian_laplace_to_barrier(query: &ParisianQuery) -> Result<RuinResult> {
    let a = query.barrier()?;
    let dc = Discounted::new(query)?;
    let constant = dc.barrier_constant(a)?;
    let value = match &dc.ex {
        Some(ex) if query.x >= 0.0 => ex.barrier_value(query.x, a),
        _ => dc.assemble(query.x, constant)?,
    };
    let cap = (query.q * query.r).exp();
    if !(value > -RANGE_SLACK && value < cap * (1.0 + RANGE_SLACK)) {
        return Err(Error::numeric(format!("value {value} lies outside [0, e^(qr)]")));
    }
    Ok(RuinResult::hybrid(value.clamp(0.0, cap)).note("constant_at_zero", constant))
}

/// `E_x[e^{−q(κ_r^U − r)} 1{κ_r^U < ∞}]` for `q > 0`.
///
/// The constant at zero is also recomputed as the barrier formula's value at
/// `a = 200`; the gap is recorded under `barrier_limit_gap`.
pub fn parisian_laplace(query: &ParisianQuery) -> Result<RuinResult> {
    if query.q <= 0.0 {
        return Err(Error::validation(
            "the Laplace transform needs q > 0; use parisian_ruin_prob for q = 0",
        ));
    }
    let dc = Discounted::new(query)?;
    let constant = dc.unbounded_constant(query.q)?;
    let value = match &dc.ex {
        Some(ex) if query.x >= 0.0 => ex.unbounded_value(query.x, constant),
        _ => dc.assemble(query.x, constant)?,
    };
    let discounted = value * (-query.q * query.r).exp();
    if !(discounted > -RANGE_SLACK && discounted < 1.0 + RANGE_SLACK) {
        return Err(Error::numeric(format!("e^(-qr) * value = {discounted} lies outside [0, 1]")));
    }
    let mut out = RuinResult::hybrid(value.max(0.0)).note("constant_at_zero", constant);
    if let Some(ex) = &dc.ex {
        out = out.note("growth_residual", ex.growth_residual(constant));
    }
    let limit_a = LIMIT_BARRIER.max(query.x);
    if let Ok(limit) = dc.barrier_constant(limit_a) {
        let gap = (limit - constant).abs();
        out = out.note("barrier_limit_gap", gap);
        if gap > LIMIT_WARN {
            out = out.note("barrier_limit_warning", 1.0);
        }
    }
    Ok(out)
}

/// `E_x[e^{−qκ_a^+} 1{κ_a^+ < κ_r^U}]`, the ratio of `∫w^(q)(·;−z)(z/r)P` at
/// `x` and at `a`.
pub fn exit_up_before_parisian(query: &ParisianQuery) -> Result<RuinResult> {
    let a = query.barrier()?;
    if query.x == a {
        return Ok(RuinResult::exact(1.0));
    }
    let dc = Discounted::new(query)?;
    let v = match &dc.ex {
        Some(ex) => {
            let ga = ex.scaled(&ex.g, a, a);
            let gx = if query.x >= 0.0 {
                ex.scaled(&ex.g, query.x, a)
            } else {
                dc.w_int(query.x)? * (-ex.phi() * a).exp()
            };
            if !(ga > 0.0) {
                return Err(Error::numeric(format!("nonpositive normalising integral at a = {a}")));
            }
            gx / ga
        }
        None => {
            let (ix, ia) = (dc.w_int(query.x)?, dc.w_int(a)?);
            if !(ia > 0.0) {
                return Err(Error::numeric(format!("nonpositive normalising integral {ia}")));
            }
            ix / ia
        }
    };
    Ok(RuinResult::hybrid(clamp_unit(v, "exit probability")?).note("unclamped", v))
}

/// `∫₀^x e^{rate·(x−y)} 𝕎^(q)(y) dy`.
fn y_exp_convolution(ctx: &ScaleContext, rate: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    match ctx.y_fn() {
        ScaleFn::Exp(s) => {
            let u = Complex64::from(rate);
            let acc: Complex64 = s
                .roots
                .iter()
                .zip(&s.coefs)
                .map(|(z, b)| b * crate::special::conv_exp(u, *z, x, x))
                .sum();
            Ok(acc.re)
        }
        ScaleFn::Stable { .. } => {
            quad::quad(|y| (rate * (x - y)).exp() * ctx.scale_w_y(y), 0.0, x, &[], Tol::default())
        }
    }
}

/// `E_x[e^{−qκ_b^+} 1{κ_b^+ < ∞}]` for `x ≤ b`, `b ≥ 0`.
pub fn first_passage_up_u(rm: &RefractedModel, x: f64, b: f64, q: f64) -> Result<f64> {
    if !(x.is_finite() && b.is_finite()) || x > b || b < 0.0 {
        return Err(Error::validation(format!("need x <= b and b >= 0 (x = {x}, b = {b})")));
    }
    let ctx = ScaleContext::new(rm, q)?;
    let phi = ctx.phi_q();
    let d = rm.delta;
    // e^{Φx} + δΦ∫₀^x e^{Φy}𝕎(x−y)dy, written as e^{Φx}(1 + δΦ∫₀^x e^{−Φu}𝕎(u)du)
    // relative to e^{Φb} to keep the ratio finite.
    let part = |s: f64| -> Result<f64> {
        let conv = if s > 0.0 { y_exp_convolution(&ctx, phi, s)? } else { 0.0 };
        Ok((phi * (s - b)).exp() + d * phi * conv * (-phi * b).exp())
    };
    let v = part(x)? / part(b)?;
    clamp_unit(v, "first-passage transform")
}

/// `E_x[e^{θY_{ν₀⁻}} 1{ν₀⁻ < ∞}]` for `x, θ > 0`.
///
/// When `θ > φ(0)` this uses the equivalent form
/// `ψ_Y(θ)∫₀^∞ e^{−θu}(𝕎(x+u) − 𝕎(x))du`, which avoids the cancellation
/// between `e^{θx}` and its compensator for large `θx`.
pub fn overshoot_laplace_y(rm: &RefractedModel, x: f64, theta: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite() && theta > 0.0 && theta.is_finite()) {
        return Err(Error::validation(format!("need x > 0 and theta > 0 (x = {x}, theta = {theta})")));
    }
    let ctx = ScaleContext::new(rm, 0.0)?;
    let psi_y = rm.x_model.laplace_exponent(theta)? - rm.delta * theta;
    let v = if theta > ctx.varphi_q() {
        match ctx.y_fn() {
            ScaleFn::Exp(s) => {
                let th = Complex64::from(theta);
                let acc: Complex64 = s
                    .roots
                    .iter()
                    .zip(&s.coefs)
                    .map(|(z, b)| b * (z * x).exp() * z / (th * (th - z)))
                    .sum();
                psi_y * acc.re
            }
            ScaleFn::Stable { .. } => {
                let wx = ctx.scale_w_y(x);
                let tail = 60.0 / theta;
                psi_y
                    * quad::quad(
                        |u| (-theta * u).exp() * (ctx.scale_w_y(x + u) - wx),
                        0.0,
                        tail,
                        &[],
                        Tol::default(),
                    )?
            }
        }
    } else {
        overshoot_laplace_y_direct(&ctx, psi_y, x, theta)?
    };
    clamp_unit(v, "overshoot transform")
}

/// The transform as printed:
/// `e^{θx} − ψ_Y(θ)e^{θx}∫₀^x e^{−θz}𝕎(z)dz − ψ_Y(θ)𝕎(x)/θ`.
fn overshoot_laplace_y_direct(ctx: &ScaleContext, psi_y: f64, x: f64, theta: f64) -> Result<f64> {
    let conv = y_exp_convolution(ctx, theta, x)?;
    Ok((theta * x).exp() - psi_y * conv - psi_y * ctx.scale_w_y(x) / theta)
}

/// `P_x(τ₀⁺ ≤ r) = ∫W(x+z)(z/r)P(X_r∈dz)` for `x < 0`.
pub fn tau_up_within_r(model: &LevyModel, x: f64, r: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::validation(format!("need x < 0, got {x}")));
    }
    let law = PositiveLaw::build(model, r)?;
    let ctx = ScaleContext::new(&unrefracted(model)?, 0.0)?;
    let v = profile_integral(&law, &ctx, x)?;
    clamp_unit(v, "upward passage probability")
}

/// `E_x[P_{Y_{ν₀⁻}}(τ₀⁺ ≤ r) 1{ν₀⁻ < ∞}]` as
/// `∫(w(x;−z) − 𝕎(x))(z/r)P(X_r∈dz) + δ𝕎(x)`.
pub fn recovery_after_ruin_y(rm: &RefractedModel, x: f64, r: f64) -> Result<f64> {
    let law = PositiveLaw::build(&rm.x_model, r)?;
    let ctx = ScaleContext::new(rm, 0.0)?;
    let wy = ctx.scale_w_y(x);
    let profile = ctx.refracted_profile(x);
    let breaks: Vec<f64> = profile.kink().into_iter().collect();
    let v = law.weighted_integral(|z| profile.eval(z).unwrap_or(f64::NAN) - wy, &breaks)? / r;
    finite_or_err(v + rm.delta * wy, "recovery expectation")
}

fn barrier_ratio(ctx: &ScaleContext, x: f64, a: f64) -> Result<f64> {
    let (wx, wa) = (ctx.scale_w_y(x), ctx.scale_w_y(a));
    // Unbounded variation: 𝕎(0) = 0 exactly, whatever the root sum rounds to.
    if x < 0.0 || wx == 0.0 || (x == 0.0 && !ctx.model().x_model.has_bounded_variation()) {
        return Ok(0.0);
    }
    if !(wa > 0.0) {
        return Err(Error::validation(format!("the barrier a = {a} must have a positive scale function")));
    }
    Ok(wx / wa)
}

/// `E_x[e^{−qν₀⁻} E_{Y_{ν₀⁻}}[e^{−qτ₀⁺}1{τ₀⁺≤r}] 1{ν₀⁻ < ν_a⁺}]` as
/// `∫e^{−qr}(w^(q)(x;−z) − 𝕎^(q)(x)/𝕎^(q)(a)·w^(q)(a;−z))(z/r)P`.
pub fn discounted_recovery_before_barrier(rm: &RefractedModel, x: f64, r: f64, q: f64, a: f64) -> Result<f64> {
    let query = ParisianQuery::new(rm.clone(), x, r)?.with_discount(q)?.with_barrier(a)?;
    let dc = Discounted::new(&query)?;
    let ratio = barrier_ratio(&dc.ctx, x, a)?;
    let ia = if ratio == 0.0 { 0.0 } else { dc.w_int(a)? };
    Ok((-q * r).exp() * (dc.w_int(x)? - ratio * ia))
}

/// `E_x[e^{−qν₀⁻} P_{Y_{ν₀⁻}}(τ₀⁺≤r) 1{ν₀⁻ < ν_a⁺}]` as
/// `∫(𝒲_{x,δ}^(q,−q)(x+z) − 𝕎^(q)(x)/𝕎^(q)(a)·𝒲_{a,δ}^(q,−q)(a+z))(z/r)P`.
pub fn recovery_before_barrier(rm: &RefractedModel, x: f64, r: f64, q: f64, a: f64) -> Result<f64> {
    let query = ParisianQuery::new(rm.clone(), x, r)?.with_discount(q)?.with_barrier(a)?;
    let dc = Discounted::new(&query)?;
    let ratio = barrier_ratio(&dc.ctx, x, a)?;
    let ka = if ratio == 0.0 { 0.0 } else { dc.kernel_int(a)? };
    Ok(dc.kernel_int(x)? - ratio * ka)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cl(c: f64, delta: f64) -> RefractedModel {
        RefractedModel::new(LevyModel::cramer_lundberg(c, 5.0, 1.0).unwrap(), delta).unwrap()
    }

    fn bm(delta: f64) -> RefractedModel {
        RefractedModel::new(LevyModel::brownian(6.0, 6.0).unwrap(), delta).unwrap()
    }

    fn q(rm: RefractedModel, x: f64, r: f64) -> ParisianQuery {
        ParisianQuery::new(rm, x, r).unwrap()
    }

    #[test]
    fn classical_examples() {
        let m = LevyModel::cramer_lundberg(6.0, 5.0, 1.0).unwrap();
        assert!((classical_ruin_x(&m, 0.0).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(classical_ruin_x(&LevyModel::brownian(1.0, 1.0).unwrap(), 0.0).unwrap(), 1.0);
        assert_eq!(classical_ruin_x(&LevyModel::cramer_lundberg(4.0, 5.0, 1.0).unwrap(), 3.0).unwrap(), 1.0);
        assert!((classical_ruin_y(&cl(9.0, 3.0), 0.0).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        for x in [0.5, 3.0, 10.0, 30.0] {
            for rm in [cl(9.0, 3.0), bm(2.0)] {
                let (y, u) = (classical_ruin_y(&rm, x).unwrap(), classical_ruin_u(&rm, x).unwrap());
                assert!((y - u).abs() < 1e-10, "x={x}: {y} vs {u}");
            }
        }
    }

    #[test]
    fn printed_spot_values() {
        let v = parisian_ruin_prob(&q(cl(6.0, 0.0), 1.0, 2.0)).unwrap().value;
        assert!((v / 2.872324151e-1 - 1.0).abs() < 1e-6, "{v}");
        let v = parisian_ruin_prob(&q(cl(9.0, 3.0), 10.0, 2.0)).unwrap().value;
        assert!((v / 1.24357907e-2 - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn delta_zero_matches_exponential_closed_form() {
        // For x ≥ 0: e^{θx}(1 − E[X₁]r/∫zP), θ = η/c − α.
        let rm = cl(6.0, 0.0);
        let law = PositiveLaw::build(&rm.x_model, 2.0).unwrap();
        let m1 = law.first_moment().unwrap();
        for x in [0.0f64, 1.0, 5.0, 20.0] {
            let want = ((5.0 / 6.0 - 1.0) * x).exp() * (1.0 - 2.0 / m1);
            let got = parisian_ruin_prob(&q(rm.clone(), x, 2.0)).unwrap().value;
            assert!((got - want).abs() < 1e-12, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn alt_denominator_agrees() {
        for rm in [cl(9.0, 3.0), bm(2.0)] {
            let res = parisian_ruin_prob(&q(rm, 1.0, 1.0)).unwrap();
            assert!(res.diagnostics["alt_denominator_gap"] < 1e-9);
        }
    }

    #[test]
    fn no_net_profit_is_certain_ruin() {
        let res = parisian_ruin_prob(&q(cl(6.0, 5.5), 3.0, 1.0)).unwrap();
        assert_eq!(res.value, 1.0);
        assert_eq!(res.method, Method::ClosedForm);
    }

    #[test]
    fn brownian_closed_form() {
        // P = (∫zP − cr)/(∫zP − δr)·e^{−2(c−δ)x/σ²} for x ≥ 0.
        let (c, s, d, r) = (6.0, 6.0, 2.0, 2.0);
        let law = PositiveLaw::build(&LevyModel::brownian(c, s).unwrap(), r).unwrap();
        let m1 = law.first_moment().unwrap();
        for x in [0.0, 1.0, 10.0] {
            let want = (m1 - c * r) / (m1 - d * r) * (-2.0 * (c - d) * x / (s * s)).exp();
            let got = parisian_ruin_prob(&q(bm(d), x, r)).unwrap().value;
            assert!((got - want).abs() < 1e-11, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn complementarity_and_ratio() {
        let rm = cl(9.0, 3.0);
        let query = q(rm.clone(), 1.0, 2.0).with_barrier(5.0).unwrap();
        let i = parisian_laplace_to_barrier(&query).unwrap().value;
        let iii = exit_up_before_parisian(&query).unwrap().value;
        assert!((i + iii - 1.0).abs() < 1e-8, "{i} + {iii}");

        let sx = 1.0 - parisian_ruin_prob(&q(rm.clone(), 1.0, 2.0)).unwrap().value;
        let sa = 1.0 - parisian_ruin_prob(&q(rm, 5.0, 2.0)).unwrap().value;
        assert!((iii - sx / sa).abs() < 1e-9);
    }

    #[test]
    fn complementarity_negative_start_brownian() {
        let query = q(bm(2.0), -1.0, 1.0).with_barrier(3.0).unwrap();
        let i = parisian_laplace_to_barrier(&query).unwrap().value;
        let iii = exit_up_before_parisian(&query).unwrap().value;
        assert!((i + iii - 1.0).abs() < 1e-8, "{i} + {iii}");
    }

    #[test]
    fn unbounded_limit_of_barrier_formula() {
        for rm in [cl(9.0, 3.0), bm(2.0), cl(6.0, 0.0)] {
            let query = q(rm, 1.0, 1.0).with_discount(0.1).unwrap();
            let ii = parisian_laplace(&query).unwrap();
            let i = parisian_laplace_to_barrier(&query.clone().with_barrier(200.0).unwrap()).unwrap();
            assert!((ii.value - i.value).abs() < 1e-6, "{} vs {}", ii.value, i.value);
            assert!(ii.diagnostics["barrier_limit_gap"] < 1e-6);
        }
    }

    #[test]
    fn small_q_approaches_ruin_probability() {
        let query = q(bm(2.0), 1.0, 2.0);
        let p = parisian_ruin_prob(&query).unwrap().value;
        let l = parisian_laplace(&query.with_discount(1e-4).unwrap()).unwrap().value;
        assert!((l * (-1e-4 * 2.0f64).exp() - p).abs() < 1e-3);
    }

    #[test]
    fn first_passage_reductions() {
        assert!((first_passage_up_u(&cl(9.0, 3.0), 1.0, 4.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let rm = cl(6.0, 0.0);
        let phi = rm.x_model.phi_inverse(0.2).unwrap();
        let v = first_passage_up_u(&rm, -1.0, 3.0, 0.2).unwrap();
        assert!((v - (-phi * 4.0).exp()).abs() < 1e-14);
        let v = first_passage_up_u(&rm, 1.0, 3.0, 0.2).unwrap();
        assert!((v - (-phi * 2.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn overshoot_forms_agree() {
        for rm in [cl(9.0, 3.0), bm(2.0)] {
            let ctx = ScaleContext::new(&rm, 0.0).unwrap();
            for (x, th) in [(2.0, 1.0), (0.5, 3.0)] {
                let psi_y = rm.x_model.laplace_exponent(th).unwrap() - rm.delta * th;
                let direct = overshoot_laplace_y_direct(&ctx, psi_y, x, th).unwrap();
                let stable = overshoot_laplace_y(&rm, x, th).unwrap();
                assert!((direct - stable).abs() < 1e-12, "{direct} vs {stable}");
            }
        }
        // Brownian creeps: θ → ∞ gives the ruin probability.
        let v = overshoot_laplace_y(&bm(2.0), 2.0, 1e4).unwrap();
        assert!((v - classical_ruin_y(&bm(2.0), 2.0).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn recovery_reductions() {
        // δ = 0: L3 = ∫(W(x+z) − W(x))(z/r)P.
        let rm = cl(6.0, 0.0);
        let law = PositiveLaw::build(&rm.x_model, 1.0).unwrap();
        let ctx = ScaleContext::new(&rm, 0.0).unwrap();
        let x = 2.0;
        let want = law.weighted_integral(|z| ctx.scale_w(x + z) - ctx.scale_w(x), &[]).unwrap();
        assert!((recovery_after_ruin_y(&rm, x, 1.0).unwrap() - want).abs() < 1e-12);
        // Started at 0 the process is below zero at once, so it returns within r
        // with probability one in the diffusive case.
        let l2 = recovery_before_barrier(&bm(2.0), 0.0, 1.0, 0.1, 0.0).unwrap();
        assert!((l2 - 1.0).abs() < 1e-9, "{l2}");
    }

    #[test]
    fn upward_passage() {
        let m = LevyModel::brownian(6.0, 6.0).unwrap();
        assert!(tau_up_within_r(&m, -1e-4, 1.0).unwrap() > 0.99);
        let a = tau_up_within_r(&m, -2.0, 0.5).unwrap();
        let b = tau_up_within_r(&m, -2.0, 1.0).unwrap();
        assert!(0.0 < a && a < b && b < 1.0);
    }

    #[test]
    fn barrier_queries_validate() {
        assert!(q(cl(6.0, 0.0), 3.0, 1.0).with_barrier(2.0).is_err());
        assert!(q(cl(6.0, 0.0), -3.0, 1.0).with_barrier(-1.0).is_err());
        assert!(parisian_laplace_to_barrier(&q(cl(6.0, 0.0), 1.0, 1.0)).is_err());
    }

    fn direct_barrier_value(dc: &Discounted, x: f64, a: f64) -> f64 {
        let constant = (dc.kernel_int(a).unwrap() - dc.ctx.scale_z_y(a).unwrap()) / dc.w_int(a).unwrap();
        dc.assemble(x, constant).unwrap()
    }

    #[test]
    fn expansion_matches_direct_evaluation() {
        let ph = LevyModel::phase_type(
            7.0,
            0.5,
            3.0,
            vec![0.4, 0.6],
            vec![vec![-2.0, 1.0], vec![0.0, -3.0]],
        )
        .unwrap();
        let models = [cl(9.0, 3.0), cl(6.0, 0.0), bm(2.0), RefractedModel::new(ph, 1.5).unwrap()];
        for rm in models {
            for qq in [0.0, 0.1] {
                let query = q(rm.clone(), 0.0, 1.0).with_discount(qq).unwrap();
                let dc = Discounted::new(&query).unwrap();
                let ex = dc.ex.as_ref().expect("rational model");
                for (x, a) in [(0.0, 2.0), (1.0, 4.0), (3.0, 5.0)] {
                    let want = direct_barrier_value(&dc, x, a);
                    let got = ex.barrier_value(x, a);
                    assert!((got - want).abs() < 1e-9, "{} q={qq} x={x} a={a}: {got} vs {want}", rm.x_model.name());
                    let gx = dc.w_int(x).unwrap() / dc.w_int(a).unwrap();
                    assert!((ex.scaled(&ex.g, x, a) / ex.scaled(&ex.g, a, a) - gx).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn steep_scale_functions_stay_in_range() {
        // Y drifts down, so 𝕎 grows like e^{11x} and a direct evaluation of
        // the barrier formula cancels every digit.
        let rm = RefractedModel::new(LevyModel::cramer_lundberg(3.385, 5.36, 2.91).unwrap(), 3.0).unwrap();
        for (x, a) in [(11.0, 14.0), (2.0, 30.0), (29.0, 30.0)] {
            let query = q(rm.clone(), x, 1.0).with_barrier(a).unwrap();
            let i = parisian_laplace_to_barrier(&query).unwrap().value;
            let iii = exit_up_before_parisian(&query).unwrap().value;
            assert!((0.0..=1.0).contains(&i) && (0.0..=1.0).contains(&iii));
            assert!((i + iii - 1.0).abs() < 1e-8, "x={x} a={a}: {i} + {iii}");
        }
    }
}
