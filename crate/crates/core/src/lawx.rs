//! The measure `z·P(X_r ∈ dz)` on `(0, ∞)` and the weighted integrals
//! `∫₀^∞ f(z) z P(X_r ∈ dz)` that every Parisian formula is built from.

use crate::error::{Error, Result};
use crate::model::{LevyModel, PhaseType};
use crate::quad::{self, Tol};
use crate::scale::ScaleContext;
use crate::special::{lower_gamma_regularized, normal_cdf, normal_pdf};
use std::cell::RefCell;

/// Series stop: a term below this fraction of the running sum (after the
/// minimum number of terms) ends the sum.
const SERIES_REL: f64 = 1e-15;
const SERIES_MIN_TERMS: usize = 12;
const SERIES_CAP: usize = 400;
/// Gaussian tails are cut this many standard deviations above the mean.
const TAIL_SD: f64 = 12.0;

#[derive(Debug, Clone)]
enum Kind {
    ClExp { c: f64, eta: f64, alpha: f64 },
    Gaussian { mean: f64, sd: f64 },
    Phase { c: f64, sd: f64, ph: PhaseType, p0: f64, weights: Vec<f64> },
}

/// Law of `X_r` restricted to `(0, ∞)`: an optional atom at `cr` (bounded
/// variation only) plus a density.
#[derive(Debug, Clone)]
pub struct PositiveLaw {
    model: LevyModel,
    r: f64,
    kind: Kind,
    z_max: f64,
}

impl PositiveLaw {
    pub fn build(model: &LevyModel, r: f64) -> Result<Self> {
        model.validate()?;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::validation(format!("delay r must be finite and > 0, got {r}")));
        }
        let (kind, z_max) = match model {
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                // The series is largest at z = 0; check it converges there.
                cl_series(*alpha * eta * r, c * r)?;
                (Kind::ClExp { c: *c, eta: *eta, alpha: *alpha }, c * r)
            }
            LevyModel::BrownianRisk { c, sigma } => {
                let (mean, sd) = (c * r, sigma * r.sqrt());
                (Kind::Gaussian { mean, sd }, (mean + TAIL_SD * sd).max(0.0))
            }
            LevyModel::JumpDiffusionPhaseType { c, sigma, eta, .. } => {
                let ph = PhaseType::from_model(model).expect("phase-type variant");
                let weights = poisson_weights(eta * r)?;
                let sd = sigma * r.sqrt();
                let z_max = if sd > 0.0 { (c * r + TAIL_SD * sd).max(0.0) } else { c * r };
                (Kind::Phase { c: *c, sd, ph, p0: (-eta * r).exp(), weights }, z_max)
            }
            LevyModel::StableThreeHalves { .. } => {
                return Err(Error::unsupported(
                    "the law of X_r is not available for the stable model",
                ))
            }
        };
        Ok(PositiveLaw { model: model.clone(), r, kind, z_max })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// Upper end of the integration range; mass beyond it is below 1e-12.
    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    /// `(location, mass)` of the no-jump atom, for bounded-variation models.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::ClExp { c, eta, .. } => Some((c * self.r, (-eta * self.r).exp())),
            Kind::Phase { c, sd, p0, .. } if *sd == 0.0 => Some((c * self.r, *p0)),
            _ => None,
        }
    }

    /// Density of the absolutely continuous part of `P(X_r ∈ dz)`.
    pub fn density(&self, z: f64) -> f64 {
        let r = self.r;
        match &self.kind {
            Kind::ClExp { c, eta, alpha } => {
                let u = c * r - z;
                if u <= 0.0 {
                    return 0.0;
                }
                let s = cl_series(alpha * eta * r, u).unwrap_or(f64::NAN);
                (-eta * r - alpha * u).exp() * s
            }
            Kind::Gaussian { mean, sd } => normal_pdf((z - mean) / sd) / sd,
            Kind::Phase { c, sd, ph, p0, weights } => {
                let shift = c * r - z;
                if *sd == 0.0 {
                    return if shift > 0.0 { compound_density(ph, weights, shift) } else { 0.0 };
                }
                let lo = (shift - TAIL_SD * sd).max(0.0);
                let hi = shift + TAIL_SD * sd;
                let jumps = if hi > 0.0 {
                    quad::quad(
                        |y| compound_density(ph, weights, y) * normal_pdf((y - shift) / sd) / sd,
                        lo,
                        hi,
                        &[shift.max(0.0)],
                        Tol::default(),
                    )
                    .unwrap_or(f64::NAN)
                } else {
                    0.0
                };
                p0 * normal_pdf(shift / sd) / sd + jumps
            }
        }
    }

    /// `∫₀^∞ z P(X_r ∈ dz)`, from the closed forms where they exist.
    pub fn first_moment(&self) -> Result<f64> {
        let r = self.r;
        match &self.kind {
            Kind::ClExp { c, eta, alpha } => cl_first_moment(*c, *eta, *alpha, r),
            Kind::Gaussian { mean, sd } => {
                Ok(sd * normal_pdf(mean / sd) + mean * normal_cdf(mean / sd))
            }
            Kind::Phase { .. } => self.weighted_integral(|_| 1.0, &[]),
        }
    }

    /// `∫₀^∞ f(z) z P(X_r ∈ dz)`; `breaks` mark points where `f` is not smooth.
    pub fn weighted_integral<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        self.weighted_integral_tol(f, breaks, Tol::default())
    }

    pub fn weighted_integral_tol<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breaks: &[f64],
        tol: Tol,
    ) -> Result<f64> {
        self.integral_upto(&f, breaks, tol, self.z_max)
    }

    /// Tail certificate: relative change of the weighted integral of `f` when
    /// the cutoff is doubled.
    pub fn tail_check<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let a = self.integral_upto(&f, &[], Tol::default(), self.z_max)?;
        let b = self.integral_upto(&f, &[], Tol::default(), 2.0 * self.z_max)?;
        Ok((a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
    }

    fn integral_upto<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        breaks: &[f64],
        tol: Tol,
        z_hi: f64,
    ) -> Result<f64> {
        let r = self.r;
        let atom = self.atom().map_or(0.0, |(loc, mass)| mass * loc * f(loc));
        let body = match &self.kind {
            Kind::ClExp { c, .. } => {
                let top = (c * r).min(z_hi);
                quad::quad(|z| f(z) * z * self.density(z), 0.0, top, breaks, tol)?
            }
            Kind::Gaussian { mean, .. } => {
                let mut b = breaks.to_vec();
                b.push(*mean);
                quad::quad(|z| f(z) * z * self.density(z), 0.0, z_hi, &b, tol)?
            }
            Kind::Phase { c, sd, ph, p0, weights } => {
                if *sd == 0.0 {
                    let top = (c * r).min(z_hi);
                    quad::quad(|z| f(z) * z * compound_density(ph, weights, c * r - z), 0.0, top, breaks, tol)?
                } else {
                    self.phase_diffusion_integral(f, breaks, tol, z_hi, *c, *sd, ph, *p0, weights)?
                }
            }
        };
        Ok(atom + body)
    }

    /// With a diffusion part, `X_r = cr + σB_r − S` and the weighted integral
    /// is `p₀E[h(G)] + ∫ f_S(y) E[h(G − y)] dy` with `h(z) = f(z) z 1{z>0}`,
    /// `G ~ N(cr, σ²r)` and `f_S` the defective density of the claim total.
    #[allow(clippy::too_many_arguments)]
    fn phase_diffusion_integral<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        breaks: &[f64],
        tol: Tol,
        z_hi: f64,
        c: f64,
        sd: f64,
        ph: &PhaseType,
        p0: f64,
        weights: &[f64],
    ) -> Result<f64> {
        let mean = c * self.r;
        let inner = |shift: f64| -> Result<f64> {
            // ∫₀^∞ f(z) z φ((z − mean + shift)/sd)/sd dz
            let top = (mean - shift + TAIL_SD * sd).min(z_hi);
            if top <= 0.0 {
                return Ok(0.0);
            }
            let mut b = breaks.to_vec();
            b.push(mean - shift);
            quad::quad(|z| f(z) * z * normal_pdf((z - mean + shift) / sd) / sd, 0.0, top, &b, tol)
        };
        let no_jump = p0 * inner(0.0)?;
        let y_hi = mean + TAIL_SD * sd;
        if y_hi <= 0.0 {
            return Ok(no_jump);
        }
        let failure = RefCell::new(None);
        let jumps = quad::quad(
            |y| match inner(y) {
                Ok(v) => compound_density(ph, weights, y) * v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            y_hi,
            &[],
            Tol { abs: tol.abs, rel: tol.rel.max(1e-11), limit: tol.limit },
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(no_jump + jumps?)
    }
}

/// `Σ_{m≥0} (κ)^{m+1} u^m / (m!(m+1)!)` with `κ = αηr`.
fn cl_series(kappa: f64, u: f64) -> Result<f64> {
    let mut term = kappa;
    let mut sum = term;
    for m in 0..SERIES_CAP {
        if m + 1 >= SERIES_MIN_TERMS && term.abs() < SERIES_REL * sum.abs() {
            return Ok(sum);
        }
        let mf = m as f64;
        term *= kappa * u / ((mf + 1.0) * (mf + 2.0));
        sum += term;
    }
    Err(Error::numeric(format!(
        "compound-Poisson density series did not converge within {SERIES_CAP} terms \
         (alpha*eta*r = {kappa}, u = {u})"
    )))
}

/// `e^{−ηr}(cr + Σ_m (ηr)^{m+1}/(m!(m+1)!)[crΓ(m+1, crα) − Γ(m+2, crα)/α])`
/// with the lower incomplete gamma function.
fn cl_first_moment(c: f64, eta: f64, alpha: f64, r: f64) -> Result<f64> {
    let x = c * r * alpha;
    let lam = eta * r;
    // (ηr)^{m+1}/(m+1)! and (ηr)^{m+1}/m!
    let mut a = lam;
    let mut b = lam;
    let mut sum = c * r;
    for m in 0..SERIES_CAP {
        let mf = m as f64;
        let term = a * c * r * lower_gamma_regularized(mf + 1.0, x)
            - b * lower_gamma_regularized(mf + 2.0, x) / alpha;
        sum += term;
        if m + 1 >= SERIES_MIN_TERMS && term.abs() < SERIES_REL * sum.abs() && mf > lam {
            return Ok((-lam).exp() * sum);
        }
        a *= lam / (mf + 2.0);
        b *= lam / (mf + 1.0);
    }
    Err(Error::numeric("first-moment series did not converge"))
}

/// Poisson(λ) probabilities for k = 1..K, truncated once past the mode and
/// negligible relative to the accumulated mass.
fn poisson_weights(lam: f64) -> Result<Vec<f64>> {
    let mut w = (-lam).exp();
    let mut cum = w;
    let mut out = Vec::new();
    for k in 1..=SERIES_CAP {
        w *= lam / k as f64;
        cum += w;
        out.push(w);
        if k >= SERIES_MIN_TERMS && (k as f64) > lam && w < SERIES_REL * cum {
            return Ok(out);
        }
    }
    Err(Error::numeric(format!(
        "Poisson series for eta*r = {lam} needs more than {SERIES_CAP} terms"
    )))
}

/// Defective density of the claim total `S = Σ_{i≤N_r} C_i` at `y > 0`:
/// `Σ_k P(N_r = k) f_k(y)` with `f_k(y) = 𝛂 E_{k−1}(y) 𝐭` where `E_j(y)` are
/// the blocks of `exp(Gy)` for the block-bidiagonal generator of `F^{*k}`.
pub(crate) fn compound_density(ph: &PhaseType, weights: &[f64], y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let blocks = block_toeplitz_expm(ph, y, weights.len());
    let m = ph.order();
    let mut total = 0.0;
    for (k, w) in weights.iter().enumerate() {
        let e = &blocks[k * m * m..(k + 1) * m * m];
        let mut s = 0.0;
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                row += e[i * m + j] * ph.exit[j];
            }
            s += ph.alpha[i] * row;
        }
        total += w * s;
    }
    total
}

/// First block row of `exp(Gy)` for the upper block-bidiagonal generator with
/// diagonal blocks `T` and super-diagonal blocks `𝐭𝛂`, as `k` row-major
/// `m×m` blocks. The exponential of an upper block-Toeplitz matrix is again
/// upper block-Toeplitz, so scaling and squaring stays in that class.
fn block_toeplitz_expm(ph: &PhaseType, y: f64, k: usize) -> Vec<f64> {
    let m = ph.order();
    let mm = m * m;
    let mut a0 = vec![0.0; mm];
    let mut a1 = vec![0.0; mm];
    for i in 0..m {
        for j in 0..m {
            a0[i * m + j] = ph.t[(i, j)];
            a1[i * m + j] = ph.exit[i] * ph.alpha[j];
        }
    }
    let norm = (0..m)
        .map(|i| (0..m).map(|j| a0[i * m + j].abs() + a1[i * m + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * y;
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.5 {
        squarings += 1;
    }
    let h = y / 2f64.powi(squarings);
    for v in a0.iter_mut().chain(a1.iter_mut()) {
        *v *= h;
    }
    // Horner for the Taylor polynomial: X ← I + (A X)/n.
    let mut x = vec![0.0; k * mm];
    identity_block(&mut x[..mm], m);
    let mut ax = vec![0.0; k * mm];
    for n in (1..=18).rev() {
        ax.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..k {
            matmul_add(&mut ax[j * mm..(j + 1) * mm], &a0, &x[j * mm..(j + 1) * mm], m);
            if j > 0 {
                matmul_add(&mut ax[j * mm..(j + 1) * mm], &a1, &x[(j - 1) * mm..j * mm], m);
            }
        }
        let inv = 1.0 / n as f64;
        for (xv, av) in x.iter_mut().zip(&ax) {
            *xv = av * inv;
        }
        for i in 0..m {
            x[i * m + i] += 1.0;
        }
    }
    for _ in 0..squarings {
        let mut sq = vec![0.0; k * mm];
        for j in 0..k {
            for i in 0..=j {
                let (out, l, r) = (j * mm, i * mm, (j - i) * mm);
                let (lhs, rhs) = (&x[l..l + mm], &x[r..r + mm]);
                matmul_add(&mut sq[out..out + mm], lhs, rhs, m);
            }
        }
        x = sq;
    }
    x
}

fn identity_block(b: &mut [f64], m: usize) {
    for i in 0..m {
        b[i * m + i] = 1.0;
    }
}

fn matmul_add(out: &mut [f64], a: &[f64], b: &[f64], m: usize) {
    for i in 0..m {
        for l in 0..m {
            let av = a[i * m + l];
            if av == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i * m + j] += av * b[l * m + j];
            }
        }
    }
}

/// Relative residual of `∫₀^∞ W^(q)(z)(z/r)P(X_r ∈ dz) = e^{qr}`.
pub fn exp_kernel_identity_check(law: &PositiveLaw, ctx: &ScaleContext) -> Result<f64> {
    let r = law.r();
    let lhs = law.weighted_integral(|z| ctx.scale_w(z), &[])? / r;
    let want = (ctx.q() * r).exp();
    Ok((lhs - want).abs() / want)
}
