//! Spectrally negative Lévy models and their Laplace exponents.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One of the four parametric spectrally negative Lévy processes.
///
/// Build values through the checked constructors ([`LevyModel::cramer_lundberg`]
/// and friends) or call [`LevyModel::validate`] before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyModel {
    /// Premium rate `c`, Poisson claims at rate `eta` with Exp(`alpha`) sizes.
    CramerLundbergExp { c: f64, eta: f64, alpha: f64 },
    /// Drift `c` plus `sigma` times a standard Brownian motion.
    BrownianRisk { c: f64, sigma: f64 },
    /// Drift, optional diffusion and compound Poisson claims with phase-type
    /// sizes PH(`alpha_vec`, `t_mat`).
    JumpDiffusionPhaseType {
        c: f64,
        sigma: f64,
        eta: f64,
        alpha_vec: Vec<f64>,
        t_mat: Vec<Vec<f64>>,
    },
    /// Drift `c` plus a spectrally negative 3/2-stable process, `ψ(λ) = cλ + λ^{3/2}`.
    StableThreeHalves { c: f64 },
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be > 0, got {v}")))
    }
}

impl LevyModel {
    pub fn cramer_lundberg(c: f64, eta: f64, alpha: f64) -> Result<Self> {
        let m = LevyModel::CramerLundbergExp { c, eta, alpha };
        m.validate()?;
        Ok(m)
    }

    pub fn brownian(c: f64, sigma: f64) -> Result<Self> {
        let m = LevyModel::BrownianRisk { c, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn phase_type(
        c: f64,
        sigma: f64,
        eta: f64,
        alpha_vec: Vec<f64>,
        t_mat: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let m = LevyModel::JumpDiffusionPhaseType { c, sigma, eta, alpha_vec, t_mat };
        m.validate()?;
        Ok(m)
    }

    pub fn stable(c: f64) -> Result<Self> {
        let m = LevyModel::StableThreeHalves { c };
        m.validate()?;
        Ok(m)
    }

    /// Checks the parameter invariants of the variant.
    pub fn validate(&self) -> Result<()> {
        match self {
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                positive("c", *c)?;
                positive("eta", *eta)?;
                positive("alpha", *alpha)
            }
            LevyModel::BrownianRisk { c, sigma } => {
                finite("c", *c)?;
                positive("sigma", *sigma)
            }
            LevyModel::JumpDiffusionPhaseType { c, sigma, eta, alpha_vec, t_mat } => {
                finite("c", *c)?;
                finite("sigma", *sigma)?;
                if *sigma < 0.0 {
                    return Err(Error::validation(format!("sigma must be >= 0, got {sigma}")));
                }
                if *sigma == 0.0 && *c <= 0.0 {
                    return Err(Error::validation(format!(
                        "without a diffusion part the drift c must be > 0, got {c}"
                    )));
                }
                positive("eta", *eta)?;
                validate_phase_type(alpha_vec, t_mat)
            }
            LevyModel::StableThreeHalves { c } => positive("c", *c),
        }
    }

    /// Linear drift coefficient `c`.
    pub fn drift(&self) -> f64 {
        match self {
            LevyModel::CramerLundbergExp { c, .. }
            | LevyModel::BrownianRisk { c, .. }
            | LevyModel::JumpDiffusionPhaseType { c, .. }
            | LevyModel::StableThreeHalves { c } => *c,
        }
    }

    /// Gaussian coefficient `σ` (zero for pure-jump and stable models).
    pub fn sigma(&self) -> f64 {
        match self {
            LevyModel::BrownianRisk { sigma, .. }
            | LevyModel::JumpDiffusionPhaseType { sigma, .. } => *sigma,
            _ => 0.0,
        }
    }

    /// Total jump intensity `Π(0,∞)`; infinite for the stable model.
    pub fn jump_rate(&self) -> f64 {
        match self {
            LevyModel::CramerLundbergExp { eta, .. }
            | LevyModel::JumpDiffusionPhaseType { eta, .. } => *eta,
            LevyModel::BrownianRisk { .. } => 0.0,
            LevyModel::StableThreeHalves { .. } => f64::INFINITY,
        }
    }

    /// Whether paths have bounded variation (no diffusion, finite jump rate).
    pub fn has_bounded_variation(&self) -> bool {
        match self {
            LevyModel::CramerLundbergExp { .. } => true,
            LevyModel::JumpDiffusionPhaseType { sigma, .. } => *sigma == 0.0,
            _ => false,
        }
    }

    /// Short identifier used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            LevyModel::CramerLundbergExp { .. } => "cramer_lundberg_exp",
            LevyModel::BrownianRisk { .. } => "brownian_risk",
            LevyModel::JumpDiffusionPhaseType { .. } => "jump_diffusion_phase_type",
            LevyModel::StableThreeHalves { .. } => "stable_three_halves",
        }
    }

    /// The same model with its drift replaced by `c`. The result skips
    /// validation because it describes the process `Y`, whose drift may be
    /// any real number for unbounded-variation models.
    pub(crate) fn with_drift(&self, c: f64) -> LevyModel {
        let mut m = self.clone();
        match &mut m {
            LevyModel::CramerLundbergExp { c: d, .. }
            | LevyModel::BrownianRisk { c: d, .. }
            | LevyModel::JumpDiffusionPhaseType { c: d, .. }
            | LevyModel::StableThreeHalves { c: d } => *d = c,
        }
        m
    }

    /// Laplace exponent `ψ(λ)` for `λ ≥ 0`.
    pub fn laplace_exponent(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::validation(format!(
                "Laplace exponent needs a finite lambda >= 0, got {lambda}"
            )));
        }
        Ok(self.psi(lambda))
    }

    pub(crate) fn psi(&self, l: f64) -> f64 {
        if l == 0.0 {
            return 0.0;
        }
        match self {
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                c * l + eta * (alpha / (l + alpha) - 1.0)
            }
            LevyModel::BrownianRisk { c, sigma } => c * l + 0.5 * sigma * sigma * l * l,
            LevyModel::JumpDiffusionPhaseType { c, sigma, eta, .. } => {
                let ph = PhaseType::from_model(self).expect("validated phase-type model");
                c * l + 0.5 * sigma * sigma * l * l + eta * (ph.laplace(l) - 1.0)
            }
            LevyModel::StableThreeHalves { c } => c * l + l.powf(1.5),
        }
    }

    pub(crate) fn psi_prime(&self, l: f64) -> f64 {
        match self {
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                c - eta * alpha / ((l + alpha) * (l + alpha))
            }
            LevyModel::BrownianRisk { c, sigma } => c + sigma * sigma * l,
            LevyModel::JumpDiffusionPhaseType { c, sigma, eta, .. } => {
                let ph = PhaseType::from_model(self).expect("validated phase-type model");
                c + sigma * sigma * l + eta * ph.laplace_prime(l)
            }
            LevyModel::StableThreeHalves { c } => c + 1.5 * l.max(0.0).sqrt(),
        }
    }

    /// `ψ` continued to complex arguments (not available for the stable model).
    pub(crate) fn psi_c(&self, l: Complex64) -> Complex64 {
        match self {
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                l * *c + (Complex64::from(*alpha) / (l + alpha) - 1.0) * *eta
            }
            LevyModel::BrownianRisk { c, sigma } => l * *c + l * l * (0.5 * sigma * sigma),
            LevyModel::JumpDiffusionPhaseType { c, sigma, eta, .. } => {
                let ph = PhaseType::from_model(self).expect("validated phase-type model");
                l * *c + l * l * (0.5 * sigma * sigma) + (ph.laplace_c(l).0 - 1.0) * *eta
            }
            LevyModel::StableThreeHalves { c } => l * *c + l.powf(1.5),
        }
    }

    pub(crate) fn psi_prime_c(&self, l: Complex64) -> Complex64 {
        match self {
            LevyModel::CramerLundbergExp { c, eta, alpha } => {
                Complex64::from(*c) - (l + alpha).powi(-2) * (eta * alpha)
            }
            LevyModel::BrownianRisk { c, sigma } => l * (sigma * sigma) + *c,
            LevyModel::JumpDiffusionPhaseType { c, sigma, eta, .. } => {
                let ph = PhaseType::from_model(self).expect("validated phase-type model");
                l * (sigma * sigma) + *c + ph.laplace_c(l).1 * *eta
            }
            LevyModel::StableThreeHalves { c } => l.sqrt() * 1.5 + *c,
        }
    }

    /// `E[X₁] = ψ′(0+)`.
    pub fn mean_at_one(&self) -> f64 {
        match self {
            LevyModel::CramerLundbergExp { c, eta, alpha } => c - eta / alpha,
            LevyModel::JumpDiffusionPhaseType { c, eta, .. } => {
                let ph = PhaseType::from_model(self).expect("validated phase-type model");
                c - eta * ph.mean()
            }
            LevyModel::BrownianRisk { c, .. } | LevyModel::StableThreeHalves { c } => *c,
        }
    }

    /// Right-inverse `Φ(q) = sup{λ ≥ 0 : ψ(λ) = q}`.
    pub fn phi_inverse(&self, q: f64) -> Result<f64> {
        if !q.is_finite() || q < 0.0 {
            return Err(Error::validation(format!("q must be finite and >= 0, got {q}")));
        }
        right_inverse(|l| self.psi(l), |l| self.psi_prime(l), q)
    }
}

/// Solves `ψ(λ) = q` for the largest root on `[0, ∞)` of a convex `ψ` with
/// `ψ(0) = 0`.
fn right_inverse(psi: impl Fn(f64) -> f64, dpsi: impl Fn(f64) -> f64, q: f64) -> Result<f64> {
    let d0 = dpsi(0.0);
    if q == 0.0 && d0 >= 0.0 {
        return Ok(0.0);
    }
    // Left end of the increasing branch: the minimiser of ψ when ψ′(0) < 0.
    let mut lo = 0.0;
    if d0 < 0.0 {
        let mut b = 1.0;
        while dpsi(b) <= 0.0 {
            b *= 2.0;
            if b > 1e300 {
                return Err(Error::numeric("psi' stays negative; cannot locate the minimum"));
            }
        }
        let mut a = 0.0;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if dpsi(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        lo = a;
    }
    let mut hi = if lo > 0.0 { 2.0 * lo } else { 1.0 };
    while psi(hi) <= q {
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(Error::numeric(format!("could not bracket the root of psi = {q}")));
        }
    }
    // Newton from the right end is monotone for a convex increasing function;
    // the bracket only guards against rounding.
    let mut x = hi;
    for _ in 0..200 {
        let f = psi(x) - q;
        if f > 0.0 {
            hi = x;
        } else if f < 0.0 {
            lo = x;
        } else {
            return Ok(x);
        }
        let d = dpsi(x);
        let mut nx = x - f / d;
        if !(nx > lo && nx < hi) || !nx.is_finite() {
            nx = 0.5 * (lo + hi);
        }
        if (nx - x).abs() <= 2.0 * f64::EPSILON * nx.abs() || hi - lo <= 2.0 * f64::EPSILON * hi {
            return Ok(nx);
        }
        x = nx;
    }
    Err(Error::numeric(format!("Newton iteration for the root of psi = {q} did not converge")))
}

fn validate_phase_type(alpha: &[f64], t: &[Vec<f64>]) -> Result<()> {
    let m = alpha.len();
    if m == 0 {
        return Err(Error::validation("phase-type representation needs at least one phase"));
    }
    if t.len() != m || t.iter().any(|row| row.len() != m) {
        return Err(Error::validation(format!("T must be {m}x{m} to match alpha_vec")));
    }
    if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::validation("alpha_vec entries must be finite and >= 0"));
    }
    let s: f64 = alpha.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::validation(format!("alpha_vec must sum to 1, sums to {s}")));
    }
    for (i, row) in t.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::validation("T entries must be finite"));
            }
            if i == j && *v > 0.0 {
                return Err(Error::validation(format!("T[{i}][{i}] must be <= 0")));
            }
            if i != j && *v < 0.0 {
                return Err(Error::validation(format!("T[{i}][{j}] must be >= 0")));
            }
        }
        let rs: f64 = row.iter().sum();
        if rs > 1e-12 * row[i].abs().max(1.0) {
            return Err(Error::validation(format!("row {i} of T sums to {rs} > 0")));
        }
    }
    let tm = DMatrix::from_fn(m, m, |i, j| t[i][j]);
    if tm.clone().lu().solve(&DVector::from_element(m, 1.0)).is_none() {
        return Err(Error::validation("T is singular; claims would not be absorbed"));
    }
    let mean = PhaseType::new(alpha, t).mean();
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::validation("T is not a sub-generator of a proper phase-type law"));
    }
    Ok(())
}

/// A phase-type law PH(𝛂, 𝐓) with exit vector 𝐭 = −𝐓𝟏.
#[derive(Debug, Clone)]
pub(crate) struct PhaseType {
    pub alpha: DVector<f64>,
    pub t: DMatrix<f64>,
    pub exit: DVector<f64>,
}

impl PhaseType {
    pub fn new(alpha: &[f64], t: &[Vec<f64>]) -> Self {
        let m = alpha.len();
        let tm = DMatrix::from_fn(m, m, |i, j| t[i][j]);
        let exit = -(&tm * DVector::from_element(m, 1.0));
        PhaseType { alpha: DVector::from_column_slice(alpha), t: tm, exit }
    }

    pub fn from_model(model: &LevyModel) -> Option<Self> {
        match model {
            LevyModel::JumpDiffusionPhaseType { alpha_vec, t_mat, .. } => {
                Some(PhaseType::new(alpha_vec, t_mat))
            }
            _ => None,
        }
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    /// `E[C] = −𝛂𝐓⁻¹𝟏`.
    pub fn mean(&self) -> f64 {
        let m = self.order();
        match self.t.clone().lu().solve(&DVector::from_element(m, 1.0)) {
            Some(x) => -self.alpha.dot(&x),
            None => f64::NAN,
        }
    }

    /// `E[e^{−λC}] = 𝛂(λ𝐈 − 𝐓)⁻¹𝐭` for real `λ ≥ 0`.
    pub fn laplace(&self, l: f64) -> f64 {
        let a = self.shifted(l);
        let x = a.lu().solve(&self.exit).expect("λI − T is nonsingular for λ ≥ 0");
        self.alpha.dot(&x)
    }

    /// Derivative of [`PhaseType::laplace`]: `−𝛂(λ𝐈 − 𝐓)⁻²𝐭`.
    pub fn laplace_prime(&self, l: f64) -> f64 {
        let a = self.shifted(l);
        let lu = a.clone().lu();
        let x = lu.solve(&self.exit).expect("λI − T is nonsingular for λ ≥ 0");
        let y = lu.solve(&x).expect("λI − T is nonsingular for λ ≥ 0");
        -self.alpha.dot(&y)
    }

    /// Complex continuation returning the transform and its derivative.
    /// Near an eigenvalue of 𝐓 the result is non-finite.
    pub fn laplace_c(&self, l: Complex64) -> (Complex64, Complex64) {
        let m = self.order();
        let a = DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { l } else { Complex64::new(0.0, 0.0) };
            d - self.t[(i, j)]
        });
        let exit = self.exit.map(Complex64::from);
        let alpha = self.alpha.map(Complex64::from);
        let lu = a.lu();
        match lu.solve(&exit).and_then(|x| lu.solve(&x).map(|y| (x, y))) {
            Some((x, y)) => (alpha.dot(&x), -alpha.dot(&y)),
            None => {
                let nan = Complex64::new(f64::NAN, f64::NAN);
                (nan, nan)
            }
        }
    }

    fn shifted(&self, l: f64) -> DMatrix<f64> {
        let m = self.order();
        DMatrix::from_fn(m, m, |i, j| if i == j { l } else { 0.0 } - self.t[(i, j)])
    }
}

/// A model `X` together with its refraction rate `δ`.
///
/// The surplus `U` moves like `Y = X − δt` above zero and like `X` below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefractedModel {
    pub x_model: LevyModel,
    pub delta: f64,
}

impl RefractedModel {
    pub fn new(x_model: LevyModel, delta: f64) -> Result<Self> {
        let rm = RefractedModel { x_model, delta };
        rm.validate()?;
        Ok(rm)
    }

    pub fn validate(&self) -> Result<()> {
        self.x_model.validate()?;
        finite("delta", self.delta)?;
        if self.delta < 0.0 {
            return Err(Error::validation(format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.x_model.has_bounded_variation() && self.delta >= self.x_model.drift() {
            return Err(Error::validation(format!(
                "drift constraint violated: bounded-variation models need 0 <= delta < c \
                 (delta = {}, c = {})",
                self.delta,
                self.x_model.drift()
            )));
        }
        Ok(())
    }

    /// The process `Y = X − δt` (drift `c − δ`).
    pub fn y_model(&self) -> LevyModel {
        self.x_model.with_drift(self.x_model.drift() - self.delta)
    }

    /// `E[X₁] − δ`; positive exactly when the net profit condition holds for `U`.
    pub fn net_profit_margin(&self) -> f64 {
        self.x_model.mean_at_one() - self.delta
    }

    /// Right-inverse `φ(q)` of `λ ↦ ψ(λ) − δλ`.
    pub fn varphi_inverse(&self, q: f64) -> Result<f64> {
        self.y_model().phi_inverse(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(6.0, 5.0, 1.0).unwrap()
    }

    fn ph1(c: f64, sigma: f64, eta: f64, alpha: f64) -> LevyModel {
        LevyModel::phase_type(c, sigma, eta, vec![1.0], vec![vec![-alpha]]).unwrap()
    }

    #[test]
    fn exponent_values() {
        assert_eq!(cl().laplace_exponent(1.0).unwrap(), 3.5);
        assert_eq!(LevyModel::brownian(6.0, 6.0).unwrap().laplace_exponent(1.0).unwrap(), 24.0);
        assert_eq!(cl().laplace_exponent(0.0).unwrap(), 0.0);
        assert!(cl().laplace_exponent(f64::NAN).is_err());
    }

    #[test]
    fn means() {
        assert_eq!(cl().mean_at_one(), 1.0);
        assert_eq!(LevyModel::brownian(3.0, 6.0).unwrap().mean_at_one(), 3.0);
        assert!((ph1(6.0, 0.0, 5.0, 2.0).mean_at_one() - 3.5).abs() < 1e-14);
    }

    #[test]
    fn inverses() {
        let bm = LevyModel::brownian(6.0, 6.0).unwrap();
        assert!((bm.phi_inverse(24.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((cl().phi_inverse(3.5).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(cl().phi_inverse(0.0).unwrap(), 0.0);
        let rm = RefractedModel::new(bm, 3.0).unwrap();
        assert_eq!(rm.varphi_inverse(0.0).unwrap(), 0.0);
        assert!((rm.varphi_inverse(21.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phi_of_zero_with_negative_drift() {
        // ψ(λ) = −λ + 2λ² has Φ(0) = 1/2.
        let bm = LevyModel::brownian(-1.0, 2.0).unwrap();
        assert!((bm.phi_inverse(0.0).unwrap() - 0.5).abs() < 1e-15);
        let m = LevyModel::cramer_lundberg(1.0, 5.0, 1.0).unwrap();
        let p = m.phi_inverse(0.0).unwrap();
        assert!(p > 0.0 && m.psi(p).abs() < 1e-12);
    }

    #[test]
    fn margins() {
        let rm = RefractedModel::new(LevyModel::cramer_lundberg(9.0, 5.0, 1.0).unwrap(), 3.0);
        assert_eq!(rm.unwrap().net_profit_margin(), 1.0);
        let bm = LevyModel::brownian(6.0, 6.0).unwrap();
        assert_eq!(RefractedModel::new(bm.clone(), 6.0).unwrap().net_profit_margin(), 0.0);
        assert_eq!(RefractedModel::new(bm, 7.0).unwrap().net_profit_margin(), -1.0);
    }

    #[test]
    fn drift_constraint_rejected() {
        let err = RefractedModel::new(cl(), 6.0).unwrap_err();
        assert!(matches!(err, Error::Validation(ref s) if s.contains("drift constraint")));
        assert!(RefractedModel::new(cl(), -0.1).is_err());
        // Unbounded variation: any δ ≥ 0 is fine.
        assert!(RefractedModel::new(LevyModel::brownian(1.0, 1.0).unwrap(), 5.0).is_ok());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(LevyModel::cramer_lundberg(0.0, 1.0, 1.0).is_err());
        assert!(LevyModel::brownian(1.0, 0.0).is_err());
        assert!(LevyModel::stable(-1.0).is_err());
        assert!(LevyModel::phase_type(1.0, 0.0, 1.0, vec![0.5, 0.4], vec![vec![-1.0, 0.0], vec![0.0, -1.0]]).is_err());
        assert!(LevyModel::phase_type(1.0, 0.0, 1.0, vec![1.0], vec![vec![1.0]]).is_err());
        assert!(LevyModel::phase_type(1.0, 0.0, 1.0, vec![1.0, 0.0], vec![vec![-1.0, 1.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn phase_type_m1_matches_cramer_lundberg() {
        let a = cl();
        let b = ph1(6.0, 0.0, 5.0, 1.0);
        for i in 0..=100 {
            let l = i as f64 * 0.1;
            assert!((a.psi(l) - b.psi(l)).abs() < 1e-14 * a.psi(l).abs().max(1.0));
            assert!((a.psi_prime(l) - b.psi_prime(l)).abs() < 1e-13);
        }
    }

    #[test]
    fn complex_exponent_agrees_on_real_axis() {
        let models = [
            cl(),
            LevyModel::brownian(2.0, 1.5).unwrap(),
            ph1(3.0, 0.5, 2.0, 1.5),
            LevyModel::stable(1.0).unwrap(),
        ];
        for m in &models {
            for &l in &[0.3, 1.0, 4.0] {
                let z = Complex64::from(l);
                assert!((m.psi_c(z).re - m.psi(l)).abs() < 1e-12);
                assert!((m.psi_prime_c(z).re - m.psi_prime(l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let two = LevyModel::phase_type(
            4.0,
            0.3,
            2.0,
            vec![0.3, 0.7],
            vec![vec![-2.0, 1.0], vec![0.5, -3.0]],
        )
        .unwrap();
        for m in [cl(), two, LevyModel::stable(2.0).unwrap()] {
            for &l in &[0.2, 1.0, 3.0] {
                let h = 1e-6;
                let fd = (m.psi(l + h) - m.psi(l - h)) / (2.0 * h);
                assert!((fd - m.psi_prime(l)).abs() < 1e-7, "{}", m.name());
            }
        }
    }
}
