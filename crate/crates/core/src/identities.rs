//! Audit suite of identities the formulas must satisfy.
//!
//! Every check reduces to a nonnegative residual and a tolerance. None of them
//! is used by the production formulas, so a failing check points at a real
//! inconsistency rather than at a circular definition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lawx::{exp_kernel_identity_check, PositiveLaw};
use crate::model::{LevyModel, RefractedModel};
use crate::par;
use crate::ruin::{
    classical_ruin_u, classical_ruin_y, exit_up_before_parisian, parisian_laplace,
    parisian_laplace_to_barrier, parisian_ruin_prob, ParisianQuery,
};
use crate::scale::{convolution_identity_residual, symmetry_identity_residual, ScaleContext};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub identity: &'static str,
    pub params: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tolerance
    }
}

/// Parameters of one audit run.
#[derive(Debug, Clone)]
pub struct Suite {
    pub rm: RefractedModel,
    pub qs: Vec<f64>,
    pub rs: Vec<f64>,
    /// Include the Laplace-in-r audits, which cost a few thousand weighted
    /// integrals per grid point.
    pub laplace_in_r: bool,
}

impl Suite {
    pub fn new(rm: RefractedModel) -> Self {
        Suite { rm, qs: vec![0.0, 0.05, 0.1], rs: vec![0.5, 1.0, 2.0], laplace_in_r: true }
    }

    pub fn run(&self, workers: usize) -> Result<Vec<Check>> {
        let jobs = self.jobs();
        let out = par::map_indexed(jobs.len() as u64, workers, |k| jobs[k as usize]())?;
        Ok(out.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
    }

    fn jobs(&self) -> Vec<Job<'_>> {
        let mut jobs: Vec<Job<'_>> = Vec::new();
        let rm = &self.rm;
        for &q in &self.qs {
            for &r in &self.rs {
                jobs.push(Box::new(move || exp_kernel(&rm.x_model, q, r).map(|c| vec![c])));
            }
        }
        jobs.push(Box::new(move || convolution(rm)));
        jobs.push(Box::new(move || symmetry(&rm.x_model)));
        jobs.push(Box::new(move || classical_forms(rm)));
        for &r in &self.rs {
            jobs.push(Box::new(move || alt_denominator(rm, r)));
            jobs.push(Box::new(move || complementarity(rm, r)));
            for &q in self.qs.iter().filter(|&&q| q > 0.0) {
                jobs.push(Box::new(move || barrier_limit(rm, r, q).map(|c| vec![c])));
            }
        }
        if self.laplace_in_r && closed_form_law(&rm.x_model) {
            for theta in [0.5, 1.0] {
                for y in [0.0, 1.0] {
                    jobs.push(Box::new(move || laplace_tail(&rm.x_model, theta, y).map(|c| vec![c])));
                    for q in [0.0, 0.1] {
                        jobs.push(Box::new(move || {
                            laplace_scale(&rm.x_model, theta, q, y).map(|c| vec![c])
                        }));
                    }
                }
            }
        }
        jobs
    }
}

type Job<'a> = Box<dyn Fn() -> Result<Vec<Check>> + Sync + Send + 'a>;

fn closed_form_law(m: &LevyModel) -> bool {
    matches!(m, LevyModel::CramerLundbergExp { .. } | LevyModel::BrownianRisk { .. })
}

/// `∫W^(q)(z)(z/r)P(X_r∈dz) = e^{qr}`.
pub fn exp_kernel(model: &LevyModel, q: f64, r: f64) -> Result<Check> {
    let law = PositiveLaw::build(model, r)?;
    let ctx = ScaleContext::new(&RefractedModel::new(model.clone(), 0.0)?, q)?;
    Ok(Check {
        identity: "exponential kernel",
        params: format!("q={q} r={r}"),
        residual: exp_kernel_identity_check(&law, &ctx)?,
        tolerance: 1e-7,
    })
}

/// Convolution identity linking `W^(q)` of X with `𝕎^(p)` of Y, on the grid
/// `p, q ∈ {0, 0.05, 0.2}`, `x ∈ {0.5, 1, 3, 10}`.
pub fn convolution(rm: &RefractedModel) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in [0.0, 0.05, 0.2] {
        let at_p = ScaleContext::new(rm, p)?;
        for q in [0.0, 0.05, 0.2] {
            let at_q = ScaleContext::new(rm, q)?;
            for x in [0.5, 1.0, 3.0, 10.0] {
                out.push(Check {
                    identity: "convolution",
                    params: format!("p={p} q={q} x={x}"),
                    residual: convolution_identity_residual(&at_p, &at_q, x)?,
                    tolerance: 1e-8,
                });
            }
        }
    }
    Ok(out)
}

/// The unrefracted special case `(q−p)W^(p)*W^(q) = W^(q) − W^(p)`.
pub fn symmetry(model: &LevyModel) -> Result<Vec<Check>> {
    let rm = RefractedModel::new(model.clone(), 0.0)?;
    let mut out = Vec::new();
    for p in [0.0, 0.05, 0.2] {
        let at_p = ScaleContext::new(&rm, p)?;
        for q in [0.0, 0.05, 0.2] {
            let at_q = ScaleContext::new(&rm, q)?;
            for x in [0.5, 1.0, 3.0, 10.0] {
                out.push(Check {
                    identity: "convolution, no refraction",
                    params: format!("p={p} q={q} x={x}"),
                    residual: symmetry_identity_residual(&at_p, &at_q, x)?,
                    tolerance: 1e-8,
                });
            }
        }
    }
    Ok(out)
}

/// Classical ruin of Y and of U agree for `x > 0`.
pub fn classical_forms(rm: &RefractedModel) -> Result<Vec<Check>> {
    [0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0]
        .into_iter()
        .map(|x| {
            Ok(Check {
                identity: "classical ruin of Y vs U",
                params: format!("x={x}"),
                residual: (classical_ruin_y(rm, x)? - classical_ruin_u(rm, x)?).abs(),
                tolerance: 1e-10,
            })
        })
        .collect()
}

/// The two denominators of the Parisian ruin probability coincide.
pub fn alt_denominator(rm: &RefractedModel, r: f64) -> Result<Vec<Check>> {
    if rm.net_profit_margin() <= 0.0 {
        return Ok(Vec::new());
    }
    let res = parisian_ruin_prob(&ParisianQuery::new(rm.clone(), 1.0, r)?)?;
    let gap = res
        .diagnostics
        .get("alt_denominator_gap")
        .copied()
        .ok_or_else(|| Error::numeric("denominator diagnostic missing"))?;
    Ok(vec![Check {
        identity: "rewritten denominator",
        params: format!("r={r}"),
        residual: gap,
        tolerance: 1e-9,
    }])
}

/// At `q = 0`, leaving through the barrier and Parisian ruin before it are
/// complementary, and the exit probability is a ratio of survival
/// probabilities.
pub fn complementarity(rm: &RefractedModel, r: f64) -> Result<Vec<Check>> {
    if rm.net_profit_margin() <= 0.0 {
        return Ok(Vec::new());
    }
    let a = 5.0;
    let survival_a = 1.0 - parisian_ruin_prob(&ParisianQuery::new(rm.clone(), a, r)?)?.value;
    let mut out = Vec::new();
    for x in [-1.0, 0.0, 1.0, 3.0] {
        let query = ParisianQuery::new(rm.clone(), x, r)?.with_barrier(a)?;
        let i = parisian_laplace_to_barrier(&query)?.value;
        let iii = exit_up_before_parisian(&query)?.value;
        out.push(Check {
            identity: "barrier complementarity",
            params: format!("x={x} a={a} r={r}"),
            residual: (i + iii - 1.0).abs(),
            tolerance: 1e-8,
        });
        let survival_x = 1.0 - parisian_ruin_prob(&ParisianQuery::new(rm.clone(), x, r)?)?.value;
        out.push(Check {
            identity: "exit ratio",
            params: format!("x={x} a={a} r={r}"),
            residual: (iii - survival_x / survival_a).abs(),
            tolerance: 1e-9,
        });
    }
    Ok(out)
}

/// The unbounded discounted transform is the far-barrier limit of the
/// barrier one.
pub fn barrier_limit(rm: &RefractedModel, r: f64, q: f64) -> Result<Check> {
    let query = ParisianQuery::new(rm.clone(), 1.0, r)?.with_discount(q)?;
    let res = parisian_laplace(&query)?;
    Ok(Check {
        identity: "far-barrier limit",
        params: format!("q={q} r={r}"),
        residual: res.diagnostics.get("barrier_limit_gap").copied().unwrap_or(f64::NAN),
        tolerance: 1e-6,
    })
}

const R_NODES: usize = 2000;
const R_MIN: f64 = 1e-7;

/// `∫₀^∞ e^{−θr} g(r) dr` with log-spaced trapezoids, for `g(r) ≤ e^{γr}`
/// up to a constant. The grid ends at `40/θ` or where `e^{−(θ−γ)r}` falls
/// below 1e-6, whichever comes first; past that point the compound-Poisson
/// series would need hundreds of terms for no visible gain. The first sliver
/// `(0, R_MIN]` is taken as a rectangle.
fn laplace_in_r<G: Fn(f64) -> Result<f64>>(theta: f64, gamma: f64, g: G) -> Result<f64> {
    let r_max = (40.0 / theta).min(1e6f64.ln() / (theta - gamma));
    let (lo, hi) = (R_MIN.ln(), r_max.ln());
    let h = (hi - lo) / (R_NODES - 1) as f64;
    let mut prev: Option<f64> = None;
    let mut total = 0.0;
    for k in 0..R_NODES {
        let r = (lo + h * k as f64).exp();
        // dr = r d(ln r)
        let v = (-theta * r).exp() * g(r)? * r;
        match prev {
            None => total += v,
            Some(p) => total += 0.5 * h * (p + v),
        }
        prev = Some(v);
    }
    Ok(total)
}

/// `∫₀^∞ e^{−θr} ∫_y^∞ (z/r)P(X_r∈dz) dr = e^{−Φ(θ)y}/Φ(θ)`.
pub fn laplace_tail(model: &LevyModel, theta: f64, y: f64) -> Result<Check> {
    let lhs = laplace_in_r(theta, 0.0, |r| {
        let law = PositiveLaw::build(model, r)?;
        Ok(law.weighted_integral(|z| if z >= y { 1.0 } else { 0.0 }, &[y])? / r)
    })?;
    let big_phi = model.phi_inverse(theta)?;
    let rhs = (-big_phi * y).exp() / big_phi;
    Ok(Check {
        identity: "Laplace in r, tail",
        params: format!("theta={theta} y={y}"),
        residual: ((lhs - rhs) / rhs).abs(),
        tolerance: 1e-3,
    })
}

/// `∫₀^∞ e^{−θr} ∫W^(q)(z−y)(z/r)P(X_r∈dz) dr = e^{−Φ(θ)y}/(θ−q)`.
pub fn laplace_scale(model: &LevyModel, theta: f64, q: f64, y: f64) -> Result<Check> {
    let ctx = ScaleContext::new(&RefractedModel::new(model.clone(), 0.0)?, q)?;
    let lhs = laplace_in_r(theta, q, |r| {
        let law = PositiveLaw::build(model, r)?;
        Ok(law.weighted_integral(|z| ctx.scale_w(z - y), &[y])? / r)
    })?;
    let rhs = (-model.phi_inverse(theta)? * y).exp() / (theta - q);
    Ok(Check {
        identity: "Laplace in r, scale function",
        params: format!("theta={theta} q={q} y={y}"),
        residual: ((lhs - rhs) / rhs).abs(),
        tolerance: 1e-3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cl(c: f64, delta: f64) -> RefractedModel {
        RefractedModel::new(LevyModel::cramer_lundberg(c, 5.0, 1.0).unwrap(), delta).unwrap()
    }

    #[test]
    fn laplace_audits_cramer_lundberg() {
        let m = cl(9.0, 0.0).x_model;
        for c in [laplace_tail(&m, 1.0, 1.0).unwrap(), laplace_scale(&m, 0.5, 0.1, 1.0).unwrap()] {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn laplace_audits_brownian() {
        let m = LevyModel::brownian(6.0, 6.0).unwrap();
        for c in [laplace_tail(&m, 0.5, 0.0).unwrap(), laplace_scale(&m, 1.0, 0.0, 0.0).unwrap()] {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn fast_suite_passes() {
        let mut suite = Suite::new(cl(9.0, 3.0));
        suite.laplace_in_r = false;
        let checks = suite.run(1).unwrap();
        assert!(checks.len() > 80);
        for c in &checks {
            assert!(c.passed(), "{c:?}");
        }
    }
}
