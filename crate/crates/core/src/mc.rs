//! Monte Carlo oracle for the refracted surplus process.
//!
//! Nothing here touches scale functions: paths are simulated directly from
//! the dynamics `dU = dX − δ1{U > 0}dt`. Models without a diffusion part are
//! simulated exactly, event by event. With a diffusion the path advances in
//! Gaussian steps whose length adapts to the distance from the nearest
//! level of interest, and level crossings between grid points are detected
//! with the Brownian-bridge crossing probability.
//!
//! Each path draws from its own ChaCha8 stream keyed by `(seed, path)`, and
//! paths are reduced in fixed blocks in index order, so estimates do not
//! depend on the number of workers.

use crate::error::{Error, Result};
use crate::model::{LevyModel, PhaseType, RefractedModel};
use crate::ruin::ParisianQuery;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

const BLOCK: u64 = 1024;
/// Diffusive steps keep the nearest level at least this many standard
/// deviations away.
const STEP_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McConfig {
    pub paths: u64,
    pub seed: u64,
    /// Simulation horizon for `< ∞` events; `None` picks one from the query.
    pub horizon: Option<f64>,
    /// Finest time step for diffusive paths; `None` means `r/2000`.
    pub step: Option<f64>,
    pub workers: usize,
    /// Paths that climb to the level where the Lundberg bound on any further
    /// ruin drops below this are stopped as survivors.
    pub escape_eps: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 100_000,
            seed: 42,
            horizon: None,
            step: None,
            workers: crate::par::available_workers(),
            escape_eps: 1e-10,
        }
    }
}

impl McConfig {
    pub fn new(paths: u64, seed: u64) -> Self {
        McConfig { paths, seed, ..McConfig::default() }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    fn validate(&self, r: f64, diffusive: bool) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::validation("at least one path is needed"));
        }
        if self.workers == 0 {
            return Err(Error::validation("workers must be >= 1"));
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h >= 10.0 * r) {
                return Err(Error::validation(format!("horizon must be >= 10 r, got {h}")));
            }
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) || (diffusive && s > r / 500.0) {
                return Err(Error::validation(format!("step must lie in (0, r/500], got {s}")));
            }
        }
        if !(self.escape_eps > 0.0 && self.escape_eps < 1.0) {
            return Err(Error::validation("escape_eps must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub paths: u64,
    /// Whether each path contributes a 0/1 indicator.
    pub indicator: bool,
    /// Paths still undecided at the horizon.
    pub truncated: u64,
    /// Set when more than 0.1% of the paths hit the horizon undecided.
    pub truncation_note: bool,
    /// Lundberg bound on the mass the truncated paths could still contribute.
    pub residual_bound: f64,
}

impl McEstimate {
    /// Standard error under the hypothesis that the true value is `target`.
    /// For indicators this is `sqrt(target(1 − target)/n)`; otherwise the
    /// sample standard error.
    pub fn null_stderr(&self, target: f64) -> f64 {
        if self.indicator {
            (target * (1.0 - target) / self.paths as f64).max(0.0).sqrt()
        } else {
            self.stderr
        }
    }

    /// `|value − target|` in units of [`McEstimate::null_stderr`].
    pub fn z_score(&self, target: f64) -> f64 {
        let se = self.null_stderr(target);
        let diff = (self.value - target).abs();
        if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

/// The expectation being estimated. `q`, `a` and `r` come from the query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    /// `1{κ_r^U < ∞}`.
    ParisianRuin,
    /// `e^{−qκ_a^+} 1{κ_a^+ < κ_r^U}`.
    ExitBeforeParisian,
    /// `e^{−q(κ_r^U − r)} 1{κ_r^U < κ_a^+}`, with `a = ∞` when no barrier.
    DiscountedParisian,
    /// `e^{θY_{ν₀⁻}} 1{ν₀⁻ < ∞}` for the unrefracted-above process `Y`.
    OvershootExp { theta: f64 },
    /// `1{τ₀⁺ ≤ r}` for `X` started at `x`.
    FirstPassageWithinR,
    /// `e^{−qκ_b^+} 1{κ_b^+ < ∞}`.
    FirstPassageUp { b: f64 },
    /// `1{κ₀⁻ < ∞}`.
    ClassicalRuin,
    /// `e^{−qν₀⁻} 1{τ₀⁺ ≤ r after ν₀⁻} 1{ν₀⁻ < ν_a⁺}`: `Y` is run until it
    /// drops below 0, then `X` is run from that level for a time `r`.
    NestedReturn,
}

impl Functional {
    fn is_indicator(&self, q: f64) -> bool {
        match self {
            Functional::ParisianRuin | Functional::ClassicalRuin | Functional::FirstPassageWithinR => {
                true
            }
            Functional::OvershootExp { .. } => false,
            _ => q == 0.0,
        }
    }
}

/// Estimates `P_x(κ_r^U < ∞)`.
pub fn simulate_parisian(rm: &RefractedModel, x: f64, r: f64, cfg: &McConfig) -> Result<McEstimate> {
    let query = ParisianQuery::new(rm.clone(), x, r)?;
    simulate_functional(&query, Functional::ParisianRuin, cfg)
}

/// Estimates the expectation of `functional` for the query's start point.
pub fn simulate_functional(
    query: &ParisianQuery,
    functional: Functional,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let rm = &query.rm;
    if matches!(rm.x_model, LevyModel::StableThreeHalves { .. }) {
        return Err(Error::unsupported("stable paths are not simulated"));
    }
    let diffusive = rm.x_model.sigma() > 0.0;
    cfg.validate(query.r, diffusive)?;
    let plan = Plan::new(query, functional, cfg)?;
    let blocks = cfg.paths.div_ceil(BLOCK);
    let run_block = |b: u64| plan.block(b * BLOCK, ((b + 1) * BLOCK).min(cfg.paths));
    let parts = crate::par::map_indexed(blocks, cfg.workers, run_block)?;

    let mut acc = BlockSum::default();
    for p in &parts {
        acc.merge(p);
    }
    let n = cfg.paths as f64;
    let mean = acc.sum / n;
    let indicator = functional.is_indicator(query.q);
    let stderr = if indicator {
        (mean * (1.0 - mean) / n).max(0.0).sqrt()
    } else if cfg.paths > 1 {
        ((acc.sumsq - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        value: mean,
        stderr,
        paths: cfg.paths,
        indicator,
        truncated: acc.truncated,
        truncation_note: acc.truncated as f64 > 1e-3 * n,
        residual_bound: acc.residual / n,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockSum {
    sum: f64,
    sumsq: f64,
    truncated: u64,
    residual: f64,
}

impl BlockSum {
    fn merge(&mut self, o: &BlockSum) {
        self.sum += o.sum;
        self.sumsq += o.sumsq;
        self.truncated += o.truncated;
        self.residual += o.residual;
    }
}

/// Claim sizes drawn by running the phase-type Markov chain to absorption.
#[derive(Debug, Clone)]
struct ClaimSampler {
    initial: Vec<f64>,
    rates: Vec<f64>,
    /// Cumulative jump probabilities to each state, then to absorption.
    moves: Vec<Vec<f64>>,
}

impl ClaimSampler {
    fn exponential(rate: f64) -> Self {
        ClaimSampler { initial: vec![1.0], rates: vec![rate], moves: vec![vec![0.0, 1.0]] }
    }

    fn phase_type(ph: &PhaseType) -> Self {
        let m = ph.order();
        let initial = cumulative((0..m).map(|i| ph.alpha[i]));
        let rates: Vec<f64> = (0..m).map(|i| -ph.t[(i, i)]).collect();
        let moves = (0..m)
            .map(|i| {
                let probs = (0..m)
                    .map(|j| if i == j { 0.0 } else { ph.t[(i, j)] / rates[i] })
                    .chain(std::iter::once(ph.exit[i] / rates[i]));
                cumulative(probs)
            })
            .collect();
        ClaimSampler { initial, rates, moves }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let m = self.rates.len();
        let mut state = pick(&self.initial, rng.gen());
        let mut total = 0.0;
        loop {
            let e: f64 = rng.sample(Exp1);
            total += e / self.rates[state];
            let next = pick(&self.moves[state], rng.gen());
            if next >= m {
                return total;
            }
            state = next;
        }
    }
}

fn cumulative(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut s = 0.0;
    it.map(|p| {
        s += p;
        s
    })
    .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    let total = cum.last().copied().unwrap_or(1.0);
    cum.iter().position(|&c| u * total < c).unwrap_or(cum.len() - 1)
}

/// Motion of one of `U`, `Y` or `X`: drift above and below zero, diffusion
/// coefficient and compound Poisson claims.
#[derive(Debug, Clone)]
struct Dynamics {
    drift_above: f64,
    drift_below: f64,
    sigma: f64,
    eta: f64,
    claims: Option<ClaimSampler>,
}

impl Dynamics {
    fn of(model: &LevyModel, delta_above: f64, delta_below: f64) -> Self {
        let c = model.drift();
        let (eta, claims) = match model {
            LevyModel::CramerLundbergExp { eta, alpha, .. } => {
                (*eta, Some(ClaimSampler::exponential(*alpha)))
            }
            LevyModel::JumpDiffusionPhaseType { eta, .. } if *eta > 0.0 => {
                let ph = PhaseType::from_model(model).expect("phase-type variant");
                (*eta, Some(ClaimSampler::phase_type(&ph)))
            }
            _ => (0.0, None),
        };
        Dynamics {
            drift_above: c - delta_above,
            drift_below: c - delta_below,
            sigma: model.sigma(),
            eta,
            claims,
        }
    }

    fn drift(&self, u: f64) -> f64 {
        if u >= 0.0 {
            self.drift_above
        } else {
            self.drift_below
        }
    }

    fn next_jump(&self, t: f64, rng: &mut ChaCha8Rng) -> f64 {
        if self.eta > 0.0 {
            let e: f64 = rng.sample(Exp1);
            t + e / self.eta
        } else {
            f64::INFINITY
        }
    }
}

/// When a path stops.
#[derive(Debug, Clone, Copy)]
struct Limits {
    /// Parisian delay; `None` disables the excursion clock.
    r: Option<f64>,
    /// Stop on reaching this level from below.
    upper: Option<f64>,
    /// Stop on the first passage below zero.
    stop_below: bool,
    horizon: f64,
    /// Stop as a survivor above this level.
    escape: f64,
    h_min: f64,
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Parisian(f64),
    Upper(f64),
    Down { t: f64, level: f64 },
    Escaped,
    Horizon { level: f64 },
}

/// Brownian-bridge probability that a path from `a` to `b` (both on the same
/// side of `level`) touched `level` during a step of variance `var`.
fn bridge_hit(a: f64, b: f64, level: f64, var: f64) -> f64 {
    let (da, db) = (a - level, b - level);
    if da * db <= 0.0 {
        return 1.0;
    }
    (-2.0 * da * db / var).exp()
}

/// Draws the bridge crossing event, skipping the uniform when the
/// probability is negligible.
fn bridge_crossed(a: f64, b: f64, level: f64, var: f64, rng: &mut ChaCha8Rng) -> bool {
    if 2.0 * (a - level) * (b - level) > 40.0 * var {
        return false;
    }
    rng.gen::<f64>() < bridge_hit(a, b, level, var)
}

fn run_path(d: &Dynamics, lim: &Limits, x0: f64, rng: &mut ChaCha8Rng) -> Outcome {
    let mut t = 0.0;
    let mut u = x0;
    if let Some(up) = lim.upper {
        if u >= up {
            return Outcome::Upper(0.0);
        }
    }
    if lim.stop_below && u < 0.0 {
        return Outcome::Down { t: 0.0, level: u };
    }
    // Start of the current excursion below zero.
    let mut g = if u < 0.0 { Some(0.0) } else { None };
    let mut jump_at = d.next_jump(t, rng);
    loop {
        if u >= lim.escape {
            return Outcome::Escaped;
        }
        let deadline = match (g, lim.r) {
            (Some(g0), Some(r)) => g0 + r,
            _ => f64::INFINITY,
        };
        let mut t_end = jump_at.min(lim.horizon).min(deadline);
        if d.sigma > 0.0 {
            t_end = t_end.min(t + adaptive_step(d, lim, u));
            if let Some(out) = diffusion_step(d, lim, &mut t, &mut u, &mut g, t_end, deadline, rng) {
                return out;
            }
        } else if let Some(out) = drift_segment(d, lim, &mut t, &mut u, &mut g, t_end, deadline) {
            return out;
        }
        if t >= jump_at {
            let claim = d.claims.as_ref().map_or(0.0, |c| c.sample(rng));
            let before = u;
            u -= claim;
            jump_at = d.next_jump(t, rng);
            if before >= 0.0 && u < 0.0 {
                if lim.stop_below {
                    return Outcome::Down { t, level: u };
                }
                g = Some(t);
            }
        }
        if t >= lim.horizon {
            return Outcome::Horizon { level: u };
        }
    }
}

fn adaptive_step(d: &Dynamics, lim: &Limits, u: f64) -> f64 {
    let mut dist = u.abs();
    if let Some(up) = lim.upper {
        dist = dist.min((up - u).abs());
    }
    if lim.escape.is_finite() {
        dist = dist.min((lim.escape - u).abs());
    }
    let by_noise = (dist / (STEP_SIGMAS * d.sigma)).powi(2);
    let drift = d.drift(u).abs();
    let by_drift = if drift > 0.0 { 0.25 * dist / drift } else { f64::INFINITY };
    by_noise.min(by_drift).max(lim.h_min)
}

/// Deterministic motion up to `t_end` (no diffusion); returns an outcome if
/// the path stops on the way.
fn drift_segment(
    d: &Dynamics,
    lim: &Limits,
    t: &mut f64,
    u: &mut f64,
    g: &mut Option<f64>,
    t_end: f64,
    deadline: f64,
) -> Option<Outcome> {
    if *u >= 0.0 {
        let v = d.drift_above;
        let target = lim.upper.unwrap_or(f64::INFINITY).min(lim.escape);
        if v > 0.0 && target.is_finite() {
            let t_hit = *t + (target - *u) / v;
            if t_hit <= t_end {
                *t = t_hit;
                *u = target;
                return Some(if lim.upper == Some(target) { Outcome::Upper(t_hit) } else { Outcome::Escaped });
            }
        }
        *u += v * (t_end - *t);
        *t = t_end;
        if *u < 0.0 {
            // Only possible with a nonpositive drift above zero.
            if lim.stop_below {
                return Some(Outcome::Down { t: *t, level: 0.0 });
            }
            *g = Some(*t);
        }
        return None;
    }
    let v = d.drift_below;
    if v > 0.0 {
        let t_ret = *t + (-*u) / v;
        // Reaching zero exactly at the deadline still counts as ruin.
        if t_ret <= t_end && t_ret < deadline {
            *t = t_ret;
            *u = 0.0;
            *g = None;
            if lim.upper == Some(0.0) {
                return Some(Outcome::Upper(t_ret));
            }
            return None;
        }
    }
    *u += v * (t_end - *t);
    *t = t_end;
    if *t >= deadline {
        return Some(Outcome::Parisian(deadline));
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn diffusion_step(
    d: &Dynamics,
    lim: &Limits,
    t: &mut f64,
    u: &mut f64,
    g: &mut Option<f64>,
    t_end: f64,
    deadline: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Outcome> {
    let h = t_end - *t;
    let (u0, t0) = (*u, *t);
    let z: f64 = rng.sample(StandardNormal);
    let u1 = u0 + d.drift(u0) * h + d.sigma * h.sqrt() * z;
    let var = d.sigma * d.sigma * h;
    let interp = |level: f64| t0 + h * ((level - u0) / (u1 - u0)).clamp(0.0, 1.0);

    if let Some(up) = lim.upper {
        if u1 >= up {
            return Some(Outcome::Upper(interp(up)));
        }
        if bridge_crossed(u0, u1, up, var, rng) {
            return Some(Outcome::Upper(t0 + 0.5 * h));
        }
    }
    if u1 >= lim.escape {
        return Some(Outcome::Escaped);
    }
    *t = t_end;
    *u = u1;
    if u0 >= 0.0 {
        let crossed = u1 < 0.0 || bridge_crossed(u0, u1, 0.0, var, rng);
        if crossed && lim.stop_below {
            let tc = if u1 < 0.0 { interp(0.0) } else { t0 + 0.5 * h };
            return Some(Outcome::Down { t: tc, level: 0.0 });
        }
        if u1 < 0.0 {
            let start = interp(0.0);
            *g = Some(start);
            if let Some(r) = lim.r {
                if *t >= start + r {
                    return Some(Outcome::Parisian(start + r));
                }
            }
        }
        return None;
    }
    if u1 >= 0.0 {
        *g = None;
        return None;
    }
    if lim.r.is_some() && bridge_crossed(u0, u1, 0.0, var, rng) {
        // Touched zero inside the step: the clock restarts from there.
        *g = Some(t0 + 0.5 * h);
        return None;
    }
    if *t >= deadline {
        return Some(Outcome::Parisian(deadline));
    }
    None
}

/// Largest `R > 0` with `ψ_Y(−R) = 0`: the Lundberg exponent, which bounds
/// the probability of ever going below zero from level `u` by `e^{−Ru}`.
fn lundberg_exponent(y: &LevyModel) -> Option<f64> {
    if y.mean_at_one() <= 0.0 {
        return None;
    }
    let pole = match y {
        LevyModel::CramerLundbergExp { alpha, .. } => *alpha,
        LevyModel::JumpDiffusionPhaseType { eta, .. } if *eta > 0.0 => {
            let ph = PhaseType::from_model(y)?;
            -ph.t.complex_eigenvalues().iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
        }
        _ => f64::INFINITY,
    };
    let psi = |s: f64| y.psi(-s);
    let mut hi = if pole.is_finite() { pole } else { 1.0 };
    if !pole.is_finite() {
        while psi(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
    } else {
        // Approach the pole until ψ turns positive.
        let mut s = 0.5 * pole;
        while psi(s) <= 0.0 || !psi(s).is_finite() {
            s = 0.5 * (s + pole);
            if pole - s < 1e-14 * pole {
                return None;
            }
        }
        hi = s;
    }
    let mut lo = 0.0;
    // ψ_Y(−s) < 0 just right of 0 and > 0 at `hi`.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if psi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Everything a worker needs to simulate paths for one query.
struct Plan {
    functional: Functional,
    x: f64,
    q: f64,
    r: f64,
    seed: u64,
    first: Dynamics,
    first_limits: Limits,
    /// `X` dynamics for the second leg of [`Functional::NestedReturn`].
    second: Option<(Dynamics, Limits)>,
    lundberg: Option<f64>,
}

/// `Var(X₁) = ψ''(0)`, by a central difference.
fn variance_rate(model: &LevyModel) -> f64 {
    let h = 1e-3;
    let f = |l: f64| model.psi(l);
    let v = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
    if v.is_finite() { v.max(0.0) } else { 0.0 }
}

impl Plan {
    fn new(query: &ParisianQuery, functional: Functional, cfg: &McConfig) -> Result<Self> {
        let rm = &query.rm;
        let (x, r, q) = (query.x, query.r, query.q);
        let delta = rm.delta;
        let margin = rm.net_profit_margin().max(0.1);
        let lundberg = lundberg_exponent(&rm.y_model());
        let escape_level = lundberg.map_or(f64::INFINITY, |big_r| (1.0 / cfg.escape_eps).ln() / big_r);
        let h_min = cfg.step.unwrap_or(r / 2000.0);
        // Long enough for a path drifting at the net profit rate to reach the
        // escape level even when it runs 8 standard deviations behind.
        let climb = if escape_level.is_finite() {
            let dist = (escape_level - x).max(0.0);
            let sd = variance_rate(&rm.x_model).sqrt();
            let root = (8.0 * sd + (64.0 * sd * sd + 4.0 * margin * dist).sqrt()) / (2.0 * margin);
            (root * root).max(2.0 * dist / margin)
        } else {
            0.0
        };
        let mut horizon = cfg.horizon.unwrap_or((50.0 * r).max(100.0 / margin).max(climb));

        let need_barrier = || {
            query.a.ok_or_else(|| Error::validation("this functional needs a barrier a"))
        };
        let u_dyn = Dynamics::of(&rm.x_model, delta, 0.0);
        let y_dyn = Dynamics::of(&rm.x_model, delta, delta);
        let x_dyn = Dynamics::of(&rm.x_model, 0.0, 0.0);
        let base = Limits { r: None, upper: None, stop_below: false, horizon, escape: escape_level, h_min };
        let mut second = None;
        let (first, first_limits) = match functional {
            Functional::ParisianRuin => (u_dyn, Limits { r: Some(r), ..base }),
            Functional::ClassicalRuin => (u_dyn, Limits { stop_below: true, ..base }),
            Functional::DiscountedParisian => match query.a {
                Some(a) => {
                    horizon = cfg.horizon.unwrap_or(horizon.max(3.0 * (a - x) / margin));
                    (u_dyn, Limits { r: Some(r), upper: Some(a), escape: f64::INFINITY, horizon, ..base })
                }
                None => (u_dyn, Limits { r: Some(r), ..base }),
            },
            Functional::ExitBeforeParisian => {
                let a = need_barrier()?;
                horizon = cfg.horizon.unwrap_or(horizon.max(3.0 * (a - x) / margin));
                (u_dyn, Limits { r: Some(r), upper: Some(a), escape: f64::INFINITY, horizon, ..base })
            }
            Functional::FirstPassageUp { b } => {
                if b < x.max(0.0) {
                    return Err(Error::validation("first passage needs b >= max(x, 0)"));
                }
                horizon = cfg.horizon.unwrap_or(horizon.max(3.0 * (b - x) / margin));
                (u_dyn, Limits { upper: Some(b), escape: f64::INFINITY, horizon, ..base })
            }
            Functional::OvershootExp { theta } => {
                if !(theta > 0.0 && x > 0.0) {
                    return Err(Error::validation("overshoot needs theta > 0 and x > 0"));
                }
                (y_dyn, Limits { stop_below: true, ..base })
            }
            Functional::FirstPassageWithinR => (
                x_dyn,
                Limits { upper: Some(0.0), escape: f64::INFINITY, horizon: r, ..base },
            ),
            Functional::NestedReturn => {
                let a = need_barrier()?;
                second = Some((
                    x_dyn,
                    Limits { upper: Some(0.0), escape: f64::INFINITY, horizon: r, ..base },
                ));
                (y_dyn, Limits { upper: Some(a), stop_below: true, escape: f64::INFINITY, ..base })
            }
        };
        Ok(Plan { functional, x, q, r, seed: cfg.seed, first, first_limits, second, lundberg })
    }

    fn block(&self, from: u64, to: u64) -> BlockSum {
        let mut acc = BlockSum::default();
        for path in from..to {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(path);
            let (v, trunc) = self.one(&mut rng);
            acc.sum += v;
            acc.sumsq += v * v;
            if let Some(level) = trunc {
                acc.truncated += 1;
                acc.residual += self.lundberg.map_or(1.0, |big_r| (-big_r * level.max(0.0)).exp());
            }
        }
        acc
    }

    /// Value of the functional on one path, and the level if it was cut at
    /// the horizon.
    fn one(&self, rng: &mut ChaCha8Rng) -> (f64, Option<f64>) {
        if matches!(self.functional, Functional::ExitBeforeParisian) && self.first_limits.upper == Some(self.x) {
            return (1.0, None);
        }
        let out = run_path(&self.first, &self.first_limits, self.x, rng);
        if let Outcome::Horizon { level } = out {
            return (0.0, Some(level));
        }
        let disc = |t: f64| (-self.q * t).exp();
        let v = match (self.functional, out) {
            (Functional::ParisianRuin, Outcome::Parisian(_)) => 1.0,
            (Functional::DiscountedParisian, Outcome::Parisian(t)) => disc(t - self.r),
            (Functional::ExitBeforeParisian, Outcome::Upper(t)) => disc(t),
            (Functional::FirstPassageUp { .. }, Outcome::Upper(t)) => disc(t),
            (Functional::ClassicalRuin, Outcome::Down { .. }) => 1.0,
            (Functional::OvershootExp { theta }, Outcome::Down { level, .. }) => (theta * level).exp(),
            (Functional::FirstPassageWithinR, Outcome::Upper(_)) => 1.0,
            (Functional::NestedReturn, Outcome::Down { t, level }) => {
                let (dynm, lim) = self.second.as_ref().expect("second leg");
                match run_path(dynm, lim, level, rng) {
                    Outcome::Upper(_) => disc(t),
                    _ => 0.0,
                }
            }
            _ => 0.0,
        };
        (v, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cl(c: f64, delta: f64) -> RefractedModel {
        RefractedModel::new(LevyModel::cramer_lundberg(c, 5.0, 1.0).unwrap(), delta).unwrap()
    }

    #[test]
    fn lundberg_exponents() {
        // CL-exp: R = α − η/c; Brownian: R = 2c/σ².
        let r = lundberg_exponent(&LevyModel::cramer_lundberg(6.0, 5.0, 1.0).unwrap()).unwrap();
        assert!((r - 1.0 / 6.0).abs() < 1e-12);
        let r = lundberg_exponent(&LevyModel::brownian(4.0, 6.0).unwrap()).unwrap();
        assert!((r - 8.0 / 36.0).abs() < 1e-12);
        let ph = LevyModel::phase_type(6.0, 0.0, 5.0, vec![1.0], vec![vec![-1.0]]).unwrap();
        assert!((lundberg_exponent(&ph).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!(lundberg_exponent(&LevyModel::cramer_lundberg(4.0, 5.0, 1.0).unwrap()).is_none());
    }

    #[test]
    fn claim_sampler_mean() {
        let ph = PhaseType::new(&[0.3, 0.7], &[vec![-2.0, 1.0], vec![0.5, -1.5]]);
        let s = ClaimSampler::phase_type(&ph);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - ph.mean()).abs() < 0.01 * ph.mean(), "{mean} vs {}", ph.mean());
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let cfg = McConfig::new(5000, 11).with_workers(1);
        let a = simulate_parisian(&cl(9.0, 3.0), 1.0, 1.0, &cfg).unwrap();
        let b = simulate_parisian(&cl(9.0, 3.0), 1.0, 1.0, &cfg.clone().with_workers(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exit_at_barrier_is_one() {
        let query = ParisianQuery::new(cl(9.0, 3.0), 2.0, 1.0).unwrap().with_barrier(2.0).unwrap();
        let est = simulate_functional(&query, Functional::ExitBeforeParisian, &McConfig::new(100, 1)).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn far_start_survives() {
        let est = simulate_parisian(&cl(9.0, 3.0), 200.0, 2.0, &McConfig::new(20_000, 3)).unwrap();
        assert!(est.value <= 1e-4);
    }

    #[test]
    fn config_validation() {
        let rm = RefractedModel::new(LevyModel::brownian(6.0, 6.0).unwrap(), 0.0).unwrap();
        assert!(simulate_parisian(&rm, 1.0, 1.0, &McConfig::new(0, 1)).is_err());
        assert!(simulate_parisian(&rm, 1.0, 1.0, &McConfig::new(10, 1).with_step(0.01)).is_err());
        let stable = RefractedModel::new(LevyModel::stable(1.0).unwrap(), 0.0).unwrap();
        assert!(matches!(
            simulate_parisian(&stable, 1.0, 1.0, &McConfig::new(10, 1)),
            Err(Error::Unsupported(_))
        ));
    }
}
