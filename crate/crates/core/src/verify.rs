//! Formula against Monte Carlo on a grid of start points and delays.

use serde::Serialize;

use crate::error::Result;
use crate::mc::{simulate_functional, Functional, McConfig, McEstimate};
use crate::model::RefractedModel;
use crate::ruin::ParisianQuery;
use crate::tables::cell_value;

#[derive(Debug, Clone, Serialize)]
pub struct Point {
    pub x: f64,
    pub r: f64,
    pub delta: f64,
    pub formula: f64,
    pub mc: f64,
    pub stderr: f64,
    pub z: f64,
    pub truncation_note: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub points: Vec<Point>,
    pub pass: bool,
    /// Share of points with `|z| ≤ 3`.
    pub within_3: f64,
    pub max_z: f64,
}

/// A grid passes when at least 95% of its points have `|z| ≤ 3` and none
/// has `|z| > 5`.
pub fn judge(zs: &[f64]) -> (bool, f64, f64) {
    if zs.is_empty() {
        return (true, 1.0, 0.0);
    }
    let within = zs.iter().filter(|z| **z <= 3.0).count() as f64 / zs.len() as f64;
    let max_z = zs.iter().cloned().fold(0.0, f64::max);
    (within >= 0.95 && max_z <= 5.0, within, max_z)
}

/// Monte Carlo estimate of the quantity tabulated by [`cell_value`]:
/// Parisian ruin for `r > 0`, classical ruin of U for `r = 0`.
pub fn simulate_cell(rm: &RefractedModel, x: f64, r: f64, cfg: &McConfig) -> Result<McEstimate> {
    if r == 0.0 {
        // The delay only sets the default horizon here.
        let query = ParisianQuery::new(rm.clone(), x, 1.0)?;
        simulate_functional(&query, Functional::ClassicalRuin, cfg)
    } else {
        simulate_functional(&ParisianQuery::new(rm.clone(), x, r)?, Functional::ParisianRuin, cfg)
    }
}

/// Runs every `(model, x, r)` combination. `scale` multiplies the formula
/// value before comparison; it is 1 except when exercising the harness.
pub fn run(
    models: &[RefractedModel],
    xs: &[f64],
    rs: &[f64],
    cfg: &McConfig,
    scale: f64,
) -> Result<Report> {
    let mut points = Vec::new();
    for rm in models {
        for &r in rs {
            for &x in xs {
                let formula = cell_value(rm, x, r)? * scale;
                let est = simulate_cell(rm, x, r, cfg)?;
                points.push(Point {
                    x,
                    r,
                    delta: rm.delta,
                    formula,
                    mc: est.value,
                    stderr: est.stderr,
                    z: est.z_score(formula),
                    truncation_note: est.truncation_note,
                });
            }
        }
    }
    let zs: Vec<f64> = points.iter().map(|p| p.z).collect();
    let (pass, within_3, max_z) = judge(&zs);
    Ok(Report { points, pass, within_3, max_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevyModel;

    #[test]
    fn judging_rule() {
        assert!(judge(&[]).0);
        assert!(judge(&[0.5; 20]).0);
        let mut zs = vec![0.5; 19];
        zs.push(3.5);
        assert!(judge(&zs).0);
        zs.push(3.5);
        assert!(!judge(&zs).0);
        assert!(!judge(&[0.1, 5.1]).0);
    }

    #[test]
    fn corrupted_formula_is_caught() {
        let rm = RefractedModel::new(LevyModel::cramer_lundberg(9.0, 5.0, 1.0).unwrap(), 3.0).unwrap();
        let cfg = McConfig::new(20_000, 7).with_workers(1);
        let good = run(std::slice::from_ref(&rm), &[1.0], &[1.0], &cfg, 1.0).unwrap();
        assert!(good.pass, "{good:?}");
        let bad = run(&[rm], &[1.0], &[1.0], &cfg, 1.5).unwrap();
        assert!(!bad.pass, "{bad:?}");
    }
}
