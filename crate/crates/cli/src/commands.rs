//! The five subcommands. Each returns what to write and whether the run
//! counts as a failed audit.

use std::collections::BTreeMap;

use parisian::identities::Suite;
use parisian::mc::McConfig;
use parisian::ruin::{
    classical_ruin_u, exit_up_before_parisian, parisian_laplace, parisian_laplace_to_barrier,
    parisian_ruin_prob, Method, ParisianQuery, RuinResult,
};
use parisian::tables::{TableSpec, REL_TOL};
use parisian::{par, verify, RefractedModel};
use serde_json::json;

use crate::config::{Quantity, RunConfig};
use crate::output::{check_probability, Field, Sheet};
use crate::CliError;

pub enum Body {
    Sheet(Sheet),
    Doc(serde_json::Value),
}

pub struct Outcome {
    pub body: Body,
    /// Set when an audit did not pass; the output is still written.
    pub failure: Option<String>,
    /// Human-readable summary for stderr.
    pub summary: Option<String>,
}

impl Outcome {
    fn sheet(sheet: Sheet) -> Self {
        Outcome { body: Body::Sheet(sheet), failure: None, summary: None }
    }
}

fn evaluate(
    rm: &RefractedModel,
    x: f64,
    r: f64,
    q: f64,
    a: Option<f64>,
    quantity: Quantity,
) -> Result<RuinResult, CliError> {
    let query = || -> Result<ParisianQuery, CliError> {
        let mut qy = ParisianQuery::new(rm.clone(), x, r)?.with_discount(q)?;
        if let Some(a) = a {
            qy = qy.with_barrier(a)?;
        }
        Ok(qy)
    };
    let need_barrier = || {
        a.ok_or_else(|| CliError::Config("this quantity needs an upper barrier `a`".to_string()))
    };
    let res = match quantity {
        Quantity::ParisianRuin => {
            if q != 0.0 {
                return Err(CliError::Config(
                    "parisian_ruin takes q = 0; use quantity = \"laplace\" for discounting".into(),
                ));
            }
            parisian_ruin_prob(&ParisianQuery::new(rm.clone(), x, r)?)?
        }
        Quantity::ClassicalRuin => RuinResult {
            value: classical_ruin_u(rm, x)?,
            method: Method::ClosedForm,
            diagnostics: BTreeMap::new(),
        },
        Quantity::LaplaceToBarrier => {
            need_barrier()?;
            parisian_laplace_to_barrier(&query()?)?
        }
        Quantity::ExitBeforeParisian => {
            need_barrier()?;
            exit_up_before_parisian(&query()?)?
        }
        Quantity::Laplace => {
            if a.is_some() {
                return Err(CliError::Config(
                    "laplace has no barrier; use quantity = \"laplace_to_barrier\"".into(),
                ));
            }
            parisian_laplace(&query()?)?
        }
    };
    if quantity.is_probability(q) {
        check_probability(res.value, "result")?;
    } else if !(res.value.is_finite() && res.value >= 0.0) {
        return Err(CliError::Core(parisian::Error::Numeric(format!(
            "discounted value {} is negative or not finite",
            res.value
        ))));
    }
    Ok(res)
}

fn single(values: Vec<f64>, name: &str) -> Result<f64, CliError> {
    match values.as_slice() {
        [v] => Ok(*v),
        _ => Err(CliError::Config(format!("eval needs exactly one value of {name}, got {}", values.len()))),
    }
}

pub fn eval(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let x = single(cfg.xs(), "x")?;
    let r = single(cfg.rs(), "r")?;
    let delta = single(cfg.deltas(), "delta")?;
    let q = single(cfg.qs(), "q")?;
    let rm = cfg.refracted(delta)?;
    let res = evaluate(&rm, x, r, q, cfg.query.a, cfg.query.quantity)?;
    let doc = json!({
        "value": res.value,
        "method": res.method,
        "diagnostics": res.diagnostics,
        "params": {
            "model": rm.x_model,
            "delta": rm.delta,
            "x": x,
            "r": r,
            "q": q,
            "a": cfg.query.a,
            "quantity": cfg.query.quantity,
        },
    });
    match cfg.output.format {
        Some(crate::config::Format::Csv) => {
            let mut sheet = Sheet::new(vec!["x", "r", "delta", "q", "value", "method"]);
            sheet.push(vec![x.into(), r.into(), delta.into(), q.into(), res.value.into(), res.method.as_str().into()]);
            Ok(Outcome::sheet(sheet))
        }
        _ => Ok(Outcome { body: Body::Doc(doc), failure: None, summary: None }),
    }
}

pub fn table(id: u8, cfg: &RunConfig, mc_check: bool) -> Result<Outcome, CliError> {
    let spec = TableSpec::get(id)?;
    let cells = spec.compute(cfg.workers())?;
    let mc = cfg.mc();
    let mut sheet = Sheet::new(vec![
        "table", "x", "column", "delta", "r", "computed", "printed", "rel_dev", "within_tol", "notes",
        "mc_value", "mc_stderr", "mc_z",
    ]);
    let mut flagged = 0;
    for c in &cells {
        check_probability(c.computed, "table cell")?;
        let note = match (c.flag, c.within_tolerance()) {
            (Some(f), _) => Some(f.to_string()),
            (None, false) => Some(format!("deviation above {REL_TOL:e}")),
            (None, true) => None,
        };
        let mut row: Vec<Field> = vec![
            id.to_string().into(),
            c.x.into(),
            c.column.clone().into(),
            c.delta.into(),
            c.r.into(),
            c.computed.into(),
            c.reference.into(),
            c.rel_dev.into(),
            c.within_tolerance().into(),
            note.clone().into(),
        ];
        if mc_check && note.is_some() {
            flagged += 1;
            let est = verify::simulate_cell(&spec.columns[c.col].rm, c.x, c.r, &mc)?;
            row.extend([est.value.into(), est.stderr.into(), est.z_score(c.computed).into()]);
        } else {
            row.extend([Field::Empty, Field::Empty, Field::Empty]);
        }
        sheet.push(row);
    }
    let off = cells.iter().filter(|c| !c.within_tolerance()).count();
    let mut summary = format!(
        "table {id}: {}/{} cells within {REL_TOL:e} of the printed values",
        cells.len() - off,
        cells.len()
    );
    if mc_check {
        summary.push_str(&format!("; {flagged} flagged cells checked by Monte Carlo"));
    }
    Ok(Outcome { body: Body::Sheet(sheet), failure: None, summary: Some(summary) })
}

pub fn verify(cfg: &RunConfig, corrupt: bool) -> Result<Outcome, CliError> {
    let models =
        cfg.deltas().into_iter().map(|d| cfg.refracted(d)).collect::<Result<Vec<_>, _>>()?;
    let mc: McConfig = cfg.mc();
    let scale = if corrupt { 1.05 } else { 1.0 };
    let report = verify::run(&models, &cfg.xs(), &cfg.rs(), &mc, scale)?;
    let mut sheet =
        Sheet::new(vec!["x", "r", "delta", "formula", "mc", "stderr", "z", "truncation_note"]);
    for p in &report.points {
        check_probability(p.mc, "Monte Carlo estimate")?;
        sheet.push(vec![
            p.x.into(),
            p.r.into(),
            p.delta.into(),
            p.formula.into(),
            p.mc.into(),
            p.stderr.into(),
            p.z.into(),
            p.truncation_note.into(),
        ]);
    }
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    let mut summary = format!(
        "verify: {verdict} ({:.1}% of {} points within 3 SE, max |z| = {:.2})",
        100.0 * report.within_3,
        report.points.len(),
        report.max_z
    );
    if models.iter().any(|m| m.x_model.sigma() > 0.0) {
        summary.push_str("; diffusive paths are time-stepped, so a small discretization bias remains");
    }
    Ok(Outcome {
        body: Body::Sheet(sheet),
        failure: (!report.pass).then(|| "formula and Monte Carlo disagree".to_string()),
        summary: Some(summary),
    })
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (xs, rs, ds, qs) = (cfg.xs(), cfg.rs(), cfg.deltas(), cfg.qs());
    let models = ds.iter().map(|&d| cfg.refracted(d)).collect::<Result<Vec<_>, _>>()?;
    let n = xs.len() * rs.len() * ds.len() * qs.len();
    let point = |k: usize| {
        let (qi, rest) = (k % qs.len(), k / qs.len());
        let (xi, rest) = (rest % xs.len(), rest / xs.len());
        let (ri, di) = (rest % rs.len(), rest / rs.len());
        (di, ri, xi, qi)
    };
    let results = par::map_indexed(n as u64, cfg.workers(), |k| {
        let (di, ri, xi, qi) = point(k as usize);
        evaluate(&models[di], xs[xi], rs[ri], qs[qi], cfg.query.a, cfg.query.quantity)
    })?;
    let mut sheet = Sheet::new(vec!["x", "r", "delta", "q", "value", "method"]);
    for (k, res) in results.into_iter().enumerate() {
        let res = res?;
        let (di, ri, xi, qi) = point(k);
        sheet.push(vec![
            xs[xi].into(),
            rs[ri].into(),
            ds[di].into(),
            qs[qi].into(),
            res.value.into(),
            res.method.as_str().into(),
        ]);
    }
    Ok(Outcome::sheet(sheet))
}

pub fn identities(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut suite = Suite::new(cfg.refracted(cfg.base_delta())?);
    if let Some(q) = &cfg.query.q {
        suite.qs = q.clone();
    }
    if let Some(r) = &cfg.query.r {
        suite.rs = r.clone();
    }
    let checks = suite.run(cfg.workers())?;
    let mut sheet = Sheet::new(vec!["identity", "params", "residual", "tolerance", "pass"]);
    for c in &checks {
        sheet.push(vec![
            c.identity.into(),
            c.params.clone().into(),
            c.residual.into(),
            c.tolerance.into(),
            c.passed().into(),
        ]);
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    Ok(Outcome {
        body: Body::Sheet(sheet),
        failure: (failed > 0).then(|| format!("{failed} of {} identity checks exceed tolerance", checks.len())),
        summary: Some(format!("identities: {}/{} within tolerance", checks.len() - failed, checks.len())),
    })
}
