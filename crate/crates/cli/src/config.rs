//! Run configuration: a TOML document with flat sections, overridable from
//! the command line.

use std::path::Path;

use parisian::mc::McConfig;
use parisian::{LevyModel, RefractedModel};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum ModelSpec {
    CramerLundberg { c: f64, eta: f64, alpha: f64 },
    Brownian { c: f64, sigma: f64 },
    PhaseType { c: f64, sigma: f64, eta: f64, alpha_vec: Vec<f64>, t_mat: Vec<Vec<f64>> },
    Stable { c: f64 },
}

impl ModelSpec {
    fn premium(&self) -> f64 {
        match self {
            ModelSpec::CramerLundberg { c, .. }
            | ModelSpec::Brownian { c, .. }
            | ModelSpec::PhaseType { c, .. }
            | ModelSpec::Stable { c } => *c,
        }
    }

    fn with_premium(&self, c: f64) -> ModelSpec {
        let mut m = self.clone();
        match &mut m {
            ModelSpec::CramerLundberg { c: p, .. }
            | ModelSpec::Brownian { c: p, .. }
            | ModelSpec::PhaseType { c: p, .. }
            | ModelSpec::Stable { c: p } => *p = c,
        }
        m
    }

    fn build(&self) -> parisian::Result<LevyModel> {
        match self {
            ModelSpec::CramerLundberg { c, eta, alpha } => LevyModel::cramer_lundberg(*c, *eta, *alpha),
            ModelSpec::Brownian { c, sigma } => LevyModel::brownian(*c, *sigma),
            ModelSpec::PhaseType { c, sigma, eta, alpha_vec, t_mat } => {
                LevyModel::phase_type(*c, *sigma, *eta, alpha_vec.clone(), t_mat.clone())
            }
            ModelSpec::Stable { c } => LevyModel::stable(*c),
        }
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::CramerLundberg { c: 9.0, eta: 5.0, alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refraction {
    pub delta: Option<f64>,
    /// When sweeping δ, move the premium with it so that `c − δ` stays at
    /// its configured value.
    #[serde(default)]
    pub keep_net_drift: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    #[default]
    ParisianRuin,
    ClassicalRuin,
    LaplaceToBarrier,
    Laplace,
    ExitBeforeParisian,
}

impl Quantity {
    /// Whether the quantity is a probability, as opposed to a discounted
    /// expectation that may exceed 1.
    pub fn is_probability(self, q: f64) -> bool {
        match self {
            Quantity::ParisianRuin | Quantity::ClassicalRuin | Quantity::ExitBeforeParisian => true,
            Quantity::LaplaceToBarrier | Quantity::Laplace => q == 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub x: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub a: Option<f64>,
    #[serde(default)]
    pub quantity: Quantity,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub refraction: Refraction,
    #[serde(default)]
    pub query: QuerySpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn base_delta(&self) -> f64 {
        self.refraction.delta.unwrap_or(3.0)
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.query.delta.clone().unwrap_or_else(|| vec![self.base_delta()])
    }

    pub fn xs(&self) -> Vec<f64> {
        self.query.x.clone().unwrap_or_else(|| vec![1.0])
    }

    pub fn rs(&self) -> Vec<f64> {
        self.query.r.clone().unwrap_or_else(|| vec![2.0])
    }

    pub fn qs(&self) -> Vec<f64> {
        self.query.q.clone().unwrap_or_else(|| vec![0.0])
    }

    /// The refracted model at refraction rate `delta`.
    pub fn refracted(&self, delta: f64) -> Result<RefractedModel, CliError> {
        let spec = if self.refraction.keep_net_drift {
            self.model.with_premium(self.model.premium() - self.base_delta() + delta)
        } else {
            self.model.clone()
        };
        Ok(RefractedModel::new(spec.build()?, delta)?)
    }

    pub fn mc(&self) -> McConfig {
        let mut cfg = McConfig::default();
        if let Some(p) = self.mc.paths {
            cfg.paths = p;
        }
        if let Some(s) = self.mc.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.mc.workers {
            cfg.workers = w;
        }
        cfg.step = self.mc.step;
        cfg.horizon = self.mc.horizon;
        cfg
    }

    pub fn workers(&self) -> usize {
        self.mc.workers.unwrap_or_else(parisian::par::available_workers)
    }

    pub fn format(&self) -> Format {
        self.output.format.unwrap_or_default()
    }
}
