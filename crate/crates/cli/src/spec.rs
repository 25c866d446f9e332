//! Experiment spec: JSON schema version 1.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use qsdlab::birth_death::{BDModel, LvParams};
use qsdlab::feller::{FellerGrowth, FellerModel};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema: u32,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub model: ModelSpec,
    #[serde(default)]
    pub lyapunov: LyapunovSpec,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub estimation: Option<EstimationSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Bd {
        lambda: Vec<f64>,
        mu: Vec<f64>,
        #[serde(default)]
        gamma: Option<Vec<Vec<f64>>>,
        c: Vec<Vec<f64>>,
    },
    Feller {
        gamma: Vec<f64>,
        r: Vec<f64>,
        c: Vec<Vec<f64>>,
        #[serde(default)]
        k: Option<Vec<f64>>,
        #[serde(default)]
        dt: Option<f64>,
    },
}

/// `"auto"` or explicit parameters.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LyapunovSpec {
    #[default]
    #[serde(skip)]
    Auto,
    Keyword(String),
    Explicit(LyapunovParamsSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovParamsSpec {
    pub eta: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    /// Largest slice `|n|` (chains) checked; default 200.
    #[serde(default)]
    pub k_max: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Assumption,
    ConditionA,
    ConditionB,
    Dynkin,
    Nonlinear,
    Comparison,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    FlemingViot,
    ConditionedMc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSpec {
    pub methods: Vec<Method>,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub fleming_viot: FvSpec,
    #[serde(default)]
    pub conditioned_mc: McSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// Fixed box sides; auto-sized when absent.
    #[serde(default)]
    pub r#box: Option<Vec<u32>>,
    pub start: u32,
    pub step: u32,
    pub tol: f64,
    pub max_side: u32,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec { r#box: None, start: 10, step: 5, tol: 1e-6, max_side: 200 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FvSpec {
    pub particles: usize,
    pub horizon: f64,
    pub dt_sync: f64,
    pub record_every: f64,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

impl Default for FvSpec {
    fn default() -> Self {
        FvSpec { particles: 2000, horizon: 20.0, dt_sync: 0.01, record_every: 0.05, initial: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub trajectories: usize,
    pub horizon: f64,
    pub steps: usize,
    pub initial: Vec<Vec<f64>>,
    /// Bins per axis for diffusions.
    pub bins: u32,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec { trajectories: 100_000, horizon: 2.0, steps: 100, initial: vec![vec![1.0, 1.0]], bins: 6 }
    }
}

/// A spec problem with the line it refers to.
#[derive(Debug)]
pub struct SpecError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let pat = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&pat)).map(|i| i + 1)
}

pub enum Model {
    Bd(BDModel),
    Feller(FellerModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Bd(m) => m.dim(),
            Model::Feller(m) => m.dim(),
        }
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        serde_json::from_str(text).map_err(|e| SpecError { line: Some(e.line()), message: e.to_string() })
    }

    /// Builds the model and checks that all blocks are consistent.
    pub fn validate(&self, text: &str) -> Result<Model, SpecError> {
        let err = |key: &str, message: String| SpecError { line: line_of(text, key), message };
        if self.schema != SCHEMA {
            return Err(err("schema", format!("unsupported schema {} (expected {SCHEMA})", self.schema)));
        }
        let model = match &self.model {
            ModelSpec::Bd { lambda, mu, gamma, c } => {
                let d = lambda.len();
                let params = LvParams {
                    lambda: lambda.clone(),
                    mu: mu.clone(),
                    gamma: gamma.clone().unwrap_or_else(|| vec![vec![0.0; d]; d]),
                    c: c.clone(),
                };
                Model::Bd(BDModel::lv(params).map_err(|e| err("model", e.to_string()))?)
            }
            ModelSpec::Feller { gamma, r, c, k, dt } => {
                let growth = match k {
                    Some(k) => FellerGrowth::ThresholdLv { r: r.clone(), c: c.clone(), k: k.clone() },
                    None => FellerGrowth::Lv { r: r.clone(), c: c.clone() },
                };
                if dt.is_some_and(|dt| !(dt > 0.0)) {
                    return Err(err("dt", "time step must be positive".into()));
                }
                Model::Feller(FellerModel::new(gamma.clone(), growth).map_err(|e| err("model", e.to_string()))?)
            }
        };
        let d = model.dim();
        match &self.lyapunov {
            LyapunovSpec::Keyword(k) if k != "auto" => {
                return Err(err("lyapunov", format!("lyapunov must be \"auto\" or an object, got \"{k}\"")));
            }
            LyapunovSpec::Explicit(p) if !(p.eta > 0.0) || !p.eta.is_finite() => {
                return Err(err("eta", format!("eta must be positive and finite, got {}", p.eta)));
            }
            _ => {}
        }
        let is_bd = matches!(model, Model::Bd(_));
        for c in &self.checks {
            let ok = match c {
                CheckKind::Dynkin | CheckKind::Nonlinear => is_bd,
                CheckKind::Comparison => !is_bd,
                _ => true,
            };
            if !ok {
                return Err(err("checks", format!("check {c:?} does not apply to this model")));
            }
        }
        if let Some(est) = &self.estimation {
            if est.methods.is_empty() {
                return Err(err("methods", "estimation lists no methods".into()));
            }
            if est.methods.contains(&Method::Oracle) && !is_bd {
                return Err(err("methods", "the eigen oracle needs a birth-death chain".into()));
            }
            if let Some(b) = &est.oracle.r#box {
                if b.len() != d {
                    return Err(err("box", format!("box has {} sides, model dimension is {d}", b.len())));
                }
            }
            if est.methods.contains(&Method::FlemingViot) {
                let fv = &est.fleming_viot;
                if fv.particles < 100 || !(fv.horizon > 0.0) || !(fv.dt_sync > 0.0) || !(fv.record_every > 0.0) {
                    return Err(err("fleming_viot", "Fleming-Viot needs at least 100 particles and positive times".into()));
                }
                if let Some(x) = &fv.initial {
                    check_point(x, d, is_bd).map_err(|m| err("fleming_viot", m))?;
                }
            }
            if est.methods.contains(&Method::ConditionedMc) {
                let mc = &est.conditioned_mc;
                if mc.trajectories < 1000 {
                    return Err(err("trajectories", format!("conditioned Monte Carlo needs at least 1000 trajectories, got {}", mc.trajectories)));
                }
                if !(mc.horizon > 0.0) || mc.steps == 0 || mc.bins == 0 {
                    return Err(err("conditioned_mc", "horizon, steps and bins must be positive".into()));
                }
                if mc.initial.is_empty() {
                    return Err(err("initial", "no initial states".into()));
                }
                for x in &mc.initial {
                    check_point(x, d, is_bd).map_err(|m| err("initial", m))?;
                }
                let has_ref = est.methods.contains(&Method::Oracle) || est.methods.contains(&Method::FlemingViot);
                if !has_ref && mc.initial.len() < 2 {
                    return Err(err("initial", "without a QSD estimate, TV curves need two initial states".into()));
                }
            }
        }
        Ok(model)
    }
}

fn check_point(x: &[f64], d: usize, integer: bool) -> Result<(), String> {
    if x.len() != d {
        return Err(format!("initial state has {} coordinates, model dimension is {d}", x.len()));
    }
    if x.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err("initial state must have positive coordinates".into());
    }
    if integer && x.iter().any(|v| v.fract() != 0.0) {
        return Err("chain initial state must be integer".into());
    }
    Ok(())
}
