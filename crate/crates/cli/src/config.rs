//! Run configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use refprior_core::models::ModelSpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Model given inline or as a path relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(ModelSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present, must name the command being run.
    #[serde(default)]
    pub command: Option<String>,
    pub model: ModelSource,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Nodes per axis on working grids.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_depth")]
    pub nest_depth: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub constraints: Vec<ConstraintConfig>,
    #[serde(default)]
    pub properize: Option<ProperizeConfig>,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
    #[serde(default)]
    pub hierarchy: Option<HierarchyConfig>,
    #[serde(default)]
    pub mutualinfo: Option<MutualInfoConfig>,
    #[serde(default)]
    pub sensitivity: Option<SensitivityConfig>,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_nodes() -> usize {
    41
}

fn default_depth() -> usize {
    6
}

/// A pointwise function of the parameter from a fixed menu.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionConfig {
    /// `θ_axis^power`.
    Power { axis: usize, power: f64 },
    /// `Π_axes θ_a^power`.
    ProductPower { axes: Vec<usize>, power: f64 },
    /// `1` on `[lo, hi]` along `axis`, else `0`.
    Indicator { axis: usize, lo: f64, hi: f64 },
    /// `ln θ_axis`.
    Log { axis: usize },
}

impl FunctionConfig {
    pub fn validate(&self, dim: usize) -> Result<(), CliError> {
        let axes: Vec<usize> = match self {
            FunctionConfig::Power { axis, .. } | FunctionConfig::Indicator { axis, .. } | FunctionConfig::Log { axis } => {
                vec![*axis]
            }
            FunctionConfig::ProductPower { axes, .. } => axes.clone(),
        };
        if axes.is_empty() || axes.iter().any(|a| *a >= dim) {
            return Err(CliError::Config(format!("function {self:?} refers to axes outside 0..{dim}")));
        }
        Ok(())
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        match self {
            FunctionConfig::Power { axis, power } => t[*axis].powf(*power),
            FunctionConfig::ProductPower { axes, power } => axes.iter().map(|&a| t[a]).product::<f64>().powf(*power),
            FunctionConfig::Indicator { axis, lo, hi } => f64::from(u8::from(t[*axis] >= *lo && t[*axis] <= *hi)),
            FunctionConfig::Log { axis } => t[*axis].ln(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FunctionConfig::Power { axis, power } => format!("theta{axis}^{power}"),
            FunctionConfig::ProductPower { axes, power } => format!("prod{axes:?}^{power}"),
            FunctionConfig::Indicator { axis, lo, hi } => format!("1[{lo} <= theta{axis} <= {hi}]"),
            FunctionConfig::Log { axis } => format!("ln theta{axis}"),
        }
    }
}

/// A function from the menu plus its target, written as one flat object:
/// `{"kind": "power", "axis": 0, "power": 1, "target": 0.5}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Map<String, Value>")]
pub struct ConstraintConfig {
    #[serde(flatten)]
    pub function: FunctionConfig,
    pub target: f64,
}

// `flatten` cannot be combined with `deny_unknown_fields`, so the target is
// split off by hand and the rest parsed strictly.
impl TryFrom<Map<String, Value>> for ConstraintConfig {
    type Error = String;

    fn try_from(mut map: Map<String, Value>) -> Result<Self, String> {
        let target = map
            .remove("target")
            .ok_or("constraint is missing `target`")?
            .as_f64()
            .ok_or("constraint `target` must be a number")?;
        let function = serde_json::from_value(Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(ConstraintConfig { function, target })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProperizeConfig {
    pub g: FunctionConfig,
    /// Axes whose open edges expand along the nest; the others stay on
    /// the model window.
    pub expand_axes: Vec<usize>,
    #[serde(default)]
    pub quasi: bool,
    #[serde(default)]
    pub c_sequence: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    Inf,
    NegInf,
    #[serde(untagged)]
    Finite(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub axis: usize,
    pub boundary: BoundaryConfig,
    pub window: [f64; 2],
    /// Values of the other coordinates; defaults to window midpoints.
    #[serde(default)]
    pub fixed: Option<Vec<f64>>,
    #[serde(default = "default_fit_nodes")]
    pub fit_nodes: usize,
    /// Nest indices for ψ diagnostics on `(0, 1]`, run only for a
    /// boundary at zero.
    #[serde(default)]
    pub psi_nest_indices: Vec<usize>,
}

fn default_fit_nodes() -> usize {
    40
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub block1: Vec<usize>,
    #[serde(default)]
    pub block2: Vec<usize>,
    #[serde(default)]
    pub block1_nodes: Option<usize>,
    #[serde(default)]
    pub block2_nodes: Option<usize>,
    #[serde(default)]
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorChoice {
    Uniform,
    Jeffreys,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutualInfoConfig {
    pub k_schedule: Vec<usize>,
    #[serde(default = "default_outer")]
    pub n_outer: usize,
    #[serde(default = "default_inner")]
    pub n_inner: usize,
    #[serde(default = "default_prior")]
    pub prior: PriorChoice,
}

fn default_outer() -> usize {
    2000
}

fn default_inner() -> usize {
    50
}

fn default_prior() -> PriorChoice {
    PriorChoice::Uniform
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub gammas: Vec<f64>,
    pub ks: Vec<usize>,
    #[serde(default = "default_theta_star")]
    pub theta_star: [f64; 3],
    #[serde(default = "default_draws")]
    pub n_draws: usize,
    #[serde(default = "default_burn")]
    pub n_burn: usize,
    /// Axis whose marginal posteriors are compared.
    #[serde(default = "default_sens_axis")]
    pub axis: usize,
}

fn default_theta_star() -> [f64; 3] {
    [2.0, 2.0, 2.0]
}

fn default_draws() -> usize {
    20_000
}

fn default_burn() -> usize {
    5_000
}

fn default_sens_axis() -> usize {
    2
}

/// A parsed configuration with its model spec resolved.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub run: RunConfig,
    pub model: ModelSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }
}

/// Reads `path`, resolves the model spec and checks the common fields.
pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let run = RunConfig::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(run, base)
}

pub fn resolve(run: RunConfig, base: &Path) -> Result<LoadedConfig, CliError> {
    let model = match &run.model {
        ModelSource::Inline(spec) => {
            spec.build().map_err(|e| CliError::Config(e.to_string()))?;
            spec.clone()
        }
        ModelSource::Path(p) => {
            let full = base.join(p);
            let text = fs::read_to_string(&full)
                .map_err(|e| CliError::Config(format!("model spec {}: {e}", full.display())))?;
            ModelSpec::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    if !(run.alpha > 0.0 && run.alpha < 1.0) {
        return Err(CliError::Config(format!("alpha must lie in (0, 1), got {}", run.alpha)));
    }
    if run.nodes < 8 {
        return Err(CliError::Config(format!("nodes must be at least 8, got {}", run.nodes)));
    }
    Ok(LoadedConfig { run, model })
}
