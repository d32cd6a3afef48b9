//! JSON run configuration and environment specifications.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate, Affine, Environment, Noise, Ratio, SignalKind, SignalModel, TypeFamily, TypeModel};
use crate::numerics::{DEFAULT_GRID_NODES, DEFAULT_TOL_T};

fn binary_values() -> Vec<f64> {
    vec![0.0, 1.0]
}
fn one() -> f64 {
    1.0
}
fn zero() -> f64 {
    0.0
}

/// Buyer-signal family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    /// Two signals, conditionally independent; `top[w]` is the top-signal probability.
    BinaryTable {
        top: Vec<f64>,
        #[serde(default = "binary_values")]
        values: Vec<f64>,
    },
    /// `probs[x][w]`.
    Table { values: Vec<f64>, probs: Vec<Vec<f64>> },
    #[serde(rename = "example1-or")]
    Or {
        psi_type: Affine,
        psi_state: Vec<f64>,
        #[serde(default = "binary_values")]
        values: Vec<f64>,
    },
    #[serde(rename = "example2-and")]
    And {
        psi_type: Affine,
        psi_state: Vec<f64>,
        #[serde(default = "one")]
        state_exponent: f64,
        #[serde(default = "binary_values")]
        values: Vec<f64>,
    },
    Logistic {
        slopes: Vec<f64>,
        #[serde(default = "binary_values")]
        values: Vec<f64>,
    },
    /// `probs[x][w][node]`, linear in the type between nodes.
    Tabulated { values: Vec<f64>, nodes: Vec<f64>, probs: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RatioSpec {
    Affine { intercept: f64, slope: f64 },
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

/// Seller-type family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TypeSpec {
    Uninformed {
        #[serde(default = "zero")]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    LikelihoodRatio {
        ratio: RatioSpec,
        #[serde(default = "zero")]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    KumaraswamyFlipped { a: Vec<f64>, b: f64 },
    Location { noise: Noise, scale: f64, lo: f64, hi: f64 },
    Tabulated { nodes: Vec<f64>, density: Vec<Vec<f64>>, lo: f64, hi: f64 },
}

/// Market primitives as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    #[serde(default)]
    pub states: Option<Vec<f64>>,
    pub prior: Vec<f64>,
    pub v_buyer: Vec<f64>,
    pub v_seller: Vec<f64>,
    pub arrival_rate: f64,
    pub signals: SignalSpec,
    pub types: TypeSpec,
}

impl EnvironmentSpec {
    pub fn build(&self, grid_nodes: usize) -> Result<Environment> {
        let states = self
            .states
            .clone()
            .unwrap_or_else(|| (0..self.prior.len()).map(|i| i as f64).collect());
        let signals = match &self.signals {
            SignalSpec::BinaryTable { top, values } => SignalModel::new(
                values.clone(),
                SignalKind::Table { probs: vec![top.iter().map(|p| 1.0 - p).collect(), top.clone()] },
            )?,
            SignalSpec::Table { values, probs } => SignalModel::new(values.clone(), SignalKind::Table { probs: probs.clone() })?,
            SignalSpec::Or { psi_type, psi_state, values } => SignalModel::new(
                values.clone(),
                SignalKind::Or { psi_type: *psi_type, psi_state: psi_state.clone() },
            )?,
            SignalSpec::And { psi_type, psi_state, state_exponent, values } => SignalModel::new(
                values.clone(),
                SignalKind::And { psi_type: *psi_type, psi_state: psi_state.clone(), state_exponent: *state_exponent },
            )?,
            SignalSpec::Logistic { slopes, values } => {
                SignalModel::new(values.clone(), SignalKind::Logistic { slopes: slopes.clone() })?
            }
            SignalSpec::Tabulated { values, nodes, probs } => SignalModel::new(
                values.clone(),
                SignalKind::TypeTable { nodes: nodes.clone(), probs: probs.clone() },
            )?,
        };
        let (family, lo, hi) = match &self.types {
            TypeSpec::Uninformed { lo, hi } => (TypeFamily::Uninformed, *lo, *hi),
            TypeSpec::LikelihoodRatio { ratio, lo, hi } => {
                let ratio = match ratio {
                    RatioSpec::Affine { intercept, slope } => Ratio::Affine(Affine::new(*intercept, *slope)),
                    RatioSpec::Tabulated { nodes, values } => {
                        Ratio::Tabulated { nodes: nodes.clone(), values: values.clone() }
                    }
                };
                (TypeFamily::LikelihoodRatio { ratio }, *lo, *hi)
            }
            TypeSpec::KumaraswamyFlipped { a, b } => (TypeFamily::Kumaraswamy { a: a.clone(), b: *b }, 0.0, 1.0),
            TypeSpec::Location { noise, scale, lo, hi } => (TypeFamily::Location { noise: *noise, scale: *scale }, *lo, *hi),
            TypeSpec::Tabulated { nodes, density, lo, hi } => {
                (TypeFamily::Tabulated { nodes: nodes.clone(), density: density.clone() }, *lo, *hi)
            }
        };
        if !(lo < hi) {
            return Err(Error::Argument(format!("type interval [{lo}, {hi}] is empty")));
        }
        let types = TypeModel::new(family, lo, hi, &states, grid_nodes)?;
        Environment::new(
            states,
            self.prior.clone(),
            self.v_buyer.clone(),
            self.v_seller.clone(),
            signals,
            types,
            self.arrival_rate,
        )
    }
}

/// Parameter swept by the `sweep` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// `prior_high`, `arrival_rate`, or a JSON pointer into the environment spec.
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 || !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::Config("sweep range is empty".into()));
        }
        if self.steps == 1 {
            return Ok(vec![self.start]);
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        Ok((0..self.steps).map(|i| self.start + h * i as f64).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExitSpec {
    /// Commitment exit times.
    Optimal,
    /// Equilibrium exit times.
    Equilibrium,
    /// Same exit time for every type.
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PricingSpec {
    Revealed,
    Pooled,
    Equilibrium,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum AcceptanceSpec {
    OnlyTop,
    PosteriorThreshold,
    All,
    Set(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_exit")]
    pub exit: ExitSpec,
    #[serde(default = "default_pricing")]
    pub pricing: PricingSpec,
    #[serde(default = "default_acceptance")]
    pub acceptance: AcceptanceSpec,
    #[serde(default)]
    pub discount_rate: f64,
}

fn default_exit() -> ExitSpec {
    ExitSpec::Optimal
}
fn default_pricing() -> PricingSpec {
    PricingSpec::Revealed
}
fn default_acceptance() -> AcceptanceSpec {
    AcceptanceSpec::OnlyTop
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { exit: default_exit(), pricing: default_pricing(), acceptance: default_acceptance(), discount_rate: 0.0 }
    }
}

/// Raw file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub environment: Option<EnvironmentSpec>,
    #[serde(default)]
    pub environment_file: Option<PathBuf>,
    #[serde(default)]
    pub grid_nodes: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub runs: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub simulation: Option<SimulationSpec>,
    #[serde(default)]
    pub require_valid: Option<bool>,
}

/// Loaded, checked configuration with its environment built.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub environment_spec: EnvironmentSpec,
    pub environment: Environment,
    pub grid_nodes: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub runs: usize,
    pub output_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
    pub simulation: SimulationSpec,
    pub require_valid: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub grid_nodes: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse { message: e.to_string(), line: e.line(), column: e.column() })
}

pub fn parse_environment(text: &str, grid_nodes: usize) -> Result<Environment> {
    let spec: EnvironmentSpec = parse_json(text)?;
    build_checked(&spec, grid_nodes)
}

fn build_checked(spec: &EnvironmentSpec, grid_nodes: usize) -> Result<Environment> {
    spec.build(grid_nodes).map_err(|e| match e {
        Error::Argument(m) => Error::Config(m),
        other => other,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    load_config_with(path, &Overrides::default())
}

pub fn load_config_with(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base, overrides)
}

/// Parses config text; relative `environment_file` paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let raw: serde_json::Value = parse_json(text)?;
    // a bare environment file is a config with defaults for everything else
    let raw = match raw {
        serde_json::Value::Object(map) if map.contains_key("prior") => serde_json::json!({ "environment": map }),
        other => other,
    };
    let file: ConfigFile = serde_json::from_value(raw).map_err(|e| Error::Config(e.to_string()))?;
    let environment_spec = match (&file.environment, &file.environment_file) {
        (Some(env), None) => env.clone(),
        (None, Some(p)) => {
            let p = if p.is_absolute() { p.clone() } else { base.join(p) };
            let text = std::fs::read_to_string(&p)
                .map_err(|e| Error::Config(format!("environment_file {}: {e}", p.display())))?;
            parse_json(&text)?
        }
        (Some(_), Some(_)) => return Err(Error::Config("give either `environment` or `environment_file`, not both".into())),
        (None, None) => return Err(Error::Config("missing `environment` or `environment_file`".into())),
    };
    let grid_nodes = overrides.grid_nodes.or(file.grid_nodes).unwrap_or(DEFAULT_GRID_NODES);
    if grid_nodes < 2 {
        return Err(Error::Config("grid_nodes must be at least 2".into()));
    }
    let tolerance = overrides.tolerance.or(file.tolerance).unwrap_or(DEFAULT_TOL_T);
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::Config("tolerance must be > 0".into()));
    }
    let runs = overrides.runs.or(file.runs).unwrap_or(100_000);
    if runs == 0 {
        return Err(Error::Config("runs must be > 0".into()));
    }
    if let Some(s) = &file.sweep {
        s.values()?;
    }
    let environment = build_checked(&environment_spec, grid_nodes)?;
    let require_valid = file.require_valid.unwrap_or(true);
    if require_valid {
        let report = validate(&environment)?;
        if !report.passed() {
            return Err(Error::InvalidEnvironment(Box::new(report)));
        }
    }
    Ok(RunConfig {
        environment_spec,
        environment,
        grid_nodes,
        tolerance,
        seed: overrides.seed.or(file.seed).unwrap_or(0),
        runs,
        output_dir: overrides.output_dir.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from("out")),
        sweep: file.sweep,
        simulation: file.simulation.unwrap_or_default(),
        require_valid,
    })
}

/// Copy of `spec` with one parameter replaced.
pub fn with_parameter(spec: &EnvironmentSpec, parameter: &str, value: f64) -> Result<EnvironmentSpec> {
    let mut json = serde_json::to_value(spec).map_err(|e| Error::Config(e.to_string()))?;
    match parameter {
        "prior_high" => {
            let prior = json["prior"].as_array_mut().ok_or_else(|| Error::Config("prior missing".into()))?;
            let k = prior.len();
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("prior_high {value} outside [0, 1]")));
            }
            // remaining mass split in the original proportions
            let rest: Vec<f64> = prior[..k - 1].iter().map(|v| v.as_f64().unwrap_or(0.0)).collect();
            let total: f64 = rest.iter().sum();
            for (i, r) in rest.iter().enumerate() {
                let share = if total > 0.0 { r / total } else { 1.0 / (k - 1) as f64 };
                prior[i] = serde_json::json!((1.0 - value) * share);
            }
            prior[k - 1] = serde_json::json!(value);
        }
        "arrival_rate" => json["arrival_rate"] = serde_json::json!(value),
        pointer if pointer.starts_with('/') => {
            let slot = json
                .pointer_mut(pointer)
                .ok_or_else(|| Error::Config(format!("sweep parameter {pointer} not found")))?;
            if !slot.is_number() {
                return Err(Error::Config(format!("sweep parameter {pointer} is not a number")));
            }
            *slot = serde_json::json!(value);
        }
        other => return Err(Error::Config(format!("unknown sweep parameter `{other}`"))),
    }
    serde_json::from_value(json).map_err(|e| Error::Config(e.to_string()))
}
