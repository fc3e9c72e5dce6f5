//! Scenario files: a TOML document describing the layout, graph, weights,
//! costs, run parameters and outputs. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use ne_lab::exec::Execution;
use ne_lab::game::GameSpec;
use ne_lab::seeker::{InitialEstimate, Instance, Mode, SeekerConfig, StepSize};
use ne_lab::topology::{CoalitionLayout, DirectedGameGraph, IntraCoalitionWeights, TopologyError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, ErrorKind};

/// Built-in scenarios, addressable by name.
pub const BUILTINS: [(&str, &str); 1] = [("paper-sim", include_str!("../scenarios/paper-sim.toml"))];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    pub description: Option<String>,
    pub layout: LayoutConfig,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    pub costs: CostsConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub sizes: Vec<usize>,
}

/// Either an explicit edge list (`"i.j -> p.q"`, sender first) or a preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub edges: Option<Vec<String>>,
    pub preset: Option<TopologyPreset>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyPreset {
    /// Bidirectional ring per coalition plus a ring through the first members.
    RingWithHeads,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightsConfig {
    #[default]
    Uniform,
    /// One table pair per coalition, indexed `[receiver][sender]`.
    Explicit { coalitions: Vec<WeightTable> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightTable {
    pub pull: Vec<Vec<f64>>,
    pub push: Vec<Vec<f64>>,
}

/// Either `(m, s, h)` per agent for `m(x_a² − s x_a) − h x_a Σx`, or a builtin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsConfig {
    pub quadratic: Option<Vec<[f64; 3]>>,
    pub builtin: Option<BuiltinCosts>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinCosts {
    /// The three-coalition, ten-agent reference game.
    Reference,
}

/// `(m, s, h)` for the builtin reference game, agents in flat order.
pub const REF_COSTS: [[f64; 3]; 10] = [
    [10.0, 10.0, 0.25],
    [12.0, 10.0, 0.25],
    [14.0, 10.0, 0.25],
    [16.0, 50.0, 0.15],
    [22.0, 50.0, 0.15],
    [18.0, 50.0, 0.15],
    [20.0, 50.0, 0.15],
    [26.0, 20.0, 0.1],
    [30.0, 20.0, 0.1],
    [12.0, 20.0, 0.1],
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSetting {
    Value(f64),
    Keyword(AlphaKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaKeyword {
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInit {
    pub seed: u64,
    #[serde(default = "default_low")]
    pub low: f64,
    #[serde(default = "default_high")]
    pub high: f64,
}

fn default_low() -> f64 {
    -10.0
}

fn default_high() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSetting {
    Values(Vec<f64>),
    Keyword(StartKeyword),
    Random { random: RandomInit },
    Explicit { explicit: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKeyword {
    Zeros,
    /// Only for `xi0`: every agent starts from `x0`.
    ExpandX0,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSetting {
    #[default]
    General,
    SingleAgent,
    SingleCoalition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_alpha")]
    pub alpha: AlphaSetting,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_stop_tolerance")]
    pub stop_tolerance: f64,
    /// Also require `‖x − x*‖∞ ≤` this before stopping (needs the oracle).
    pub oracle_tolerance: Option<f64>,
    #[serde(default = "default_x0")]
    pub x0: StartSetting,
    #[serde(default = "default_xi0")]
    pub xi0: StartSetting,
    #[serde(default)]
    pub mode: ModeSetting,
    #[serde(default)]
    pub execution: Execution,
    /// Solve for the equilibrium centrally before the run.
    #[serde(default = "default_true")]
    pub oracle: bool,
    /// Compute certificates and log `V(k)`.
    #[serde(default)]
    pub lyapunov: bool,
}

fn default_alpha() -> AlphaSetting {
    AlphaSetting::Value(0.02)
}

fn default_max_iterations() -> usize {
    100_000
}

fn default_stop_tolerance() -> f64 {
    1e-10
}

fn default_x0() -> StartSetting {
    StartSetting::Keyword(StartKeyword::Zeros)
}

fn default_xi0() -> StartSetting {
    StartSetting::Keyword(StartKeyword::ExpandX0)
}

fn default_true() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            max_iterations: default_max_iterations(),
            stop_tolerance: default_stop_tolerance(),
            oracle_tolerance: None,
            x0: default_x0(),
            xi0: default_xi0(),
            mode: ModeSetting::default(),
            execution: Execution::default(),
            oracle: true,
            lyapunov: false,
        }
    }
}

/// Output file names; relative names resolve against the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_json")]
    pub json: String,
    #[serde(default = "default_svg")]
    pub svg: String,
    /// Record every n-th iteration; raised automatically to cap the row count.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_csv() -> String {
    "trajectory.csv".into()
}

fn default_json() -> String {
    "summary.json".into()
}

fn default_svg() -> String {
    "trajectory.svg".into()
}

fn default_record_every() -> usize {
    1
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self { csv: default_csv(), json: default_json(), svg: default_svg(), record_every: default_record_every() }
    }
}

/// A parsed and validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub config: ScenarioConfig,
    pub instance: Instance,
    pub seeker: SeekerConfig,
    pub x0: Vec<f64>,
    pub xi0: Vec<f64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse { origin: origin.into(), message: e.to_string() })
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads a scenario from a file, or from the builtins when no such file exists.
pub fn load(spec: &str) -> Result<(String, ScenarioConfig), CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config = ScenarioConfig::parse(&text, spec)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| spec.into());
        return Ok((config.name.clone().unwrap_or(stem), config));
    }
    match BUILTINS.iter().find(|(name, _)| *name == spec) {
        Some((name, text)) => Ok((name.to_string(), ScenarioConfig::parse(text, name)?)),
        None => Err(CliError::Invalid {
            kind: ErrorKind::Config,
            field: "scenario".into(),
            message: format!("'{spec}' is neither a readable file nor a builtin ({})", builtin_names()),
        }),
    }
}

pub fn builtin_names() -> String {
    BUILTINS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}

fn invalid(field: &str, message: impl ToString) -> CliError {
    CliError::Invalid { kind: ErrorKind::Config, field: field.into(), message: message.to_string() }
}

fn topology_error(field: &str, e: TopologyError) -> CliError {
    let kind = match e {
        TopologyError::WeightSum { .. } | TopologyError::WeightSupport { .. } | TopologyError::WeightShape { .. } => ErrorKind::Weights,
        TopologyError::Disconnected(_) => ErrorKind::Connectivity,
        _ => ErrorKind::Config,
    };
    CliError::Invalid { kind, field: field.into(), message: e.to_string() }
}

fn resolve_start(field: &str, setting: &StartSetting, len: usize, x0: Option<&[f64]>) -> Result<Vec<f64>, CliError> {
    let values = match setting {
        StartSetting::Values(v) | StartSetting::Explicit { explicit: v } => v.clone(),
        StartSetting::Keyword(StartKeyword::Zeros) => vec![0.0; len],
        StartSetting::Keyword(StartKeyword::ExpandX0) => match x0 {
            Some(x) => InitialEstimate::ExpandX0.resolve(x).map_err(|e| invalid(field, e))?,
            None => return Err(invalid(field, "'expand-x0' only applies to xi0")),
        },
        StartSetting::Random { random } => {
            // resolve() draws k² values for a k-vector; x0 keeps the first n
            let init = InitialEstimate::Random { seed: random.seed, low: random.low, high: random.high };
            let base = x0.map_or_else(|| vec![0.0; len], <[f64]>::to_vec);
            init.resolve(&base).map_err(|e| invalid(field, e))?.into_iter().take(len).collect()
        }
    };
    if values.len() != len {
        return Err(invalid(field, format!("expected {len} values, got {}", values.len())));
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid(field, format!("entry {} is not finite", bad + 1)));
    }
    Ok(values)
}

impl Scenario {
    pub fn build(name: String, config: ScenarioConfig) -> Result<Self, CliError> {
        let layout = CoalitionLayout::new(config.layout.sizes.clone()).map_err(|e| invalid("layout.sizes", e))?;
        let n = layout.total();

        let graph = match (&config.topology.edges, config.topology.preset) {
            (Some(edges), None) => DirectedGameGraph::parse(layout.clone(), edges).map_err(|e| invalid("topology.edges", e))?,
            (None, Some(TopologyPreset::RingWithHeads)) => DirectedGameGraph::ring_with_heads(layout.clone()),
            _ => return Err(invalid("topology", "set exactly one of 'edges' or 'preset'")),
        };
        graph.validate().map_err(|e| topology_error("topology", e))?;

        let weights = match &config.weights {
            WeightsConfig::Uniform => IntraCoalitionWeights::uniform(&graph).map_err(|e| topology_error("weights", e))?,
            WeightsConfig::Explicit { coalitions } => {
                if coalitions.len() != layout.num_coalitions() {
                    return Err(invalid(
                        "weights.coalitions",
                        format!("expected {} tables, got {}", layout.num_coalitions(), coalitions.len()),
                    ));
                }
                let to_matrix = |field: String, rows: &[Vec<f64>]| -> Result<DMatrix<f64>, CliError> {
                    let cols = rows.first().map_or(0, Vec::len);
                    if rows.iter().any(|r| r.len() != cols) {
                        return Err(invalid(&field, "rows have different lengths"));
                    }
                    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
                };
                let mut pulls = Vec::new();
                let mut pushes = Vec::new();
                for (i, t) in coalitions.iter().enumerate() {
                    pulls.push(to_matrix(format!("weights.coalitions[{}].pull", i + 1), &t.pull)?);
                    pushes.push(to_matrix(format!("weights.coalitions[{}].push", i + 1), &t.push)?);
                }
                IntraCoalitionWeights::explicit(&graph, pulls, pushes).map_err(|e| topology_error("weights", e))?
            }
        };

        let params: Vec<(f64, f64, f64)> = match (&config.costs.quadratic, config.costs.builtin) {
            (Some(q), None) => q.iter().map(|t| (t[0], t[1], t[2])).collect(),
            (None, Some(BuiltinCosts::Reference)) => {
                if layout.sizes() != [3, 4, 3] {
                    return Err(invalid("costs.builtin", "the 'reference' costs need layout sizes [3, 4, 3]"));
                }
                REF_COSTS.iter().map(|t| (t[0], t[1], t[2])).collect()
            }
            _ => return Err(invalid("costs", "set exactly one of 'quadratic' or 'builtin'")),
        };
        if params.iter().flat_map(|t| [t.0, t.1, t.2]).any(|v| !v.is_finite()) {
            return Err(invalid("costs.quadratic", "all coefficients must be finite"));
        }
        let game = GameSpec::quadratic(layout.clone(), &params).map_err(|e| invalid("costs.quadratic", e))?;
        if let Err(e) = game.estimate_monotonicity(&Default::default()) {
            return Err(CliError::Invalid { kind: ErrorKind::Game, field: "costs".into(), message: e.to_string() });
        }
        let instance = Instance::new(game, graph, weights).map_err(|e| invalid("layout", e))?;

        let run = &config.run;
        let alpha = match run.alpha {
            AlphaSetting::Value(a) if a > 0.0 && a.is_finite() => StepSize::Fixed(a),
            AlphaSetting::Value(a) => return Err(invalid("run.alpha", format!("must be positive and finite, got {a}"))),
            AlphaSetting::Keyword(AlphaKeyword::Auto) => StepSize::Auto,
        };
        let mode = match run.mode {
            ModeSetting::General => Mode::General,
            ModeSetting::SingleAgent => Mode::SingleAgentCoalitions,
            ModeSetting::SingleCoalition => Mode::SingleCoalition,
        };
        if config.outputs.record_every == 0 {
            return Err(invalid("outputs.record_every", "must be at least 1"));
        }
        let seeker = SeekerConfig {
            alpha,
            max_iterations: run.max_iterations,
            stop_tolerance: run.stop_tolerance,
            oracle_tolerance: run.oracle_tolerance,
            mode,
            execution: run.execution,
            record_every: config.outputs.record_every,
            keep_snapshots: false,
        };
        seeker.validate().map_err(|e| invalid("run", e))?;
        let x0 = resolve_start("run.x0", &run.x0, n, None)?;
        let xi0 = resolve_start("run.xi0", &run.xi0, n * n, Some(&x0))?;
        Ok(Self { name, config, instance, seeker, x0, xi0 })
    }

    pub fn load(spec: &str) -> Result<Self, CliError> {
        let (name, config) = load(spec)?;
        Self::build(name, config)
    }
}
