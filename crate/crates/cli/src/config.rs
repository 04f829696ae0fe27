//! JSON experiment configuration: schema types, validation with field-level
//! diagnostics, and conversion into a core [`ExperimentSpec`].
//!
//! Validation is two-layered. Shape and value problems (bad ranges, bad
//! column sums, missing fields) are [`ConfigError`]s and map to exit code 2.
//! Spectral preconditions (primitivity, positive-definiteness) surface as
//! core errors from the constructors and map to exit code 3.

use std::fmt;

use asyncnet_core::costs::{FeatureModel, LogisticCost};
use asyncnet_core::linalg::Mat;
use asyncnet_core::sim::{ExperimentSpec, GradientMode, NetworkModel, Tolerances};
use asyncnet_core::stepsize::StepSizeProcess;
use asyncnet_core::strategies::{FusionSampler, StrategyConfig, StrategyKind};
use asyncnet_core::topology::{
    validate_left_stochastic, CombinationMatrix, LinkProbability, RandomCombinationPolicy,
    StochasticityViolation,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration problem with the offending field path.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError { field: field.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Resolution failure, split by exit-code class: schema/value problems are
/// configuration errors; spectral preconditions are math errors.
#[derive(Debug)]
pub enum ResolveError {
    Config(ConfigError),
    Math(asyncnet_core::Error),
}

impl fmt::Display for ResolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolveError::Config(e) => e.fmt(f),
            ResolveError::Math(e) => write!(f, "math precondition violated: {e}"),
        }
    }
}

impl std::error::Error for ResolveError {}

impl From<ConfigError> for ResolveError {
    fn from(e: ConfigError) -> Self {
        ResolveError::Config(e)
    }
}

/// Wraps a core error raised while building config pieces: spectral
/// conditions stay math errors, everything else becomes a field-level
/// configuration diagnostic.
fn classify(field: &str, e: asyncnet_core::Error) -> ResolveError {
    use asyncnet_core::Error as E;
    match e {
        E::NotPrimitive(_)
        | E::NotPositiveDefinite(_)
        | E::NotDoublyStochastic
        | E::NoSpectralGap { .. }
        | E::PowerIterationStalled { .. } => ResolveError::Math(e),
        other => ResolveError::Config(ConfigError::new(field, other)),
    }
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

/// Top-level experiment configuration (see `schema/experiment.schema.json`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub strategy: StrategySection,
    pub experiment: RunSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    /// The common minimizer the agents estimate.
    pub w_o: Vec<f64>,
    pub agents: Vec<AgentConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub r_u: MatrixSpec,
    pub sigma_v2: f64,
}

/// Matrices are stored row-major as nested arrays, with shorthands for the
/// common structured cases.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    Identity,
    /// `scale · I`.
    ScaledIdentity { scale: f64 },
    Diagonal { entries: Vec<f64> },
    Dense { rows: Vec<Vec<f64>> },
}

impl MatrixSpec {
    pub fn build(&self, dim: usize, field: &str) -> Result<Mat, ConfigError> {
        let m = match self {
            MatrixSpec::Identity => Mat::identity(dim),
            MatrixSpec::ScaledIdentity { scale } => Mat::scaled_identity(dim, *scale),
            MatrixSpec::Diagonal { entries } => {
                if entries.len() != dim {
                    return Err(ConfigError::new(
                        field,
                        format!("diagonal has {} entries, expected {dim}", entries.len()),
                    ));
                }
                Mat::diag(entries)
            }
            MatrixSpec::Dense { rows } => Mat::from_rows(rows)
                .map_err(|e| ConfigError::new(field, e))
                .and_then(|m| {
                    if m.rows() != dim || m.cols() != dim {
                        Err(ConfigError::new(
                            field,
                            format!("matrix is {}×{}, expected {dim}×{dim}", m.rows(), m.cols()),
                        ))
                    } else {
                        Ok(m)
                    }
                })?,
        };
        Ok(m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    /// One of: `ncop`/`non_cooperative`, `centralized`, `centralized_sync`,
    /// `centralized_random_mu`, `centralized_random_fusion`, `consensus`,
    /// `cta`, `atc`, `unified`, `atc_enlarged`.
    pub kind: String,
    /// Single process shared by all agents, or one per agent.
    pub step_size: StepSizeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combination: Option<CombinationSection>,
    /// `(A_o, A_1, A_2)` for the unified recursion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combinations: Option<UnifiedSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<FusionSection>,
    /// Right-stochastic gradient-exchange weights for `atc_enlarged`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_exchange: Option<MatrixSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSizeSection {
    Shared(StepSizeProcess),
    PerAgent(Vec<StepSizeProcess>),
}

impl StepSizeSection {
    pub fn per_agent(&self, n: usize, field: &str) -> Result<Vec<StepSizeProcess>, ConfigError> {
        match self {
            StepSizeSection::Shared(p) => Ok(vec![p.clone(); n]),
            StepSizeSection::PerAgent(v) => {
                if v.len() != n {
                    return Err(ConfigError::new(
                        field,
                        format!("{} step-size processes for {n} agents", v.len()),
                    ));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinationSection {
    pub topology: TopologySpec,
    /// Per-link on-off probabilities (directed: `from` feeds `to`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_probabilities: Vec<LinkProbability>,
    /// Shorthand: the same probability on every off-diagonal link.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_link_probability: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    FullyConnected { size: usize },
    Ring { size: usize },
    Metropolis { size: usize, edges: Vec<(usize, usize)> },
    UniformAveraging { size: usize, edges: Vec<(usize, usize)> },
    Dense { rows: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifiedSection {
    pub a_o: CombinationSection,
    pub a_1: CombinationSection,
    pub a_2: CombinationSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FusionSection {
    Uniform,
    Weights { weights: Vec<f64> },
    OnOff { q: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub runs: usize,
    pub iterations: usize,
    /// Defaults to a quarter of the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_mode: Option<GradientMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default = "default_msd_tol")]
    pub msd: f64,
    #[serde(default = "default_msd_tol")]
    pub emse: f64,
    #[serde(default = "default_rate_tol")]
    pub rate_gap: f64,
}

fn default_msd_tol() -> f64 {
    0.2
}

fn default_rate_tol() -> f64 {
    0.5
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection { msd: 0.2, emse: 0.2, rate_gap: 0.5 }
    }
}

impl From<ToleranceSection> for Tolerances {
    fn from(t: ToleranceSection) -> Self {
        Tolerances { msd: t.msd, emse: t.emse, rate_gap: t.rate_gap }
    }
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

/// The canonical strategy kind names accepted in configs. The three
/// `centralized_*` aliases normalize to the centralized strategy with the
/// matching randomness cross-checked.
pub const KIND_NAMES: &[&str] = &[
    "ncop",
    "non_cooperative",
    "centralized",
    "centralized_sync",
    "centralized_random_mu",
    "centralized_random_fusion",
    "consensus",
    "cta",
    "atc",
    "unified",
    "atc_enlarged",
];

fn parse_kind(kind: &str) -> Result<(StrategyKind, Option<&'static str>), ConfigError> {
    let k = match kind {
        "ncop" | "non_cooperative" => (StrategyKind::NonCooperative, None),
        "centralized" => (StrategyKind::Centralized, None),
        "centralized_sync" => (StrategyKind::Centralized, Some("sync")),
        "centralized_random_mu" => (StrategyKind::Centralized, Some("random_mu")),
        "centralized_random_fusion" => (StrategyKind::Centralized, Some("random_fusion")),
        "consensus" => (StrategyKind::Consensus, None),
        "cta" => (StrategyKind::CtaDiffusion, None),
        "atc" => (StrategyKind::AtcDiffusion, None),
        "unified" => (StrategyKind::Unified, None),
        "atc_enlarged" => (StrategyKind::AtcEnlarged, None),
        other => {
            return Err(ConfigError::new(
                "strategy.kind",
                format!("unknown kind `{other}`; expected one of {}", KIND_NAMES.join(", ")),
            ))
        }
    };
    Ok(k)
}

fn build_topology(spec: &TopologySpec, n: usize, field: &str) -> Result<CombinationMatrix, ConfigError> {
    let check_size = |size: usize| -> Result<(), ConfigError> {
        if size != n {
            return Err(ConfigError::new(
                field,
                format!("topology size {size} does not match {n} agents"),
            ));
        }
        Ok(())
    };
    match spec {
        TopologySpec::FullyConnected { size } => {
            check_size(*size)?;
            Ok(CombinationMatrix::fully_connected(*size))
        }
        TopologySpec::Ring { size } => {
            check_size(*size)?;
            CombinationMatrix::ring(*size).map_err(|e| ConfigError::new(field, e))
        }
        TopologySpec::Metropolis { size, edges } => {
            check_size(*size)?;
            CombinationMatrix::metropolis(*size, edges).map_err(|e| ConfigError::new(field, e))
        }
        TopologySpec::UniformAveraging { size, edges } => {
            check_size(*size)?;
            CombinationMatrix::uniform_averaging(*size, edges)
                .map_err(|e| ConfigError::new(field, e))
        }
        TopologySpec::Dense { rows } => {
            let m = Mat::from_rows(rows).map_err(|e| ConfigError::new(field, e))?;
            if m.rows() != n {
                return Err(ConfigError::new(
                    field,
                    format!("matrix is {}×{}, expected {n}×{n}", m.rows(), m.cols()),
                ));
            }
            // Name the offending column in the diagnostic.
            let report = validate_left_stochastic(&m, 1e-9);
            if let Some(v) = report.violations.first() {
                let msg = match v {
                    StochasticityViolation::ColumnSum { col, sum } => {
                        format!("column {col} sums to {sum}, expected 1")
                    }
                    StochasticityViolation::NegativeEntry { row, col, value } => {
                        format!("negative entry {value} at ({row}, {col})")
                    }
                    StochasticityViolation::NonFinite { row, col } => {
                        format!("non-finite entry at ({row}, {col})")
                    }
                };
                return Err(ConfigError::new(field, msg));
            }
            CombinationMatrix::with_tolerance(m, 1e-9).map_err(|e| ConfigError::new(field, e))
        }
    }
}

fn build_policy(
    section: &CombinationSection,
    n: usize,
    field: &str,
) -> Result<RandomCombinationPolicy, ConfigError> {
    let nominal = build_topology(&section.topology, n, &format!("{field}.topology"))?;
    if let Some(q) = section.uniform_link_probability {
        if !section.link_probabilities.is_empty() {
            return Err(ConfigError::new(
                field,
                "give either uniform_link_probability or link_probabilities, not both",
            ));
        }
        return RandomCombinationPolicy::with_uniform_probability(nominal, q)
            .map_err(|e| ConfigError::new(format!("{field}.uniform_link_probability"), e));
    }
    if section.link_probabilities.is_empty() {
        return Ok(RandomCombinationPolicy::deterministic(nominal));
    }
    RandomCombinationPolicy::new(nominal, &section.link_probabilities)
        .map_err(|e| ConfigError::new(format!("{field}.link_probabilities"), e))
}

/// A fully resolved configuration: the core experiment spec plus the
/// tolerances and the canonical digest.
#[derive(Debug)]
pub struct Resolved {
    pub spec: ExperimentSpec,
    pub tolerances: Tolerances,
    pub kind: StrategyKind,
    pub digest: String,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            ConfigError::new(format!("line {}, column {}", e.line(), e.column()), e)
        })
    }

    /// Stable digest of the canonicalized config JSON with the seed override
    /// applied: SHA-256 over `serde_json::Value` (object keys sorted).
    pub fn digest(&self, seed: u64) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(exp) = value.get_mut("experiment") {
            exp["seed"] = serde_json::Value::from(seed);
        }
        let canonical = canonical_json(&value);
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates and converts into a runnable spec. `seed_override` wins over
    /// the config seed; without either the seed defaults to zero.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<Resolved, ResolveError> {
        let m = &self.model;
        let n = m.agents.len();
        if m.dim == 0 {
            return Err(ConfigError::new("model.dim", "must be positive").into());
        }
        if n == 0 {
            return Err(ConfigError::new("model.agents", "need at least one agent").into());
        }
        if m.w_o.len() != m.dim {
            return Err(ConfigError::new(
                "model.w_o",
                format!("has {} entries, expected dim = {}", m.w_o.len(), m.dim),
            )
            .into());
        }
        if !m.w_o.iter().all(|v| v.is_finite()) {
            return Err(ConfigError::new("model.w_o", "entries must be finite").into());
        }
        let mut agents = Vec::with_capacity(n);
        for (k, a) in m.agents.iter().enumerate() {
            let field = format!("model.agents[{k}]");
            if !(a.sigma_v2.is_finite() && a.sigma_v2 >= 0.0) {
                return Err(ConfigError::new(
                    format!("{field}.sigma_v2"),
                    "must be a nonnegative finite number",
                )
                .into());
            }
            let r_u = a.r_u.build(m.dim, &format!("{field}.r_u"))?;
            agents.push((r_u, a.sigma_v2));
        }
        // SPD failures inside the model constructor are math preconditions.
        let model =
            NetworkModel::regression(m.w_o.clone(), &agents).map_err(|e| classify("model", e))?;

        let (kind, centralized_variant) = parse_kind(&self.strategy.kind)?;
        let strategy = self.build_strategy(kind, centralized_variant, n)?;

        let run = &self.experiment;
        if run.runs == 0 {
            return Err(ConfigError::new("experiment.runs", "must be at least 1").into());
        }
        if run.iterations < 2 {
            return Err(ConfigError::new("experiment.iterations", "must be at least 2").into());
        }
        let window = run.window.unwrap_or((run.iterations / 4).max(1));
        if window == 0 || window >= run.iterations {
            return Err(ConfigError::new(
                "experiment.window",
                "must satisfy 0 < window < iterations",
            )
            .into());
        }
        let seed = seed_override.or(run.seed).unwrap_or(0);
        let digest = self.digest(seed);

        let mut spec = ExperimentSpec::new(model, strategy, run.runs, run.iterations, seed)
            .with_window(window)
            .with_digest(digest.clone());
        if let Some(mode) = run.gradient_mode {
            spec = spec.with_gradient_mode(mode);
        }
        if let Some(init) = &run.initial {
            if init.len() != m.dim {
                return Err(ConfigError::new(
                    "experiment.initial",
                    format!("has {} entries, expected dim = {}", init.len(), m.dim),
                )
                .into());
            }
            spec = spec.with_initial(init.clone());
        }
        spec.validate().map_err(|e| classify("experiment", e))?;
        Ok(Resolved { spec, tolerances: self.tolerances.into(), kind, digest })
    }

    fn build_strategy(
        &self,
        kind: StrategyKind,
        centralized_variant: Option<&'static str>,
        n: usize,
    ) -> Result<StrategyConfig, ResolveError> {
        let s = &self.strategy;
        let reject = |field: &str, reason: &str| -> ResolveError {
            ConfigError::new(format!("strategy.{field}"), reason).into()
        };
        match kind {
            StrategyKind::NonCooperative => {
                let steps = s.step_size.per_agent(n, "strategy.step_size")?;
                StrategyConfig::non_cooperative(steps).map_err(|e| classify("strategy", e))
            }
            StrategyKind::Centralized => {
                let steps = s.step_size.per_agent(1, "strategy.step_size")?;
                let fusion = match &s.fusion {
                    Some(FusionSection::Uniform) | None => FusionSampler::uniform(n),
                    Some(FusionSection::Weights { weights }) => {
                        FusionSampler::Deterministic { weights: weights.clone() }
                    }
                    Some(FusionSection::OnOff { q }) => {
                        FusionSampler::OnOff { agents: n, probability: *q }
                    }
                };
                // Cross-check the alias against the configured randomness.
                match centralized_variant {
                    Some("sync") => {
                        if !matches!(steps[0], StepSizeProcess::Constant { .. }) {
                            return Err(reject("step_size", "centralized_sync requires a constant step-size"));
                        }
                        if fusion.is_random() {
                            return Err(reject("fusion", "centralized_sync requires deterministic fusion"));
                        }
                    }
                    Some("random_mu") => {
                        if fusion.is_random() {
                            return Err(reject(
                                "fusion",
                                "centralized_random_mu uses deterministic fusion; use centralized_random_fusion",
                            ));
                        }
                    }
                    Some("random_fusion") => {
                        if !fusion.is_random() {
                            return Err(reject(
                                "fusion",
                                "centralized_random_fusion requires an on_off fusion sampler",
                            ));
                        }
                    }
                    _ => {}
                }
                StrategyConfig::centralized(steps[0].clone(), fusion)
                    .map_err(|e| classify("strategy", e))
            }
            StrategyKind::Consensus | StrategyKind::CtaDiffusion | StrategyKind::AtcDiffusion => {
                let steps = s.step_size.per_agent(n, "strategy.step_size")?;
                let section = s
                    .combination
                    .as_ref()
                    .ok_or_else(|| reject("combination", "required for distributed strategies"))?;
                let policy = build_policy(section, n, "strategy.combination")?;
                let build = match kind {
                    StrategyKind::Consensus => StrategyConfig::consensus,
                    StrategyKind::CtaDiffusion => StrategyConfig::cta,
                    _ => StrategyConfig::atc,
                };
                build(policy, steps).map_err(|e| classify("strategy", e))
            }
            StrategyKind::Unified => {
                let steps = s.step_size.per_agent(n, "strategy.step_size")?;
                let triple = s
                    .combinations
                    .as_ref()
                    .ok_or_else(|| reject("combinations", "required for the unified strategy"))?;
                let a_o = build_policy(&triple.a_o, n, "strategy.combinations.a_o")?;
                let a_1 = build_policy(&triple.a_1, n, "strategy.combinations.a_1")?;
                let a_2 = build_policy(&triple.a_2, n, "strategy.combinations.a_2")?;
                StrategyConfig::unified(a_o, a_1, a_2, steps)
                    .map_err(|e| classify("strategy", e))
            }
            StrategyKind::AtcEnlarged => {
                let steps = s.step_size.per_agent(n, "strategy.step_size")?;
                let section = s
                    .combination
                    .as_ref()
                    .ok_or_else(|| reject("combination", "required for distributed strategies"))?;
                let policy = build_policy(section, n, "strategy.combination")?;
                let weights = match &s.gradient_exchange {
                    None | Some(MatrixSpec::Identity) => Mat::identity(n),
                    Some(MatrixSpec::ScaledIdentity { .. }) => {
                        return Err(reject("gradient_exchange", "must be right-stochastic"));
                    }
                    Some(spec) => spec.build(n, "strategy.gradient_exchange")?,
                };
                StrategyConfig::atc_enlarged(policy, weights, steps)
                    .map_err(|e| classify("strategy", e))
            }
        }
    }
}

/// Canonical JSON rendering: objects with sorted keys, no whitespace.
/// `serde_json::Value` objects are `BTreeMap`s, so iteration is already
/// sorted; this just renders compactly and deterministically.
pub fn canonical_json(value: &serde_json::Value) -> String {
    serde_json::to_string(value).expect("value renders")
}

/// Builds a logistic data model from explicit pieces (used by library
/// callers; the JSON schema covers regression networks only).
pub fn logistic_model(
    rho: f64,
    positive_prior: f64,
    mean: Vec<f64>,
    covariance: Mat,
) -> asyncnet_core::Result<LogisticCost> {
    LogisticCost::new(rho, FeatureModel::new(positive_prior, mean, covariance)?)
}
