//! Seeded Monte Carlo engine: drives the learning recursions over synthetic
//! streaming data, estimates learning curves, steady-state MSD/EMSE, and
//! empirical convergence rates, and compares them against theory.
//!
//! Reproducibility contract: run `r` of an experiment draws all of its
//! randomness from one counter-based stream derived from `(seed, r)`, and
//! results are merged in run order. Identical specs therefore produce
//! bit-identical reports no matter how runs are scheduled, which is what
//! allows a parallel driver to reuse [`simulate_run`]/[`merge_outcomes`]
//! verbatim.
//!
//! Within an iteration the update order is fixed: draw per-agent step-sizes
//! (ascending agent index), then the combination/fusion realization, then
//! the data samples, then apply the recursion.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::costs::{CostModel, DataSample, LinearRegressionModel, LogisticCost};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::stepsize::{samplers, StepSizeSampler};
use crate::strategies::{
    apply_atc, apply_atc_enlarged, apply_centralized, apply_consensus, apply_cta,
    apply_non_cooperative, apply_unified, AgentState, ExactOracle, GradientOracle, SampleOracle,
    StrategyConfig, StrategyKind,
};

/// Iterates whose norm exceeds this guard are treated as diverged.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// How per-agent gradients are produced during simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GradientMode {
    /// One fresh data sample per agent per iteration.
    Stochastic,
    /// Exact risk gradients (no data noise); useful for deterministic
    /// convergence checks.
    Exact,
}

/// Per-agent synthetic data source.
#[derive(Clone, Debug)]
pub enum DataModel {
    Regression(LinearRegressionModel),
    /// Logistic streaming data; the minimizer has no closed form, so the
    /// reference point errors are measured against is supplied explicitly.
    Logistic { cost: LogisticCost, reference: Vec<f64> },
}

impl DataModel {
    pub fn dim(&self) -> usize {
        match self {
            DataModel::Regression(m) => m.dim(),
            DataModel::Logistic { cost, .. } => cost.dim(),
        }
    }

    pub fn cost(&self) -> CostModel {
        match self {
            DataModel::Regression(m) => CostModel::Mse(m.cost()),
            DataModel::Logistic { cost, .. } => CostModel::Logistic(cost.clone()),
        }
    }

    fn blank_sample(&self) -> DataSample {
        match self {
            DataModel::Regression(_) => DataSample::Mse { d: 0.0, u: vec![0.0; self.dim()] },
            DataModel::Logistic { .. } => {
                DataSample::Logistic { label: 1, features: vec![0.0; self.dim()] }
            }
        }
    }

    fn fill<R: rand::Rng + ?Sized>(&self, rng: &mut R, sample: &mut DataSample) {
        match self {
            DataModel::Regression(m) => m.fill_sample(rng, sample),
            DataModel::Logistic { cost, .. } => cost.feature_model().fill_sample(rng, sample),
        }
    }
}

/// The network being simulated: a common optimizer and one data model per
/// agent.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    pub optimum: Vec<f64>,
    pub agents: Vec<DataModel>,
}

impl NetworkModel {
    /// MSE network: every agent observes `d = u·w_o + v` with its own
    /// regressor covariance and noise power.
    pub fn regression(optimum: Vec<f64>, agents: &[(Mat, f64)]) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidParameter { name: "agents", reason: "need at least one agent" });
        }
        let mut models = Vec::with_capacity(agents.len());
        for (r_u, sigma_v2) in agents {
            models.push(DataModel::Regression(LinearRegressionModel::new(
                optimum.clone(),
                r_u.clone(),
                *sigma_v2,
            )?));
        }
        Ok(NetworkModel { optimum, agents: models })
    }

    /// Uniform MSE network: shared regressor covariance, per-agent noise.
    pub fn uniform_regression(optimum: Vec<f64>, r_u: Mat, sigma_v2: &[f64]) -> Result<Self> {
        let specs: Vec<(Mat, f64)> = sigma_v2.iter().map(|&s| (r_u.clone(), s)).collect();
        NetworkModel::regression(optimum, &specs)
    }

    pub fn size(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.optimum.len()
    }

    pub fn costs(&self) -> Vec<CostModel> {
        self.agents.iter().map(DataModel::cost).collect()
    }

    pub fn is_regression(&self) -> bool {
        self.agents.iter().all(|a| matches!(a, DataModel::Regression(_)))
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !self.optimum.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("optimum"));
        }
        for a in &self.agents {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: a.dim() });
            }
        }
        Ok(())
    }
}

/// A complete, reproducible experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub model: NetworkModel,
    pub strategy: StrategyConfig,
    pub runs: usize,
    pub iterations: usize,
    /// Steady-state window: estimates average over the last `window`
    /// iterations of each run.
    pub window: usize,
    pub seed: u64,
    pub gradient_mode: GradientMode,
    /// Initial iterate for every agent; zeros when absent.
    pub initial: Option<Vec<f64>>,
    /// Opaque configuration identifier carried into reports.
    pub digest: String,
}

impl ExperimentSpec {
    /// Window defaults to a quarter of the horizon.
    pub fn new(
        model: NetworkModel,
        strategy: StrategyConfig,
        runs: usize,
        iterations: usize,
        seed: u64,
    ) -> Self {
        ExperimentSpec {
            model,
            strategy,
            runs,
            iterations,
            window: (iterations / 4).max(1),
            seed,
            gradient_mode: GradientMode::Stochastic,
            initial: None,
            digest: String::new(),
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Self {
        self.gradient_mode = mode;
        self
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Self {
        self.initial = Some(initial);
        self
    }

    pub fn with_digest(mut self, digest: String) -> Self {
        self.digest = digest;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.strategy.validate(self.model.size())?;
        if self.runs < 1 {
            return Err(Error::InvalidParameter { name: "runs", reason: "must be at least 1" });
        }
        if self.window == 0 || self.window >= self.iterations {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: "must satisfy 0 < window < iterations",
            });
        }
        if let Some(init) = &self.initial {
            if init.len() != self.model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.model.dim(),
                    found: init.len(),
                });
            }
            if !init.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("initial"));
            }
        }
        Ok(())
    }

    /// Number of learner states (1 for centralized, N otherwise).
    pub fn state_count(&self) -> usize {
        self.strategy.state_count(self.model.size())
    }
}

/// Where and when a run left the guard region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DivergenceInfo {
    pub iteration: usize,
    pub agent: usize,
}

/// Result of one Monte Carlo run; opaque, merged by [`merge_outcomes`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// `completed × states` squared-error trajectory, iteration-major.
    curve: Vec<f64>,
    completed: usize,
    states: usize,
    window_msd: Vec<f64>,
    half_window_msd: Vec<f64>,
    window_emse: Vec<f64>,
    diverged: Option<DivergenceInfo>,
}

/// Per-iteration, per-agent mean-square deviation averaged over runs, plus
/// the network average.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LearningCurve {
    /// `per_agent[k][i]` is the estimated `E‖w̃_{k,i}‖²`.
    pub per_agent: Vec<Vec<f64>>,
    /// Average curve across agents.
    pub network: Vec<f64>,
}

/// Window-averaged steady-state estimates with standard errors.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SteadyStateReport {
    pub digest: String,
    pub agents: usize,
    pub runs: usize,
    pub iterations: usize,
    pub window: usize,
    pub per_agent_msd: Vec<f64>,
    pub per_agent_msd_std_error: Vec<f64>,
    pub network_msd: f64,
    pub network_msd_std_error: f64,
    /// Quadratic-form EMSE estimates; empty unless every agent follows a
    /// regression model.
    pub per_agent_emse: Vec<f64>,
    pub network_emse: Option<f64>,
    /// Log-linear fit of the transient of the network curve.
    pub rate_estimate: Option<f64>,
    /// First iteration at which the network curve reaches twice its
    /// steady-state level.
    pub iterations_to_twice_msd: Option<usize>,
    /// Steady-state detection: the last-window and last-half-window means
    /// agree within two combined standard errors.
    pub converged: bool,
    pub diverged: Option<DivergenceInfo>,
}

/// RNG stream for one run: same key, per-run stream counter.
pub fn run_rng(seed: u64, run: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Simulates a single run. Divergence is captured in the outcome rather than
/// returned as an error.
pub fn simulate_run(spec: &ExperimentSpec, run: usize) -> Result<RunOutcome> {
    spec.validate()?;
    let n = spec.model.size();
    let dim = spec.model.dim();
    let states_n = spec.state_count();
    let t = spec.iterations;
    let window = spec.window;
    let half = (window / 2).max(1);

    let costs = spec.model.costs();
    let step_samplers: Vec<StepSizeSampler> = samplers(&spec.strategy.step_sizes)?;
    let mut rng = run_rng(spec.seed, run);

    let mut states: Vec<AgentState> = (0..states_n)
        .map(|_| match &spec.initial {
            Some(init) => AgentState::from_weights(init.clone()),
            None => AgentState::zeros(dim),
        })
        .collect();

    let mut samples: Vec<DataSample> =
        spec.model.agents.iter().map(DataModel::blank_sample).collect();
    let mut mus = vec![0.0; states_n.max(1)];
    let mut fusion_weights = vec![0.0; n];
    let mut a_real = Mat::zeros(n, n);
    let mut unified_real = [Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n)];

    // EMSE matrices: per-state regressor covariances (their average for the
    // centralized iterate). Empty for non-regression networks.
    let emse_mats: Vec<Mat> = if spec.model.is_regression() {
        let covs: Vec<&Mat> = spec
            .model
            .agents
            .iter()
            .map(|a| match a {
                DataModel::Regression(m) => m.regressor_covariance(),
                DataModel::Logistic { .. } => unreachable!(),
            })
            .collect();
        if states_n == 1 && n > 1 {
            let mut avg = Mat::zeros(dim, dim);
            for c in &covs {
                avg = avg.add(c);
            }
            vec![avg.scale(1.0 / n as f64)]
        } else {
            covs.into_iter().cloned().collect()
        }
    } else {
        Vec::new()
    };

    let mut curve = Vec::with_capacity(t * states_n);
    let mut window_sum = vec![0.0; states_n];
    let mut half_sum = vec![0.0; states_n];
    let mut emse_sum = vec![0.0; states_n];
    let mut diff = vec![0.0; dim];
    let mut diverged = None;
    let mut completed = 0usize;

    'iterations: for i in 0..t {
        // 1) Step-sizes, ascending agent order.
        for (slot, sampler) in mus.iter_mut().zip(&step_samplers) {
            *slot = sampler.sample(&mut rng);
        }
        // 2) Combination / fusion realization.
        match spec.strategy.kind {
            StrategyKind::Consensus
            | StrategyKind::CtaDiffusion
            | StrategyKind::AtcDiffusion
            | StrategyKind::AtcEnlarged => {
                spec.strategy.policy.as_ref().expect("validated").sample_into(&mut a_real, &mut rng);
            }
            StrategyKind::Unified => {
                let triple = spec.strategy.unified_policies.as_ref().expect("validated");
                for (real, policy) in unified_real.iter_mut().zip(triple.iter()) {
                    policy.sample_into(real, &mut rng);
                }
            }
            StrategyKind::Centralized => {
                spec.strategy
                    .fusion
                    .as_ref()
                    .expect("validated")
                    .sample_into(&mut fusion_weights, &mut rng);
            }
            StrategyKind::NonCooperative => {}
        }
        // 3) Data samples, ascending agent order.
        if spec.gradient_mode == GradientMode::Stochastic {
            for (model, sample) in spec.model.agents.iter().zip(samples.iter_mut()) {
                model.fill(&mut rng, sample);
            }
        }
        // 4) Apply the recursion.
        let step = |states: &mut [AgentState], mut oracle: &mut dyn GradientOracle| -> Result<()> {
            match spec.strategy.kind {
                StrategyKind::NonCooperative => {
                    apply_non_cooperative(states, &mus, &mut oracle)
                }
                StrategyKind::Consensus => apply_consensus(&a_real, states, &mus, &mut oracle),
                StrategyKind::CtaDiffusion => apply_cta(&a_real, states, &mus, &mut oracle),
                StrategyKind::AtcDiffusion => apply_atc(&a_real, states, &mus, &mut oracle),
                StrategyKind::Unified => apply_unified(
                    &unified_real[0],
                    &unified_real[1],
                    &unified_real[2],
                    states,
                    &mus,
                    &mut oracle,
                ),
                StrategyKind::AtcEnlarged => apply_atc_enlarged(
                    &a_real,
                    spec.strategy.gradient_weights.as_ref().expect("validated"),
                    states,
                    &mus,
                    &mut oracle,
                ),
                StrategyKind::Centralized => {
                    apply_centralized(&mut states[0].w, mus[0], &fusion_weights, n, &mut oracle)
                }
            }
        };
        match spec.gradient_mode {
            GradientMode::Stochastic => {
                let mut oracle = SampleOracle { costs: &costs, samples: &samples };
                step(&mut states, &mut oracle)?;
            }
            GradientMode::Exact => {
                let mut oracle = ExactOracle { costs: &costs };
                step(&mut states, &mut oracle)?;
            }
        }
        // 5) Measure squared deviations and accumulate window statistics.
        for (s, state) in states.iter().enumerate() {
            let mut err = 0.0;
            for (j, (&wj, &oj)) in state.w.iter().zip(&spec.model.optimum).enumerate() {
                let dj = oj - wj;
                diff[j] = dj;
                err += dj * dj;
            }
            curve.push(err);
            if !(err.is_finite() && err <= DIVERGENCE_GUARD * DIVERGENCE_GUARD) {
                diverged = Some(DivergenceInfo { iteration: i, agent: s });
                // Drop the blown-up tail measurement.
                curve.truncate(i * states_n);
                completed = i;
                break 'iterations;
            }
            if i + window >= t {
                window_sum[s] += err;
                if !emse_mats.is_empty() {
                    emse_sum[s] += emse_mats[s].quad_form(&diff);
                }
            }
            if i + half >= t {
                half_sum[s] += err;
            }
        }
        completed = i + 1;
    }

    let (window_msd, half_window_msd, window_emse) = if diverged.is_none() {
        (
            window_sum.iter().map(|v| v / window as f64).collect(),
            half_sum.iter().map(|v| v / half as f64).collect(),
            if emse_mats.is_empty() {
                Vec::new()
            } else {
                emse_sum.iter().map(|v| v / window as f64).collect()
            },
        )
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };

    Ok(RunOutcome {
        curve,
        completed,
        states: states_n,
        window_msd,
        half_window_msd,
        window_emse,
        diverged,
    })
}

fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let r = values.len();
    let mean = values.iter().sum::<f64>() / r as f64;
    if r < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64;
    (mean, (var / r as f64).sqrt())
}

/// Merges per-run outcomes in run order into the averaged learning curve and
/// the steady-state report. The fold is associative only in run order, so
/// parallel drivers must pass outcomes sorted by run index.
pub fn merge_outcomes(spec: &ExperimentSpec, outcomes: Vec<RunOutcome>) -> Result<(LearningCurve, SteadyStateReport)> {
    if outcomes.len() != spec.runs {
        return Err(Error::DimensionMismatch { expected: spec.runs, found: outcomes.len() });
    }
    let states = outcomes[0].states;
    let runs = outcomes.len();
    let min_completed = outcomes.iter().map(|o| o.completed).min().unwrap_or(0);
    let diverged = outcomes
        .iter()
        .filter_map(|o| o.diverged)
        .min_by_key(|d| d.iteration);

    // Curve averaged over runs up to the shortest completed prefix.
    let mut curve_sum = vec![0.0; min_completed * states];
    for o in &outcomes {
        for (acc, v) in curve_sum.iter_mut().zip(&o.curve) {
            *acc += v;
        }
    }
    let inv = 1.0 / runs as f64;
    let mut per_agent = vec![vec![0.0; min_completed]; states];
    let mut network_curve = vec![0.0; min_completed];
    for i in 0..min_completed {
        let mut total = 0.0;
        for s in 0..states {
            let v = curve_sum[i * states + s] * inv;
            per_agent[s][i] = v;
            total += v;
        }
        network_curve[i] = total / states as f64;
    }
    let curve = LearningCurve { per_agent, network: network_curve };

    if let Some(info) = diverged {
        let report = SteadyStateReport {
            digest: spec.digest.clone(),
            agents: states,
            runs,
            iterations: spec.iterations,
            window: spec.window,
            per_agent_msd: Vec::new(),
            per_agent_msd_std_error: Vec::new(),
            network_msd: 0.0,
            network_msd_std_error: 0.0,
            per_agent_emse: Vec::new(),
            network_emse: None,
            rate_estimate: None,
            iterations_to_twice_msd: None,
            converged: false,
            diverged: Some(info),
        };
        return Ok((curve, report));
    }

    // Steady-state estimates across runs.
    let mut per_agent_msd = vec![0.0; states];
    let mut per_agent_se = vec![0.0; states];
    for s in 0..states {
        let vals: Vec<f64> = outcomes.iter().map(|o| o.window_msd[s]).collect();
        let (m, se) = mean_and_std_error(&vals);
        per_agent_msd[s] = m;
        per_agent_se[s] = se;
    }
    let net_runs: Vec<f64> = outcomes
        .iter()
        .map(|o| o.window_msd.iter().sum::<f64>() / states as f64)
        .collect();
    let (network_msd, network_se) = mean_and_std_error(&net_runs);
    let half_runs: Vec<f64> = outcomes
        .iter()
        .map(|o| o.half_window_msd.iter().sum::<f64>() / states as f64)
        .collect();
    let (half_mean, half_se) = mean_and_std_error(&half_runs);
    let combined_se = (network_se * network_se + half_se * half_se).sqrt();
    let converged = (network_msd - half_mean).abs() < 2.0 * combined_se.max(f64::MIN_POSITIVE);

    let has_emse = !outcomes[0].window_emse.is_empty();
    let per_agent_emse: Vec<f64> = if has_emse {
        (0..states)
            .map(|s| outcomes.iter().map(|o| o.window_emse[s]).sum::<f64>() / runs as f64)
            .collect()
    } else {
        Vec::new()
    };
    let network_emse =
        has_emse.then(|| per_agent_emse.iter().sum::<f64>() / states as f64);

    let rate_estimate = estimate_rate(&curve.network, network_msd);
    let iterations_to_twice_msd =
        curve.network.iter().position(|&v| v <= 2.0 * network_msd);

    let report = SteadyStateReport {
        digest: spec.digest.clone(),
        agents: states,
        runs,
        iterations: spec.iterations,
        window: spec.window,
        per_agent_msd,
        per_agent_msd_std_error: per_agent_se,
        network_msd,
        network_msd_std_error: network_se,
        per_agent_emse,
        network_emse,
        rate_estimate,
        iterations_to_twice_msd,
        converged,
        diverged: None,
    };
    Ok((curve, report))
}

/// Runs the full experiment serially: simulate every run, merge in order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(LearningCurve, SteadyStateReport)> {
    spec.validate()?;
    let outcomes: Result<Vec<RunOutcome>> =
        (0..spec.runs).map(|r| simulate_run(spec, r)).collect();
    merge_outcomes(spec, outcomes?)
}

/// Log-linear fit of the geometric convergence factor from the transient of
/// a learning curve.
///
/// The transient is the prefix where the curve stays above three times the
/// steady-state level; the fit uses iterations between 10% and 50% of that
/// prefix. Points at or below the steady-state level are skipped; if fewer
/// than two usable points remain the rate is not identifiable and `None` is
/// returned.
pub fn estimate_rate(curve: &[f64], steady_state: f64) -> Option<f64> {
    let transient_end = curve.iter().position(|&v| v <= 3.0 * steady_state)?;
    if transient_end < 4 {
        return None;
    }
    let lo = transient_end / 10;
    let hi = transient_end / 2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in lo..=hi {
        let excess = curve[i] - steady_state;
        if excess > 0.0 {
            xs.push(i as f64);
            ys.push(excess.ln());
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return None;
    }
    Some((num / den).exp())
}

// ---------------------------------------------------------------------------
// Theory comparison
// ---------------------------------------------------------------------------

/// Acceptance tolerances for theory-vs-simulation comparisons (relative).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    pub msd: f64,
    pub emse: f64,
    /// Compared on the contraction gap `1 − α`.
    pub rate_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { msd: 0.2, emse: 0.2, rate_gap: 0.5 }
    }
}

/// A theory prediction packaged for comparison against a simulation report.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TheoryRecord {
    pub digest: String,
    pub msd: f64,
    pub emse: Option<f64>,
    pub rate: Option<f64>,
}

/// One quantity's empirical-vs-predicted row.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ComparisonRow {
    pub quantity: &'static str,
    pub empirical: f64,
    pub predicted: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Full comparison result; `comparable == false` (with a reason) when the
/// simulation diverged.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Comparison {
    pub digest: String,
    pub comparable: bool,
    pub reason: Option<&'static str>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn all_pass(&self) -> bool {
        self.comparable && self.rows.iter().all(|r| r.pass)
    }
}

/// Compares a steady-state report against a theory record produced from the
/// same configuration (digests must match).
pub fn compare_theory(
    report: &SteadyStateReport,
    theory: &TheoryRecord,
    tolerances: &Tolerances,
) -> Result<Comparison> {
    if report.digest != theory.digest {
        return Err(Error::DigestMismatch);
    }
    if report.diverged.is_some() {
        return Ok(Comparison {
            digest: report.digest.clone(),
            comparable: false,
            reason: Some("simulation diverged"),
            rows: Vec::new(),
        });
    }
    let mut rows = Vec::new();
    let rel = |emp: f64, th: f64| (emp - th) / th;
    rows.push(ComparisonRow {
        quantity: "msd",
        empirical: report.network_msd,
        predicted: theory.msd,
        relative_error: rel(report.network_msd, theory.msd),
        tolerance: tolerances.msd,
        pass: rel(report.network_msd, theory.msd).abs() <= tolerances.msd,
    });
    if let (Some(emp), Some(th)) = (report.network_emse, theory.emse) {
        rows.push(ComparisonRow {
            quantity: "emse",
            empirical: emp,
            predicted: th,
            relative_error: rel(emp, th),
            tolerance: tolerances.emse,
            pass: rel(emp, th).abs() <= tolerances.emse,
        });
    }
    if let (Some(emp), Some(th)) = (report.rate_estimate, theory.rate) {
        // Rates sit next to one; compare contraction gaps instead.
        let gap_err = rel(1.0 - emp, 1.0 - th);
        rows.push(ComparisonRow {
            quantity: "rate_gap",
            empirical: 1.0 - emp,
            predicted: 1.0 - th,
            relative_error: gap_err,
            tolerance: tolerances.rate_gap,
            pass: gap_err.abs() <= tolerances.rate_gap,
        });
    }
    Ok(Comparison { digest: report.digest.clone(), comparable: true, reason: None, rows })
}

/// Maximum relative spread of per-agent steady-state MSDs around the network
/// average; the distributed strategies equalize performance, so this should
/// be small for them.
pub fn equalization_check(report: &SteadyStateReport) -> Result<f64> {
    if report.diverged.is_some() {
        return Err(Error::NotComparable("simulation diverged"));
    }
    if report.agents == 0 || report.per_agent_msd.is_empty() {
        return Err(Error::NotComparable("no per-agent estimates"));
    }
    if report.agents == 1 {
        return Ok(0.0);
    }
    let avg = report.network_msd;
    Ok(report
        .per_agent_msd
        .iter()
        .map(|&m| (m - avg).abs() / avg)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepsize::StepSizeProcess;
    use crate::strategies::FusionSampler;
    use crate::topology::{CombinationMatrix, RandomCombinationPolicy};
    use approx::assert_relative_eq;

    fn single_lms_spec(mu: f64, sigma_v2: f64, runs: usize, t: usize) -> ExperimentSpec {
        let dim = 5;
        let w_o = vec![1.0 / (dim as f64).sqrt(); dim];
        let model =
            NetworkModel::uniform_regression(w_o, Mat::identity(dim), &[sigma_v2]).unwrap();
        let strategy =
            StrategyConfig::non_cooperative(vec![StepSizeProcess::constant(mu)]).unwrap();
        ExperimentSpec::new(model, strategy, runs, t, 42)
    }

    #[test]
    fn zero_noise_reaches_machine_precision() {
        let dim = 3;
        let model = NetworkModel::uniform_regression(
            vec![0.5, -0.5, 0.25],
            Mat::identity(dim),
            &[0.0, 0.0, 0.0],
        )
        .unwrap();
        let policy = RandomCombinationPolicy::deterministic(
            CombinationMatrix::metropolis(3, &[(0, 1), (1, 2), (2, 0)]).unwrap(),
        );
        let strategy =
            StrategyConfig::atc(policy, vec![StepSizeProcess::constant(0.1); 3]).unwrap();
        let spec = ExperimentSpec::new(model, strategy, 1, 400, 7)
            .with_gradient_mode(GradientMode::Exact);
        let (_, report) = run_experiment(&spec).unwrap();
        assert!(report.network_msd < 1e-12, "msd {}", report.network_msd);
    }

    #[test]
    fn single_agent_lms_matches_theory_smoke() {
        // Small version of the headline check: MSD ≈ μMσ_v².
        let spec = single_lms_spec(0.002, 0.01, 25, 9000);
        let (_, report) = run_experiment(&spec).unwrap();
        let expected = 0.002 * 5.0 * 0.01;
        let rel = (report.network_msd - expected).abs() / expected;
        assert!(rel < 0.25, "relative error {rel} (msd {})", report.network_msd);
        assert!(report.converged);
        assert!(report.network_emse.is_some());
        assert!(report.iterations_to_twice_msd.is_some());
    }

    #[test]
    fn reports_are_bit_reproducible() {
        let spec = single_lms_spec(0.01, 0.02, 4, 500);
        let (c1, r1) = run_experiment(&spec).unwrap();
        let (c2, r2) = run_experiment(&spec).unwrap();
        assert_eq!(c1.network, c2.network);
        assert_eq!(r1.network_msd.to_bits(), r2.network_msd.to_bits());
        assert_eq!(r1.per_agent_msd, r2.per_agent_msd);
    }

    #[test]
    fn runs_differ_across_streams() {
        let spec = single_lms_spec(0.01, 0.02, 2, 200);
        let a = simulate_run(&spec, 0).unwrap();
        let b = simulate_run(&spec, 1).unwrap();
        assert_ne!(a.curve, b.curve);
    }

    #[test]
    fn divergence_guard_reports_blowup() {
        // Unstable step-size for R_u = I: μ well above 1/λ_max(H) = 0.5.
        let spec = single_lms_spec(5.0, 0.01, 2, 2000);
        let (_, report) = run_experiment(&spec).unwrap();
        let info = report.diverged.expect("must diverge");
        assert!(info.iteration < 2000);
        assert!(!report.converged);
        assert!(equalization_check(&report).is_err());
    }

    #[test]
    fn too_short_runs_report_not_converged() {
        // Horizon far below the transient: the window means keep falling.
        // Exact-gradient mode makes the check deterministic (zero standard
        // errors, strictly decreasing curve).
        let spec = single_lms_spec(0.002, 0.01, 1, 200)
            .with_gradient_mode(GradientMode::Exact);
        let (_, report) = run_experiment(&spec).unwrap();
        assert!(!report.converged);
    }

    #[test]
    fn standard_errors_shrink_like_inverse_sqrt_runs() {
        // Regress ln SE on ln R: slope should be near −1/2.
        let mut points = Vec::new();
        for &runs in &[10usize, 40, 160] {
            let spec = single_lms_spec(0.01, 0.05, runs, 3000);
            let (_, report) = run_experiment(&spec).unwrap();
            points.push(((runs as f64).ln(), report.network_msd_std_error.ln()));
        }
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let slope = num / den;
        assert!(
            (slope + 0.5).abs() < 0.15,
            "standard errors scale with slope {slope}, expected ≈ −0.5"
        );
    }

    #[test]
    fn rate_estimate_tracks_theory() {
        let spec = single_lms_spec(0.002, 0.01, 40, 9000);
        let (_, report) = run_experiment(&spec).unwrap();
        let alpha = report.rate_estimate.expect("transient present");
        // α = 1 − 2νμ is the contraction factor of the mean-square
        // recursion, so the squared-error curve itself decays at α.
        let alpha_theory = 1.0 - 2.0 * 2.0 * 0.002;
        let gap_ratio = (1.0 - alpha) / (1.0 - alpha_theory);
        assert!(
            (0.7..1.3).contains(&gap_ratio),
            "fitted {alpha}, expected ≈ {alpha_theory}"
        );
    }

    #[test]
    fn centralized_state_is_single() {
        let model = NetworkModel::uniform_regression(
            vec![0.3, 0.3],
            Mat::identity(2),
            &[0.01, 0.05],
        )
        .unwrap();
        let strategy = StrategyConfig::centralized(
            StepSizeProcess::constant(0.01),
            FusionSampler::uniform(2),
        )
        .unwrap();
        let spec = ExperimentSpec::new(model, strategy, 5, 1200, 3);
        let (curve, report) = run_experiment(&spec).unwrap();
        assert_eq!(report.agents, 1);
        assert_eq!(curve.per_agent.len(), 1);
        assert_eq!(equalization_check(&report).unwrap(), 0.0);
    }

    #[test]
    fn comparison_rows_and_guards() {
        let spec = single_lms_spec(0.01, 0.02, 4, 600);
        let (_, report) = run_experiment(&spec).unwrap();

        // Identical numbers: zero relative error.
        let theory = TheoryRecord {
            digest: String::new(),
            msd: report.network_msd,
            emse: report.network_emse,
            rate: report.rate_estimate,
        };
        let cmp = compare_theory(&report, &theory, &Tolerances::default()).unwrap();
        assert!(cmp.comparable);
        assert!(cmp.all_pass());
        assert_relative_eq!(cmp.rows[0].relative_error, 0.0);

        // Digest mismatch is an error.
        let other = TheoryRecord { digest: String::from("other"), ..theory.clone() };
        assert!(matches!(
            compare_theory(&report, &other, &Tolerances::default()),
            Err(Error::DigestMismatch)
        ));

        // Diverged reports are flagged not comparable.
        let diverging = single_lms_spec(5.0, 0.01, 2, 500);
        let (_, bad) = run_experiment(&diverging).unwrap();
        let theory2 = TheoryRecord { digest: String::new(), msd: 1e-4, emse: None, rate: None };
        let cmp = compare_theory(&bad, &theory2, &Tolerances::default()).unwrap();
        assert!(!cmp.comparable);
        assert_eq!(cmp.reason, Some("simulation diverged"));
    }

    #[test]
    fn logistic_networks_simulate() {
        use crate::costs::FeatureModel;
        // Diffusion logistic regression runs and stays finite; errors are
        // measured against the supplied reference point.
        let dim = 2;
        let feature =
            FeatureModel::balanced(vec![1.0, -0.5], Mat::identity(dim)).unwrap();
        let cost = LogisticCost::new(0.1, feature).unwrap();
        let reference = vec![0.4, -0.2];
        let model = NetworkModel {
            optimum: reference.clone(),
            agents: (0..3)
                .map(|_| DataModel::Logistic { cost: cost.clone(), reference: reference.clone() })
                .collect(),
        };
        let policy = RandomCombinationPolicy::deterministic(
            CombinationMatrix::metropolis(3, &[(0, 1), (1, 2), (2, 0)]).unwrap(),
        );
        let strategy =
            StrategyConfig::atc(policy, vec![StepSizeProcess::constant(0.05); 3]).unwrap();
        let spec = ExperimentSpec::new(model, strategy, 3, 400, 5);
        let (_, report) = run_experiment(&spec).unwrap();
        assert!(report.diverged.is_none());
        // No quadratic-form EMSE for logistic networks.
        assert!(report.network_emse.is_none());
        assert!(report.per_agent_emse.is_empty());
    }

    #[test]
    fn mu_sweep_is_linear_smoke() {
        // Steady-state MSD roughly doubles with the step-size.
        let msd_at = |mu: f64| {
            let spec = single_lms_spec(mu, 0.01, 20, (12.0 / mu) as usize);
            run_experiment(&spec).unwrap().1.network_msd
        };
        let m1 = msd_at(0.002);
        let m2 = msd_at(0.004);
        let ratio = m2 / m1;
        assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
    }
}
