//! Learning recursions: single-agent, centralized, consensus, CTA/ATC
//! diffusion, the unifying three-matrix form, enlarged gradient exchange,
//! and classical consensus averaging.
//!
//! All network recursions are synchronous-in-iteration maps: within one
//! iteration every agent reads previous-iteration state, so the per-agent
//! phases can run in any order without changing results. Combination steps
//! accumulate neighbors in ascending index order, which makes trajectories
//! bit-reproducible across the dedicated recursions and the unified form.
//!
//! The distinction between consensus and diffusion lives in a single line:
//! consensus corrects the combined iterate with a gradient evaluated at the
//! agent's *own previous* iterate, CTA evaluates it at the *combined*
//! iterate, and ATC adapts first and combines after.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::costs::{CostModel, DataSample};
use crate::error::{Error, Result};
use crate::linalg::{axpy, Mat};
use crate::stepsize::StepSizeProcess;
use crate::topology::{CombinationMatrix, RandomCombinationPolicy, DEFAULT_TOL};

// ---------------------------------------------------------------------------
// Agent state and gradient oracles
// ---------------------------------------------------------------------------

/// Per-agent iterate plus the two intermediate variables used by the
/// two- and three-stage recursions.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub w: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

impl AgentState {
    pub fn zeros(dim: usize) -> Self {
        AgentState { w: vec![0.0; dim], psi: vec![0.0; dim], phi: vec![0.0; dim] }
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        let dim = w.len();
        AgentState { w, psi: vec![0.0; dim], phi: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

/// Fresh zero-initialized states for a network.
pub fn network_states(agents: usize, dim: usize) -> Vec<AgentState> {
    (0..agents).map(|_| AgentState::zeros(dim)).collect()
}

/// Supplies (approximate) gradients to the recursions. The recursion decides
/// *where* the gradient is evaluated; the oracle decides *how*.
pub trait GradientOracle {
    fn gradient_into(&mut self, agent: usize, point: &[f64], out: &mut [f64]) -> Result<()>;
}

impl<T: GradientOracle + ?Sized> GradientOracle for &mut T {
    fn gradient_into(&mut self, agent: usize, point: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).gradient_into(agent, point, out)
    }
}

/// Stochastic gradients from one data sample per agent.
pub struct SampleOracle<'a> {
    pub costs: &'a [CostModel],
    pub samples: &'a [DataSample],
}

impl GradientOracle for SampleOracle<'_> {
    fn gradient_into(&mut self, agent: usize, point: &[f64], out: &mut [f64]) -> Result<()> {
        self.costs[agent].stochastic_gradient_into(point, &self.samples[agent], out)
    }
}

/// Exact risk gradients (no data): turns every recursion into its
/// deterministic gradient-descent counterpart.
pub struct ExactOracle<'a> {
    pub costs: &'a [CostModel],
}

impl GradientOracle for ExactOracle<'_> {
    fn gradient_into(&mut self, agent: usize, point: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.costs[agent].gradient(point)?;
        out.copy_from_slice(&g);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Combination phase
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Field {
    W,
    Psi,
    Phi,
}

fn take_field(state: &mut AgentState, f: Field) -> Vec<f64> {
    match f {
        Field::W => core::mem::take(&mut state.w),
        Field::Psi => core::mem::take(&mut state.psi),
        Field::Phi => core::mem::take(&mut state.phi),
    }
}

fn put_field(state: &mut AgentState, f: Field, v: Vec<f64>) {
    match f {
        Field::W => state.w = v,
        Field::Psi => state.psi = v,
        Field::Phi => state.phi = v,
    }
}

fn get_field(state: &AgentState, f: Field) -> &[f64] {
    match f {
        Field::W => &state.w,
        Field::Psi => &state.psi,
        Field::Phi => &state.phi,
    }
}

/// `dst[k] = Σ_ℓ a_{ℓk} src[ℓ]`, accumulated in ascending ℓ with exact-zero
/// coefficients skipped.
fn combine(a: &Mat, states: &mut [AgentState], src: Field, dst: Field) {
    debug_assert!(src != dst);
    let n = states.len();
    for k in 0..n {
        let mut acc = take_field(&mut states[k], dst);
        acc.fill(0.0);
        for l in 0..n {
            let c = a[(l, k)];
            if c != 0.0 {
                axpy(c, get_field(&states[l], src), &mut acc);
            }
        }
        put_field(&mut states[k], dst, acc);
    }
}

// ---------------------------------------------------------------------------
// Step kernels (explicit realizations, shared by wrappers and the simulator)
// ---------------------------------------------------------------------------

/// Non-cooperative step for every agent: `w ← w − μ_k ∇̂J_k(w)`.
pub fn apply_non_cooperative<G: GradientOracle>(
    states: &mut [AgentState],
    mus: &[f64],
    oracle: &mut G,
) -> Result<()> {
    let dim = states.first().map_or(0, AgentState::dim);
    let mut g = vec![0.0; dim];
    for (k, state) in states.iter_mut().enumerate() {
        oracle.gradient_into(k, &state.w, &mut g)?;
        let mu = mus[k];
        for (wj, &gj) in state.w.iter_mut().zip(&g) {
            *wj -= mu * gj;
        }
    }
    Ok(())
}

/// Consensus step: combine previous iterates, then correct with the gradient
/// evaluated at the agent's own previous iterate (not the combination).
pub fn apply_consensus<G: GradientOracle>(
    a: &Mat,
    states: &mut [AgentState],
    mus: &[f64],
    oracle: &mut G,
) -> Result<()> {
    combine(a, states, Field::W, Field::Psi);
    let dim = states.first().map_or(0, AgentState::dim);
    let mut g = vec![0.0; dim];
    for (k, state) in states.iter_mut().enumerate() {
        oracle.gradient_into(k, &state.w, &mut g)?;
        let mu = mus[k];
        for j in 0..dim {
            state.w[j] = state.psi[j] - mu * g[j];
        }
    }
    Ok(())
}

/// Combine-then-adapt diffusion: the gradient is evaluated at the combined
/// iterate.
pub fn apply_cta<G: GradientOracle>(
    a: &Mat,
    states: &mut [AgentState],
    mus: &[f64],
    oracle: &mut G,
) -> Result<()> {
    combine(a, states, Field::W, Field::Psi);
    let dim = states.first().map_or(0, AgentState::dim);
    let mut g = vec![0.0; dim];
    for (k, state) in states.iter_mut().enumerate() {
        oracle.gradient_into(k, &state.psi, &mut g)?;
        let mu = mus[k];
        for j in 0..dim {
            state.w[j] = state.psi[j] - mu * g[j];
        }
    }
    Ok(())
}

/// Adapt-then-combine diffusion.
pub fn apply_atc<G: GradientOracle>(
    a: &Mat,
    states: &mut [AgentState],
    mus: &[f64],
    oracle: &mut G,
) -> Result<()> {
    let dim = states.first().map_or(0, AgentState::dim);
    let mut g = vec![0.0; dim];
    for (k, state) in states.iter_mut().enumerate() {
        oracle.gradient_into(k, &state.w, &mut g)?;
        let mu = mus[k];
        for j in 0..dim {
            state.psi[j] = state.w[j] - mu * g[j];
        }
    }
    combine(a, states, Field::Psi, Field::W);
    Ok(())
}

/// Unifying three-matrix recursion:
/// `φ = A₁ᵀ-combine(w)`, `ψ = A_oᵀ-combine(φ) − μ ∇̂J(φ)` with the gradient
/// at the agent's own `φ`, then `w = A₂ᵀ-combine(ψ)`.
pub fn apply_unified<G: GradientOracle>(
    a_o: &Mat,
    a_1: &Mat,
    a_2: &Mat,
    states: &mut [AgentState],
    mus: &[f64],
    oracle: &mut G,
) -> Result<()> {
    combine(a_1, states, Field::W, Field::Phi);
    combine(a_o, states, Field::Phi, Field::Psi);
    let dim = states.first().map_or(0, AgentState::dim);
    let mut g = vec![0.0; dim];
    for (k, state) in states.iter_mut().enumerate() {
        oracle.gradient_into(k, &state.phi, &mut g)?;
        axpy(-mus[k], &g, &mut state.psi);
    }
    combine(a_2, states, Field::Psi, Field::W);
    Ok(())
}

/// ATC diffusion with enlarged cooperation: the adaptation step aggregates
/// neighbors' gradient approximations, all evaluated at the agent's own
/// iterate, with right-stochastic weights `C`.
pub fn apply_atc_enlarged<G: GradientOracle>(
    a: &Mat,
    c: &Mat,
    states: &mut [AgentState],
    mus: &[f64],
    oracle: &mut G,
) -> Result<()> {
    let n = states.len();
    let dim = states.first().map_or(0, AgentState::dim);
    let mut g = vec![0.0; dim];
    let mut agg = vec![0.0; dim];
    for k in 0..n {
        agg.fill(0.0);
        for l in 0..n {
            let weight = c[(l, k)];
            if weight == 0.0 {
                continue;
            }
            oracle.gradient_into(l, &states[k].w, &mut g)?;
            axpy(weight, &g, &mut agg);
        }
        let mu = mus[k];
        let state = &mut states[k];
        for j in 0..dim {
            state.psi[j] = state.w[j] - mu * agg[j];
        }
    }
    combine(a, states, Field::Psi, Field::W);
    Ok(())
}

/// Centralized fusion step on a single iterate:
/// `w ← w − μ Σ_k π_k ∇̂J_k(w)`.
pub fn apply_centralized<G: GradientOracle>(
    w: &mut [f64],
    mu: f64,
    fusion_weights: &[f64],
    agents: usize,
    oracle: &mut G,
) -> Result<()> {
    let dim = w.len();
    let mut g = vec![0.0; dim];
    let mut agg = vec![0.0; dim];
    for k in 0..agents {
        let pi = fusion_weights[k];
        if pi == 0.0 {
            continue;
        }
        oracle.gradient_into(k, w, &mut g)?;
        axpy(pi, &g, &mut agg);
    }
    for j in 0..dim {
        w[j] -= mu * agg[j];
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Fusion sampler
// ---------------------------------------------------------------------------

/// Random convex fusion weights for the centralized strategy. Every draw
/// lies on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub enum FusionSampler {
    /// Fixed weights (zero variance).
    Deterministic { weights: Vec<f64> },
    /// Per-agent on-off indicators with activation probability `q`,
    /// renormalized over the active set; redrawn if all agents are off.
    OnOff { agents: usize, probability: f64 },
}

impl FusionSampler {
    /// Fixed uniform weights `1/N`.
    pub fn uniform(agents: usize) -> Self {
        FusionSampler::Deterministic { weights: vec![1.0 / agents as f64; agents] }
    }

    pub fn agents(&self) -> usize {
        match self {
            FusionSampler::Deterministic { weights } => weights.len(),
            FusionSampler::OnOff { agents, .. } => *agents,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FusionSampler::Deterministic { weights } => {
                if weights.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                    return Err(Error::InvalidParameter {
                        name: "fusion.weights",
                        reason: "must be nonnegative and finite",
                    });
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > DEFAULT_TOL {
                    return Err(Error::SimplexViolation { sum });
                }
            }
            FusionSampler::OnOff { agents, probability } => {
                if *agents == 0 {
                    return Err(Error::InvalidParameter {
                        name: "fusion.agents",
                        reason: "must be positive",
                    });
                }
                if !(probability.is_finite() && *probability > 0.0 && *probability <= 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "fusion.probability",
                        reason: "must lie in (0, 1]",
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_random(&self) -> bool {
        matches!(self, FusionSampler::OnOff { .. })
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        match self {
            FusionSampler::Deterministic { weights } => out.copy_from_slice(weights),
            FusionSampler::OnOff { agents, probability } => loop {
                let mut active = 0usize;
                for slot in out.iter_mut().take(*agents) {
                    let on = rng.random::<f64>() < *probability;
                    *slot = if on { 1.0 } else { 0.0 };
                    active += on as usize;
                }
                if active > 0 {
                    let inv = 1.0 / active as f64;
                    for slot in out.iter_mut().take(*agents) {
                        *slot *= inv;
                    }
                    return;
                }
            },
        }
    }

    /// First and second moments of the weights. Deterministic weights are
    /// exact; the on-off scheme has no simple closed form, so its moments are
    /// measured by seeded Monte Carlo and fed to the theory that way.
    pub fn measured_moments(&self, draws: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        match self {
            FusionSampler::Deterministic { weights } => (weights.clone(), vec![0.0; weights.len()]),
            FusionSampler::OnOff { agents, .. } => {
                let n = *agents;
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let mut buf = vec![0.0; n];
                let mut sum = vec![0.0; n];
                let mut sum_sq = vec![0.0; n];
                for _ in 0..draws {
                    self.sample_into(&mut buf, &mut rng);
                    for k in 0..n {
                        sum[k] += buf[k];
                        sum_sq[k] += buf[k] * buf[k];
                    }
                }
                let mut mean = vec![0.0; n];
                let mut var = vec![0.0; n];
                for k in 0..n {
                    mean[k] = sum[k] / draws as f64;
                    var[k] = (sum_sq[k] / draws as f64 - mean[k] * mean[k]).max(0.0);
                }
                (mean, var)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Strategy configuration
// ---------------------------------------------------------------------------

/// Which recursion runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StrategyKind {
    NonCooperative,
    Centralized,
    Consensus,
    CtaDiffusion,
    AtcDiffusion,
    Unified,
    AtcEnlarged,
}

impl StrategyKind {
    /// Kinds driven by a shared combination realization per iteration.
    pub fn is_distributed(&self) -> bool {
        matches!(
            self,
            StrategyKind::Consensus
                | StrategyKind::CtaDiffusion
                | StrategyKind::AtcDiffusion
                | StrategyKind::AtcEnlarged
        )
    }
}

/// A validated strategy: kind, per-agent step-size processes, and whichever
/// combination/fusion structure the kind requires.
///
/// Constructors validate eagerly; in particular, distributed kinds reject
/// policies whose mean graph is not strongly connected.
#[derive(Clone, Debug)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// One process per agent; a single process for the centralized fusion
    /// center.
    pub step_sizes: Vec<StepSizeProcess>,
    pub policy: Option<RandomCombinationPolicy>,
    /// `(A_o, A_1, A_2)` for the unified recursion.
    pub unified_policies: Option<Vec<RandomCombinationPolicy>>,
    /// Right-stochastic gradient-exchange weights for enlarged ATC.
    pub gradient_weights: Option<Mat>,
    pub fusion: Option<FusionSampler>,
}

fn validate_steps(step_sizes: &[StepSizeProcess], expected: usize) -> Result<()> {
    if step_sizes.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: step_sizes.len() });
    }
    for p in step_sizes {
        p.validate()?;
    }
    Ok(())
}

fn require_strongly_connected(policy: &RandomCombinationPolicy) -> Result<()> {
    if !policy.is_strongly_connected() {
        return Err(Error::NotPrimitive("mean combination policy"));
    }
    Ok(())
}

impl StrategyConfig {
    pub fn non_cooperative(step_sizes: Vec<StepSizeProcess>) -> Result<Self> {
        let n = step_sizes.len();
        validate_steps(&step_sizes, n)?;
        Ok(StrategyConfig {
            kind: StrategyKind::NonCooperative,
            step_sizes,
            policy: None,
            unified_policies: None,
            gradient_weights: None,
            fusion: None,
        })
    }

    pub fn centralized(step_size: StepSizeProcess, fusion: FusionSampler) -> Result<Self> {
        step_size.validate()?;
        fusion.validate()?;
        Ok(StrategyConfig {
            kind: StrategyKind::Centralized,
            step_sizes: vec![step_size],
            policy: None,
            unified_policies: None,
            gradient_weights: None,
            fusion: Some(fusion),
        })
    }

    pub fn consensus(
        policy: RandomCombinationPolicy,
        step_sizes: Vec<StepSizeProcess>,
    ) -> Result<Self> {
        Self::distributed(StrategyKind::Consensus, policy, step_sizes)
    }

    pub fn cta(policy: RandomCombinationPolicy, step_sizes: Vec<StepSizeProcess>) -> Result<Self> {
        Self::distributed(StrategyKind::CtaDiffusion, policy, step_sizes)
    }

    pub fn atc(policy: RandomCombinationPolicy, step_sizes: Vec<StepSizeProcess>) -> Result<Self> {
        Self::distributed(StrategyKind::AtcDiffusion, policy, step_sizes)
    }

    fn distributed(
        kind: StrategyKind,
        policy: RandomCombinationPolicy,
        step_sizes: Vec<StepSizeProcess>,
    ) -> Result<Self> {
        validate_steps(&step_sizes, policy.size())?;
        require_strongly_connected(&policy)?;
        Ok(StrategyConfig {
            kind,
            step_sizes,
            policy: Some(policy),
            unified_policies: None,
            gradient_weights: None,
            fusion: None,
        })
    }

    /// Unified three-matrix recursion with policies `(A_o, A_1, A_2)`.
    /// Connectivity is not enforced here: the unified form exists precisely
    /// to express degenerate special cases (identity factors included).
    pub fn unified(
        a_o: RandomCombinationPolicy,
        a_1: RandomCombinationPolicy,
        a_2: RandomCombinationPolicy,
        step_sizes: Vec<StepSizeProcess>,
    ) -> Result<Self> {
        let n = a_o.size();
        if a_1.size() != n || a_2.size() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a_1.size().max(a_2.size()) });
        }
        validate_steps(&step_sizes, n)?;
        Ok(StrategyConfig {
            kind: StrategyKind::Unified,
            step_sizes,
            policy: None,
            unified_policies: Some(vec![a_o, a_1, a_2]),
            gradient_weights: None,
            fusion: None,
        })
    }

    pub fn atc_enlarged(
        policy: RandomCombinationPolicy,
        gradient_weights: Mat,
        step_sizes: Vec<StepSizeProcess>,
    ) -> Result<Self> {
        let n = policy.size();
        validate_steps(&step_sizes, n)?;
        require_strongly_connected(&policy)?;
        if gradient_weights.rows() != n || gradient_weights.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: gradient_weights.rows() });
        }
        for l in 0..n {
            let sum = gradient_weights.row_sum(l);
            if (sum - 1.0).abs() > DEFAULT_TOL {
                return Err(Error::NotRightStochastic { row: l, sum });
            }
            for k in 0..n {
                let v = gradient_weights[(l, k)];
                if v < 0.0 {
                    return Err(Error::NegativeEntry { row: l, col: k, value: v });
                }
                // Gradient exchange must ride on existing links.
                if v > 0.0 && l != k && policy.mean()[(l, k)] == 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "gradient_weights",
                        reason: "nonzero weight outside the mean graph",
                    });
                }
            }
        }
        Ok(StrategyConfig {
            kind: StrategyKind::AtcEnlarged,
            step_sizes,
            policy: Some(policy),
            unified_policies: None,
            gradient_weights: Some(gradient_weights),
            fusion: None,
        })
    }

    /// Number of learner states this strategy evolves (1 for centralized).
    pub fn state_count(&self, agents: usize) -> usize {
        if self.kind == StrategyKind::Centralized {
            1
        } else {
            agents
        }
    }

    /// Re-checks all invariants against an agent count (constructors already
    /// validated; this is for deserialized configurations).
    pub fn validate(&self, agents: usize) -> Result<()> {
        match self.kind {
            StrategyKind::NonCooperative => validate_steps(&self.step_sizes, agents),
            StrategyKind::Centralized => {
                validate_steps(&self.step_sizes, 1)?;
                let fusion = self.fusion.as_ref().ok_or(Error::InvalidParameter {
                    name: "fusion",
                    reason: "required for the centralized strategy",
                })?;
                fusion.validate()?;
                if fusion.agents() != agents {
                    return Err(Error::DimensionMismatch { expected: agents, found: fusion.agents() });
                }
                Ok(())
            }
            StrategyKind::Consensus | StrategyKind::CtaDiffusion | StrategyKind::AtcDiffusion => {
                validate_steps(&self.step_sizes, agents)?;
                let policy = self.policy.as_ref().ok_or(Error::InvalidParameter {
                    name: "policy",
                    reason: "required for distributed strategies",
                })?;
                if policy.size() != agents {
                    return Err(Error::DimensionMismatch { expected: agents, found: policy.size() });
                }
                require_strongly_connected(policy)
            }
            StrategyKind::Unified => {
                validate_steps(&self.step_sizes, agents)?;
                let triple = self.unified_policies.as_ref().ok_or(Error::InvalidParameter {
                    name: "unified_policies",
                    reason: "required for the unified strategy",
                })?;
                if triple.len() != 3 || triple.iter().any(|p| p.size() != agents) {
                    return Err(Error::DimensionMismatch { expected: agents, found: 0 });
                }
                Ok(())
            }
            StrategyKind::AtcEnlarged => {
                validate_steps(&self.step_sizes, agents)?;
                let policy = self.policy.as_ref().ok_or(Error::InvalidParameter {
                    name: "policy",
                    reason: "required for distributed strategies",
                })?;
                if policy.size() != agents {
                    return Err(Error::DimensionMismatch { expected: agents, found: policy.size() });
                }
                require_strongly_connected(policy)?;
                if self.gradient_weights.is_none() {
                    return Err(Error::InvalidParameter {
                        name: "gradient_weights",
                        reason: "required for enlarged ATC",
                    });
                }
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Spec-level step operations
// ---------------------------------------------------------------------------

fn check_finite(states: &[AgentState]) -> Result<()> {
    for (k, s) in states.iter().enumerate() {
        if !s.w.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { iteration: 0, agent: k });
        }
    }
    Ok(())
}

/// One (a)synchronous stochastic-gradient step for a stand-alone agent:
/// `w ← w − μ(i) ∇̂J(w)` with `μ(i)` drawn from the process. A constant
/// process reproduces the synchronous recursion exactly; for MSE data the
/// update is the classical LMS form bit for bit.
pub fn step_single<R: Rng + ?Sized>(
    cost: &CostModel,
    state: &mut AgentState,
    process: &StepSizeProcess,
    sample: &DataSample,
    rng: &mut R,
) -> Result<f64> {
    let mu = process.sample(rng)?;
    let mut g = vec![0.0; state.dim()];
    cost.stochastic_gradient_into(&state.w, sample, &mut g)?;
    for (wj, &gj) in state.w.iter_mut().zip(&g) {
        *wj -= mu * gj;
    }
    if !state.w.iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged { iteration: 0, agent: 0 });
    }
    Ok(mu)
}

/// One centralized fusion step: draws `μ(i)` and the fusion weights, then
/// applies `w ← w − μ(i) Σ_k π_k(i) ∇̂J_k(w)`.
pub fn step_centralized<R: Rng + ?Sized>(
    costs: &[CostModel],
    w: &mut [f64],
    process: &StepSizeProcess,
    fusion: &FusionSampler,
    samples: &[DataSample],
    rng: &mut R,
) -> Result<()> {
    fusion.validate()?;
    if fusion.agents() != costs.len() || samples.len() != costs.len() {
        return Err(Error::DimensionMismatch { expected: costs.len(), found: fusion.agents() });
    }
    let mu = process.sample(rng)?;
    let mut pi = vec![0.0; costs.len()];
    fusion.sample_into(&mut pi, rng);
    let mut oracle = SampleOracle { costs, samples };
    apply_centralized(w, mu, &pi, costs.len(), &mut oracle)?;
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged { iteration: 0, agent: 0 });
    }
    Ok(())
}

/// One network step for the configured kind. Per-agent step-sizes are drawn
/// first (ascending agent order), then a single combination realization
/// shared by the whole network.
pub fn step_network<R: Rng + ?Sized>(
    costs: &[CostModel],
    states: &mut [AgentState],
    config: &StrategyConfig,
    samples: &[DataSample],
    rng: &mut R,
) -> Result<()> {
    let n = states.len();
    config.validate(n)?;
    let mut mus = vec![0.0; n];
    for (slot, proc) in mus.iter_mut().zip(&config.step_sizes) {
        *slot = proc.sample(rng)?;
    }
    let mut oracle = SampleOracle { costs, samples };
    match config.kind {
        StrategyKind::NonCooperative => apply_non_cooperative(states, &mus, &mut oracle)?,
        StrategyKind::Consensus | StrategyKind::CtaDiffusion | StrategyKind::AtcDiffusion => {
            let a = config.policy.as_ref().expect("validated").sample(rng);
            match config.kind {
                StrategyKind::Consensus => apply_consensus(&a, states, &mus, &mut oracle)?,
                StrategyKind::CtaDiffusion => apply_cta(&a, states, &mus, &mut oracle)?,
                _ => apply_atc(&a, states, &mus, &mut oracle)?,
            }
        }
        StrategyKind::Unified => {
            let triple = config.unified_policies.as_ref().expect("validated");
            let a_o = triple[0].sample(rng);
            let a_1 = triple[1].sample(rng);
            let a_2 = triple[2].sample(rng);
            apply_unified(&a_o, &a_1, &a_2, states, &mus, &mut oracle)?;
        }
        StrategyKind::AtcEnlarged => {
            let a = config.policy.as_ref().expect("validated").sample(rng);
            let c = config.gradient_weights.as_ref().expect("validated");
            apply_atc_enlarged(&a, c, states, &mus, &mut oracle)?;
        }
        StrategyKind::Centralized => {
            return Err(Error::InvalidParameter {
                name: "kind",
                reason: "centralized strategy evolves a single iterate; use step_centralized",
            });
        }
    }
    check_finite(states)
}

/// One step of the unifying recursion with explicit realizations.
pub fn step_unified(
    states: &mut [AgentState],
    a_o: &Mat,
    a_1: &Mat,
    a_2: &Mat,
    costs: &[CostModel],
    mus: &[f64],
    samples: &[DataSample],
) -> Result<()> {
    for a in [a_o, a_1, a_2] {
        let report = crate::topology::validate_left_stochastic(a, 1e-9);
        if let Some(v) = report.violations.first() {
            return Err(match *v {
                crate::topology::StochasticityViolation::ColumnSum { col, sum } => {
                    Error::NotLeftStochastic { column: col, sum }
                }
                crate::topology::StochasticityViolation::NegativeEntry { row, col, value } => {
                    Error::NegativeEntry { row, col, value }
                }
                crate::topology::StochasticityViolation::NonFinite { .. } => {
                    Error::NonFinite("combination realization")
                }
            });
        }
    }
    let mut oracle = SampleOracle { costs, samples };
    apply_unified(a_o, a_1, a_2, states, mus, &mut oracle)?;
    check_finite(states)
}

/// One enlarged-ATC step with explicit realizations.
pub fn step_atc_enlarged(
    states: &mut [AgentState],
    a: &Mat,
    c: &Mat,
    costs: &[CostModel],
    mus: &[f64],
    samples: &[DataSample],
) -> Result<()> {
    for l in 0..c.rows() {
        let sum = c.row_sum(l);
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotRightStochastic { row: l, sum });
        }
    }
    let mut oracle = SampleOracle { costs, samples };
    apply_atc_enlarged(a, c, states, mus, &mut oracle)?;
    check_finite(states)
}

// ---------------------------------------------------------------------------
// Classical consensus averaging
// ---------------------------------------------------------------------------

/// Contraction rate of repeated combining under a doubly stochastic matrix:
/// the magnitude of the subdominant eigenvalue, computed on the deflated
/// matrix `A − 𝟙𝟙ᵀ/N`.
pub fn averaging_contraction_rate(a: &CombinationMatrix) -> Result<f64> {
    if !a.is_doubly_stochastic(DEFAULT_TOL) {
        return Err(Error::NotDoublyStochastic);
    }
    let n = a.size();
    let uniform = Mat::from_fn(n, n, |_, _| 1.0 / n as f64);
    Ok(a.matrix().sub(&uniform).spectral_radius())
}

/// Repeated convex combining of fixed initial values: after enough rounds
/// every agent holds the global average, with error decaying like the
/// subdominant eigenvalue's magnitude to the power of the round count.
pub fn consensus_average(
    values: &[Vec<f64>],
    a: &CombinationMatrix,
    iterations: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = values.len();
    if a.size() != n {
        return Err(Error::DimensionMismatch { expected: a.size(), found: n });
    }
    let rate = averaging_contraction_rate(a)?;
    if rate >= 1.0 {
        return Err(Error::NoSpectralGap { magnitude: rate });
    }
    let mut current: Vec<Vec<f64>> = values.to_vec();
    let mut next = current.clone();
    let am = a.matrix();
    for _ in 0..iterations {
        for k in 0..n {
            next[k].fill(0.0);
            for l in 0..n {
                let c = am[(l, k)];
                if c != 0.0 {
                    axpy(c, &current[l], &mut next[k]);
                }
            }
        }
        core::mem::swap(&mut current, &mut next);
    }
    Ok(current)
}
