//! Theory reports computed from a resolved configuration.

use asyncnet_core::linalg::Mat;
use asyncnet_core::sim::{ExperimentSpec, TheoryRecord};
use asyncnet_core::strategies::StrategyKind;
use asyncnet_core::theory::{
    self, mean_error_stability, MeanErrorKind,
};
use asyncnet_core::topology::PerronData;
use asyncnet_core::{Error, Result};
use serde::Serialize;

use crate::config::Resolved;

/// Number of seeded draws used to measure on-off fusion moments.
pub const FUSION_MOMENT_DRAWS: usize = 200_000;
/// Fixed seed for fusion moment measurement (independent of the experiment
/// seed so theory does not change when only the simulation seed does).
pub const FUSION_MOMENT_SEED: u64 = 0xF0_51;

#[derive(Clone, Debug, Serialize)]
pub struct PerAgentTheory {
    pub msd: f64,
    pub emse: f64,
    pub rate: f64,
}

/// Spectral radii of the mean-error transition matrices for each strategy
/// family on this network.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityBlock {
    pub non_cooperative: f64,
    pub consensus: f64,
    pub atc_diffusion: f64,
    pub cta_diffusion: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerronBlock {
    pub mean_vector: Vec<f64>,
    pub pair_covariance_diag: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InputsBlock {
    pub mu_mean: Vec<f64>,
    pub mu_variance: Vec<f64>,
    pub mu_effective: Vec<f64>,
    pub noise_variances: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fusion_mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fusion_variance: Option<Vec<f64>>,
}

/// Full deterministic theory report for a configuration.
#[derive(Clone, Debug, Serialize)]
pub struct TheoryOutput {
    pub digest: String,
    pub kind: String,
    /// Network-average steady-state MSD prediction.
    pub msd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emse: Option<f64>,
    pub rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_agent: Option<Vec<PerAgentTheory>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perron: Option<PerronBlock>,
    pub inputs: InputsBlock,
}

impl TheoryOutput {
    /// The subset used for empirical comparison.
    pub fn record(&self) -> TheoryRecord {
        TheoryRecord {
            digest: self.digest.clone(),
            msd: self.msd,
            emse: self.emse,
            rate: Some(self.rate),
        }
    }
}

struct NetworkInputs {
    hessians: Vec<Mat>,
    noise_covs: Vec<Mat>,
    regressor_covs: Vec<Mat>,
    nus: Vec<f64>,
    noise_variances: Vec<f64>,
}

fn network_inputs(spec: &ExperimentSpec) -> Result<NetworkInputs> {
    if !spec.model.is_regression() {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "theory predictions require regression data models",
        });
    }
    let mut hessians = Vec::new();
    let mut noise_covs = Vec::new();
    let mut regressor_covs = Vec::new();
    let mut nus = Vec::new();
    let mut noise_variances = Vec::new();
    for agent in &spec.model.agents {
        if let asyncnet_core::sim::DataModel::Regression(m) = agent {
            let profile = m.noise_profile();
            nus.push(2.0 * m.regressor_covariance().sym_min_eigenvalue());
            regressor_covs.push(m.regressor_covariance().clone());
            hessians.push(profile.hessian);
            noise_covs.push(profile.covariance);
            noise_variances.push(m.noise_variance());
        }
    }
    Ok(NetworkInputs { hessians, noise_covs, regressor_covs, nus, noise_variances })
}

fn step_moments(spec: &ExperimentSpec) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut mean = Vec::new();
    let mut var = Vec::new();
    let mut eff = Vec::new();
    for p in &spec.strategy.step_sizes {
        let m = p.moments()?;
        mean.push(m.mean);
        var.push(m.variance);
        eff.push(m.effective);
    }
    Ok((mean, var, eff))
}

/// Computes the theory report for a resolved configuration. Deterministic
/// given the configuration (fusion moments use a fixed internal seed).
pub fn theory_output(resolved: &Resolved) -> Result<TheoryOutput> {
    let spec = &resolved.spec;
    let inputs = network_inputs(spec)?;
    let (mu_mean, mu_variance, mu_effective) = step_moments(spec)?;
    let kind_name = kind_name(resolved.kind);
    let mut inputs_block = InputsBlock {
        mu_mean: mu_mean.clone(),
        mu_variance: mu_variance.clone(),
        mu_effective,
        noise_variances: inputs.noise_variances.clone(),
        fusion_mean: None,
        fusion_variance: None,
    };

    match resolved.kind {
        StrategyKind::NonCooperative => {
            let per_agent: Vec<PerAgentTheory> = inputs
                .hessians
                .iter()
                .zip(&inputs.noise_covs)
                .zip(&inputs.nus)
                .enumerate()
                .map(|(k, ((h, r), &nu))| {
                    let t = theory::single_agent(h, r, mu_mean[k], mu_variance[k], nu)?;
                    Ok(PerAgentTheory { msd: t.msd, emse: t.excess_risk, rate: t.rate })
                })
                .collect::<Result<_>>()?;
            let n = per_agent.len() as f64;
            let msd = per_agent.iter().map(|t| t.msd).sum::<f64>() / n;
            let emse = per_agent.iter().map(|t| t.emse).sum::<f64>() / n;
            let rate = per_agent.iter().map(|t| t.rate).fold(0.0f64, f64::max);
            Ok(TheoryOutput {
                digest: resolved.digest.clone(),
                kind: kind_name,
                msd,
                emse: Some(emse),
                rate,
                per_agent: Some(per_agent),
                stability: None,
                perron: None,
                inputs: inputs_block,
            })
        }
        StrategyKind::Centralized => {
            let fusion = spec.strategy.fusion.as_ref().expect("validated");
            let (pi_mean, pi_var) =
                fusion.measured_moments(FUSION_MOMENT_DRAWS, FUSION_MOMENT_SEED);
            let mut h_sum = Mat::zeros(spec.model.dim(), spec.model.dim());
            for h in &inputs.hessians {
                h_sum = h_sum.add(h);
            }
            let nu_c = h_sum.sym_min_eigenvalue();
            let t = theory::centralized(
                &inputs.hessians,
                &inputs.noise_covs,
                mu_mean[0],
                mu_variance[0],
                &pi_mean,
                &pi_var,
                nu_c,
            )?;
            inputs_block.fusion_mean = Some(pi_mean);
            inputs_block.fusion_variance = Some(pi_var);
            Ok(TheoryOutput {
                digest: resolved.digest.clone(),
                kind: kind_name,
                msd: t.msd,
                emse: None,
                rate: t.rate,
                per_agent: None,
                stability: None,
                perron: None,
                inputs: inputs_block,
            })
        }
        StrategyKind::Consensus
        | StrategyKind::CtaDiffusion
        | StrategyKind::AtcDiffusion
        | StrategyKind::AtcEnlarged => {
            // The diffusion predictor covers consensus and CTA at their
            // stable operating points, and enlarged ATC with identity
            // gradient exchange (the CLI default).
            let policy = spec.strategy.policy.as_ref().expect("validated");
            let perron = PerronData::from_policy(policy, 1e-12)?;
            let t = theory::network(
                &inputs.hessians,
                &inputs.noise_covs,
                &mu_mean,
                &mu_variance,
                &perron,
            )?;
            let a_mean = policy.mean();
            let stability = StabilityBlock {
                non_cooperative: mean_error_stability(
                    MeanErrorKind::NonCooperative,
                    &a_mean,
                    &mu_mean,
                    &inputs.regressor_covs,
                )?
                .spectral_radius,
                consensus: mean_error_stability(
                    MeanErrorKind::Consensus,
                    &a_mean,
                    &mu_mean,
                    &inputs.regressor_covs,
                )?
                .spectral_radius,
                atc_diffusion: mean_error_stability(
                    MeanErrorKind::AtcDiffusion,
                    &a_mean,
                    &mu_mean,
                    &inputs.regressor_covs,
                )?
                .spectral_radius,
                cta_diffusion: mean_error_stability(
                    MeanErrorKind::CtaDiffusion,
                    &a_mean,
                    &mu_mean,
                    &inputs.regressor_covs,
                )?
                .spectral_radius,
            };
            Ok(TheoryOutput {
                digest: resolved.digest.clone(),
                kind: kind_name,
                msd: t.msd,
                emse: None,
                rate: t.rate,
                per_agent: None,
                stability: Some(stability),
                perron: Some(PerronBlock {
                    mean_vector: perron.mean_vector.clone(),
                    pair_covariance_diag: perron.pair_covariance_diag.clone(),
                }),
                inputs: inputs_block,
            })
        }
        StrategyKind::Unified => Err(Error::InvalidParameter {
            name: "strategy.kind",
            reason: "no closed-form prediction for an arbitrary unified triple; use simulate",
        }),
    }
}

pub fn kind_name(kind: StrategyKind) -> String {
    match kind {
        StrategyKind::NonCooperative => "non_cooperative",
        StrategyKind::Centralized => "centralized",
        StrategyKind::Consensus => "consensus",
        StrategyKind::CtaDiffusion => "cta",
        StrategyKind::AtcDiffusion => "atc",
        StrategyKind::Unified => "unified",
        StrategyKind::AtcEnlarged => "atc_enlarged",
    }
    .to_string()
}
