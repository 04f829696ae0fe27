//! Closed-form steady-state and stability predictors.
//!
//! All expressions are first-order in the effective step-size: higher-order
//! remainder terms are dropped, so simulation comparisons should budget a
//! tolerance that absorbs the gap. Inputs are the gradient-noise quantities
//! at the minimizer (`H_k`, `R_{s,k}`), step-size moments, and, for
//! networks, the Perron machinery of the combination policy.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::topology::PerronData;

/// Steady-state prediction for a stand-alone (a)synchronous learner.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SingleAgentTheory {
    /// Steady-state mean-square deviation `(μ_x/2)·Tr(H⁻¹R_s)`.
    pub msd: f64,
    /// Excess risk (EMSE for quadratic costs) `(μ_x/4)·Tr(R_s)`.
    pub excess_risk: f64,
    /// Geometric convergence factor `1 − 2νμ̄` (first order).
    pub rate: f64,
}

/// Steady-state prediction for the centralized fusion strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CentralizedTheory {
    pub msd: f64,
    /// `1 − 2ν_c μ_x / N`.
    pub rate: f64,
}

/// Steady-state prediction for distributed strategies over a network.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NetworkTheory {
    /// Common steady-state MSD (the distributed strategies equalize
    /// performance across agents at small step-sizes).
    pub msd: f64,
    /// `1 − 2λ_min(Σ μ̄_k p̄_k H_k)`.
    pub rate: f64,
    /// Step-size moments used, echoed for reporting.
    pub mu_mean: Vec<f64>,
    pub mu_variance: Vec<f64>,
    /// Perron weights used, echoed for reporting.
    pub perron_mean: Vec<f64>,
    pub perron_pair_diag: Vec<f64>,
}

fn effective_step(mu_mean: f64, mu_variance: f64) -> Result<f64> {
    if !(mu_mean.is_finite() && mu_variance.is_finite()) {
        return Err(Error::NonFinite("step-size moments"));
    }
    if mu_mean <= 0.0 {
        return Err(Error::ZeroMeanStepSize);
    }
    if mu_variance < 0.0 {
        return Err(Error::InvalidParameter { name: "mu_variance", reason: "must be nonnegative" });
    }
    Ok(mu_mean + mu_variance / mu_mean)
}

/// Single-agent steady-state MSD, excess risk, and convergence factor.
///
/// `nu` is the strong-convexity constant of the risk; for an MSE cost it is
/// `2λ_min(R_u)`.
pub fn single_agent(
    hessian: &Mat,
    noise_cov: &Mat,
    mu_mean: f64,
    mu_variance: f64,
    nu: f64,
) -> Result<SingleAgentTheory> {
    let eff = effective_step(mu_mean, mu_variance)?;
    if !hessian.is_spd() {
        return Err(Error::NotPositiveDefinite("hessian"));
    }
    let msd = 0.5 * eff * hessian.trace_solve_spd(noise_cov)?;
    let excess_risk = 0.25 * eff * noise_cov.trace();
    let rate = 1.0 - 2.0 * nu * mu_mean;
    Ok(SingleAgentTheory { msd, excess_risk, rate })
}

/// Centralized fusion with random step-size and random fusion weights.
///
/// General fusion means are supported:
/// `MSD = (μ_x N / 2) · Tr[(Σ H_k)⁻¹ · Σ (π̄_k² + σ²_{π,k}) R_{s,k}]`,
/// which reduces to the familiar `(1 + N²σ²_{π,k})` weighting when
/// `π̄_k = 1/N`. `nu_c` is the strong-convexity constant of the aggregate
/// cost (equal to `Nν` when all agents share `ν`).
pub fn centralized(
    hessians: &[Mat],
    noise_covs: &[Mat],
    mu_mean: f64,
    mu_variance: f64,
    fusion_mean: &[f64],
    fusion_variance: &[f64],
    nu_c: f64,
) -> Result<CentralizedTheory> {
    let n = hessians.len();
    if noise_covs.len() != n || fusion_mean.len() != n || fusion_variance.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: noise_covs.len() });
    }
    let eff = effective_step(mu_mean, mu_variance)?;
    let sum: f64 = fusion_mean.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || fusion_mean.iter().any(|&x| x < 0.0) {
        return Err(Error::SimplexViolation { sum });
    }
    let dim = hessians[0].rows();
    let mut h_sum = Mat::zeros(dim, dim);
    let mut weighted_noise = Mat::zeros(dim, dim);
    for k in 0..n {
        h_sum = h_sum.add(&hessians[k]);
        let w = fusion_mean[k] * fusion_mean[k] + fusion_variance[k];
        weighted_noise = weighted_noise.add(&noise_covs[k].scale(w));
    }
    if !h_sum.is_spd() {
        return Err(Error::NotPositiveDefinite("aggregate hessian"));
    }
    let msd = 0.5 * eff * n as f64 * h_sum.trace_solve_spd(&weighted_noise)?;
    let rate = 1.0 - 2.0 * nu_c * eff / n as f64;
    Ok(CentralizedTheory { msd, rate })
}

/// Distributed (diffusion-type) network steady state:
/// `MSD = ½ Tr[(Σ μ̄_k p̄_k H_k)⁻¹ · Σ (μ̄_k² + σ²_{μ,k}) p_{c,kk} R_{s,k}]`
/// and `rate = 1 − 2λ_min(Σ μ̄_k p̄_k H_k)`.
///
/// The synchronous special case (zero step-size variance, deterministic
/// policy) recovers the fixed-topology expressions. The same steady-state
/// value applies to asynchronous consensus and CTA diffusion when they are
/// stable.
pub fn network(
    hessians: &[Mat],
    noise_covs: &[Mat],
    mu_mean: &[f64],
    mu_variance: &[f64],
    perron: &PerronData,
) -> Result<NetworkTheory> {
    let n = hessians.len();
    if noise_covs.len() != n || mu_mean.len() != n || mu_variance.len() != n || perron.size() != n {
        return Err(Error::DimensionMismatch { expected: n, found: perron.size() });
    }
    let dim = hessians[0].rows();
    let mut weighted_h = Mat::zeros(dim, dim);
    let mut weighted_noise = Mat::zeros(dim, dim);
    for k in 0..n {
        let eff = effective_step(mu_mean[k], mu_variance[k])?;
        // μ̄² + σ²_μ = μ̄·μ_x.
        let second_moment = mu_mean[k] * eff;
        weighted_h = weighted_h.add(&hessians[k].scale(mu_mean[k] * perron.mean_vector[k]));
        weighted_noise = weighted_noise
            .add(&noise_covs[k].scale(second_moment * perron.pair_matrix[(k, k)]));
    }
    if !weighted_h.is_spd() {
        return Err(Error::NotPositiveDefinite("perron-weighted hessian sum"));
    }
    let msd = 0.5 * weighted_h.trace_solve_spd(&weighted_noise)?;
    let rate = 1.0 - 2.0 * weighted_h.sym_min_eigenvalue();
    Ok(NetworkTheory {
        msd,
        rate,
        mu_mean: mu_mean.to_vec(),
        mu_variance: mu_variance.to_vec(),
        perron_mean: perron.mean_vector.clone(),
        perron_pair_diag: perron.pair_covariance_diag.clone(),
    })
}

// ---------------------------------------------------------------------------
// Mean-error stability
// ---------------------------------------------------------------------------

/// Strategy selector for the mean-error transition matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MeanErrorKind {
    NonCooperative,
    Consensus,
    AtcDiffusion,
    CtaDiffusion,
}

/// The `NM × NM` matrix driving `E w̃_i = B̄ · E w̃_{i−1}` for MSE networks,
/// together with its spectral radius.
#[derive(Clone, Debug)]
pub struct MeanErrorStability {
    pub matrix: Mat,
    pub spectral_radius: f64,
}

/// Assembles the mean-error transition matrix for an MSE network:
/// with `𝒜̄ = Ā ⊗ I_M`, `ℛ = blockdiag{2R_{u,k}}`, `M̄ = blockdiag{μ̄_k I_M}`,
///
/// - non-cooperative: `I − M̄ℛ`
/// - consensus:       `𝒜̄ᵀ − M̄ℛ`   (additive coupling, can destabilize)
/// - ATC diffusion:   `𝒜̄ᵀ(I − M̄ℛ)`
/// - CTA diffusion:   `(I − M̄ℛ)𝒜̄ᵀ`
pub fn mean_error_stability(
    kind: MeanErrorKind,
    a_mean: &Mat,
    mu_mean: &[f64],
    regressor_covs: &[Mat],
) -> Result<MeanErrorStability> {
    let n = a_mean.rows();
    if !a_mean.is_square() || mu_mean.len() != n || regressor_covs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mu_mean.len() });
    }
    let dim = regressor_covs[0].rows();
    let nm = n * dim;
    // I − M̄ℛ is block diagonal with blocks I_M − 2 μ̄_k R_{u,k}.
    let mut damped = Mat::zeros(nm, nm);
    for k in 0..n {
        if regressor_covs[k].rows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: regressor_covs[k].rows() });
        }
        for i in 0..dim {
            for j in 0..dim {
                let eye = if i == j { 1.0 } else { 0.0 };
                damped[(k * dim + i, k * dim + j)] =
                    eye - 2.0 * mu_mean[k] * regressor_covs[k][(i, j)];
            }
        }
    }
    let a_big = a_mean.transpose().kron(&Mat::identity(dim));
    let matrix = match kind {
        MeanErrorKind::NonCooperative => damped,
        MeanErrorKind::Consensus => {
            let mut m = a_big;
            // 𝒜̄ᵀ − M̄ℛ = 𝒜̄ᵀ + (I − M̄ℛ) − I.
            for r in 0..nm {
                for c in 0..nm {
                    let eye = if r == c { 1.0 } else { 0.0 };
                    m[(r, c)] += damped[(r, c)] - eye;
                }
            }
            m
        }
        MeanErrorKind::AtcDiffusion => a_big.matmul(&damped),
        MeanErrorKind::CtaDiffusion => damped.matmul(&a_big),
    };
    let spectral_radius = matrix.spectral_radius();
    Ok(MeanErrorStability { matrix, spectral_radius })
}

// ---------------------------------------------------------------------------
// Stability bound
// ---------------------------------------------------------------------------

/// Mean-square stability region of the single-agent recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StabilityBound {
    /// Largest admissible effective step-size `μ_o = 2ν/(δ² + β²)`.
    pub max_effective_step: f64,
    pub nu: f64,
    pub delta: f64,
    pub noise_relative_bound: f64,
}

/// `μ_o = 2ν/(δ² + β²)`: any step-size process with effective step below
/// this bound yields a contraction.
pub fn stability_bound(nu: f64, delta: f64, noise_relative_bound: f64) -> Result<StabilityBound> {
    if !(nu > 0.0 && delta > 0.0 && nu <= delta) {
        return Err(Error::InvalidParameter { name: "nu/delta", reason: "need 0 < nu <= delta" });
    }
    if noise_relative_bound < 0.0 {
        return Err(Error::InvalidParameter { name: "beta2", reason: "must be nonnegative" });
    }
    Ok(StabilityBound {
        max_effective_step: 2.0 * nu / (delta * delta + noise_relative_bound),
        nu,
        delta,
        noise_relative_bound,
    })
}

impl StabilityBound {
    /// Exact contraction factor of the mean-square recursion:
    /// `α = 1 − 2νμ̄ + (δ² + β²)(μ̄² + σ²_μ)`; lies in `[0, 1)` whenever the
    /// effective step-size is below the bound.
    pub fn contraction(&self, mu_mean: f64, mu_variance: f64) -> f64 {
        1.0 - 2.0 * self.nu * mu_mean
            + (self.delta * self.delta + self.noise_relative_bound)
                * (mu_mean * mu_mean + mu_variance)
    }

    pub fn is_stable(&self, mu_mean: f64, mu_variance: f64) -> bool {
        mu_mean > 0.0 && mu_mean + mu_variance / mu_mean < self.max_effective_step
    }
}

/// Per-agent non-cooperative MSDs and their network average; convenience for
/// N-fold comparisons against cooperative strategies.
pub fn non_cooperative_average(
    hessians: &[Mat],
    noise_covs: &[Mat],
    mu_mean: f64,
    mu_variance: f64,
    nus: &[f64],
) -> Result<(Vec<SingleAgentTheory>, f64)> {
    let mut per_agent = vec![];
    for ((h, r), &nu) in hessians.iter().zip(noise_covs).zip(nus) {
        per_agent.push(single_agent(h, r, mu_mean, mu_variance, nu)?);
    }
    let avg = per_agent.iter().map(|t| t.msd).sum::<f64>() / per_agent.len() as f64;
    Ok((per_agent, avg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::LinearRegressionModel;
    use crate::topology::{CombinationMatrix, PerronData, RandomCombinationPolicy};
    use approx::assert_relative_eq;

    fn lms_inputs(dim: usize, sigma_v2: f64) -> (Mat, Mat) {
        // H = 2R_u, R_s = 4σ_v²R_u for R_u = I.
        (Mat::scaled_identity(dim, 2.0), Mat::scaled_identity(dim, 4.0 * sigma_v2))
    }

    #[test]
    fn lms_msd_and_emse_closed_forms() {
        // MSD ≈ μ_x M σ_v², EMSE ≈ μ_x σ_v² Tr(R_u).
        let (h, r_s) = lms_inputs(4, 0.1);
        let t = single_agent(&h, &r_s, 0.01, 0.0, 2.0).unwrap();
        assert_relative_eq!(t.msd, 0.004, max_relative = 1e-12);
        assert_relative_eq!(t.excess_risk, 0.004, max_relative = 1e-12);
        assert_relative_eq!(t.rate, 1.0 - 2.0 * 2.0 * 0.01, max_relative = 1e-12);

        // Zero step-size variance reproduces the synchronous expressions;
        // nonzero variance only enters through the effective step-size.
        let async_t = single_agent(&h, &r_s, 0.005, 0.005 * 0.005, 2.0).unwrap();
        let eff = 0.005 + 0.005 * 0.005 / 0.005;
        assert_relative_eq!(async_t.msd, eff * 4.0 * 0.1, max_relative = 1e-12);
    }

    #[test]
    fn centralized_heterogeneous_noise_factor() {
        // N = 2 with noise powers σ² and 5σ²: the scaled average is 1.5σ²,
        // between the two individual levels.
        let sigma = 0.01;
        let dim = 5;
        let (h1, r1) = lms_inputs(dim, sigma);
        let (h2, r2) = lms_inputs(dim, 5.0 * sigma);
        let mu = 0.002;
        let n = 2.0;
        let t = centralized(
            &[h1.clone(), h2.clone()],
            &[r1.clone(), r2.clone()],
            mu,
            0.0,
            &[0.5, 0.5],
            &[0.0, 0.0],
            n * 2.0,
        )
        .unwrap();
        // (μM/N)·avg σ² = μM·1.5σ².
        assert_relative_eq!(t.msd, mu * dim as f64 * 1.5 * sigma, max_relative = 1e-12);
        // Rate equals the non-cooperative rate when ν_c = Nν.
        assert_relative_eq!(t.rate, 1.0 - 4.0 * mu, max_relative = 1e-12);
    }

    #[test]
    fn centralized_uniform_h_relations() {
        // MSD_cent = ((1 + N²σ²_π)/N)·MSD_ncop,av for uniform Hessians, with
        // equality to the non-cooperative average at σ²_π = (N−1)/N².
        let n = 5;
        let dim = 3;
        let mu = 0.004;
        let sigmas: Vec<f64> = (0..n).map(|k| 0.01 * (k + 1) as f64).collect();
        let hessians: Vec<Mat> = (0..n).map(|_| Mat::scaled_identity(dim, 2.0)).collect();
        let noise: Vec<Mat> =
            sigmas.iter().map(|&s| Mat::scaled_identity(dim, 4.0 * s)).collect();
        let nus = vec![2.0; n];
        let (_, ncop_av) = non_cooperative_average(&hessians, &noise, mu, 0.0, &nus).unwrap();

        for sigma_pi2 in [0.0, 0.05, (n as f64 - 1.0) / (n as f64 * n as f64)] {
            let t = centralized(
                &hessians,
                &noise,
                mu,
                0.0,
                &vec![1.0 / n as f64; n],
                &vec![sigma_pi2; n],
                n as f64 * 2.0,
            )
            .unwrap();
            let factor = (1.0 + (n * n) as f64 * sigma_pi2) / n as f64;
            assert_relative_eq!(t.msd, factor * ncop_av, max_relative = 1e-12);
        }

        // N-fold law: with σ²_π = 0 the centralized MSD is exactly the
        // non-cooperative average divided by N.
        let t0 = centralized(
            &hessians,
            &noise,
            mu,
            0.0,
            &vec![1.0 / n as f64; n],
            &vec![0.0; n],
            n as f64 * 2.0,
        )
        .unwrap();
        assert_relative_eq!(t0.msd, ncop_av / n as f64, max_relative = 1e-12);
    }

    #[test]
    fn network_msd_fixed_topology_perron_form() {
        // Fixed (deterministic) policy: MSD ≈ μ_x M Σ p_k² σ²_{v,k}.
        let a = CombinationMatrix::new(
            Mat::from_rows(&[vec![0.5, 0.25], vec![0.5, 0.75]]).unwrap(),
        )
        .unwrap();
        let p = a.perron_vector().unwrap();
        let perron = PerronData::from_static(&a).unwrap();
        let dim = 3;
        let mu = 0.003;
        let sigmas = [0.02, 0.05];
        let hessians: Vec<Mat> = (0..2).map(|_| Mat::scaled_identity(dim, 2.0)).collect();
        let noise: Vec<Mat> =
            sigmas.iter().map(|&s| Mat::scaled_identity(dim, 4.0 * s)).collect();
        let t = network(&hessians, &noise, &[mu; 2], &[0.0; 2], &perron).unwrap();
        let expected: f64 =
            mu * dim as f64 * (0..2).map(|k| p[k] * p[k] * sigmas[k]).sum::<f64>();
        assert_relative_eq!(t.msd, expected, max_relative = 1e-6);
    }

    #[test]
    fn network_equals_centralized_for_doubly_stochastic_static_policy() {
        let n = 5;
        let a =
            CombinationMatrix::metropolis(n, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let perron = PerronData::from_static(&a).unwrap();
        let dim = 4;
        let mu = 0.002;
        let sigmas: Vec<f64> = (0..n).map(|k| 0.005 * (k + 1) as f64).collect();
        let hessians: Vec<Mat> = (0..n).map(|_| Mat::scaled_identity(dim, 2.0)).collect();
        let noise: Vec<Mat> =
            sigmas.iter().map(|&s| Mat::scaled_identity(dim, 4.0 * s)).collect();

        let net = network(&hessians, &noise, &vec![mu; n], &vec![0.0; n], &perron).unwrap();
        let cent = centralized(
            &hessians,
            &noise,
            mu,
            0.0,
            &vec![1.0 / n as f64; n],
            &vec![0.0; n],
            n as f64 * 2.0,
        )
        .unwrap();
        assert_relative_eq!(net.msd, cent.msd, max_relative = 1e-6);
        // And both match (μ_x M/N)·avg σ².
        let avg: f64 = sigmas.iter().sum::<f64>() / n as f64;
        assert_relative_eq!(net.msd, mu * dim as f64 / n as f64 * avg, max_relative = 1e-6);
    }

    #[test]
    fn network_async_uniform_inflation_factor() {
        // Doubly stochastic mean with link randomness:
        // MSD ≈ (μ_x M/N)·(1/N)Σ(1 + N²c_{c,kk})σ²_{v,k}.
        let n = 5;
        let nominal =
            CombinationMatrix::metropolis(n, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let policy = RandomCombinationPolicy::with_uniform_probability(nominal, 0.7).unwrap();
        let perron = PerronData::from_policy(&policy, 1e-13).unwrap();
        // The on-off model with symmetric nominal weights keeps the mean
        // doubly stochastic.
        for k in 0..n {
            assert_relative_eq!(perron.mean_vector[k], 1.0 / n as f64, max_relative = 1e-8);
        }
        let dim = 3;
        let mu = 0.002;
        let sigmas: Vec<f64> = (0..n).map(|k| 0.004 * (k + 1) as f64).collect();
        let hessians: Vec<Mat> = (0..n).map(|_| Mat::scaled_identity(dim, 2.0)).collect();
        let noise: Vec<Mat> =
            sigmas.iter().map(|&s| Mat::scaled_identity(dim, 4.0 * s)).collect();
        let t = network(&hessians, &noise, &vec![mu; n], &vec![0.0; n], &perron).unwrap();

        let inflated: f64 = (0..n)
            .map(|k| (1.0 + (n * n) as f64 * perron.pair_covariance_diag[k]) * sigmas[k])
            .sum::<f64>()
            / n as f64;
        let expected = mu * dim as f64 / n as f64 * inflated;
        assert_relative_eq!(t.msd, expected, max_relative = 1e-6);
        // Link randomness strictly inflates steady-state error here.
        assert!(perron.pair_covariance_diag.iter().any(|&c| c > 1e-6));
    }

    #[test]
    fn network_single_agent_consistency() {
        // N = 1 network theory equals single-agent theory.
        let a = CombinationMatrix::new(Mat::from_rows(&[vec![1.0]]).unwrap()).unwrap();
        let perron = PerronData::from_static(&a).unwrap();
        let model = LinearRegressionModel::new(vec![0.5, -0.5], Mat::identity(2), 0.03).unwrap();
        let profile = model.noise_profile();
        let t_net = network(
            &[profile.hessian.clone()],
            &[profile.covariance.clone()],
            &[0.004],
            &[1e-6],
            &perron,
        )
        .unwrap();
        let t_single =
            single_agent(&profile.hessian, &profile.covariance, 0.004, 1e-6, 2.0).unwrap();
        assert_relative_eq!(t_net.msd, t_single.msd, max_relative = 1e-10);
        assert_relative_eq!(t_net.rate, t_single.rate, max_relative = 1e-10);
    }

    #[test]
    fn bernoulli_rate_ordering() {
        // Same step value, random updates with p < 1: identical steady-state
        // MSD, strictly slower convergence.
        let (h, r_s) = lms_inputs(3, 0.05);
        let mu = 0.01;
        let p = 0.5;
        let sync = single_agent(&h, &r_s, mu, 0.0, 2.0).unwrap();
        let asyn =
            single_agent(&h, &r_s, p * mu, p * (1.0 - p) * mu * mu, 2.0).unwrap();
        assert_relative_eq!(sync.msd, asyn.msd, max_relative = 1e-12);
        assert!(asyn.rate > sync.rate);
        assert_relative_eq!(asyn.rate, 1.0 - 2.0 * 2.0 * mu * p, max_relative = 1e-12);
    }

    #[test]
    fn mean_error_eigenvalue_formulas() {
        // Uniform agents: λ(B̄_diff) = λ_k(Ā)[1 − 2μ̄λ_m(R_u)] and
        // λ(B̄_cons) = λ_k(Ā) − 2μ̄λ_m(R_u).
        let a = Mat::from_rows(&[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap(); // eig {1, 0.5}
        let r_u = vec![Mat::identity(1), Mat::identity(1)];
        let mus = [0.1, 0.1];

        let diff = mean_error_stability(MeanErrorKind::AtcDiffusion, &a, &mus, &r_u).unwrap();
        assert_relative_eq!(diff.spectral_radius, 0.8, max_relative = 1e-9);
        // Dense eigensolve oracle for the full spectrum {0.8, 0.4}.
        let nd = nalgebra::DMatrix::from_row_slice(2, 2, diff.matrix.data());
        let mut eig: Vec<f64> = nd.complex_eigenvalues().iter().map(|c| c.re).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_relative_eq!(eig[0], 0.4, max_relative = 1e-9);
        assert_relative_eq!(eig[1], 0.8, max_relative = 1e-9);

        let cons = mean_error_stability(MeanErrorKind::Consensus, &a, &mus, &r_u).unwrap();
        let nc = nalgebra::DMatrix::from_row_slice(2, 2, cons.matrix.data());
        let mut eig: Vec<f64> = nc.complex_eigenvalues().iter().map(|c| c.re).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_relative_eq!(eig[0], 0.5 - 0.2, max_relative = 1e-9);
        assert_relative_eq!(eig[1], 1.0 - 0.2, max_relative = 1e-9);

        // CTA shares the diffusion spectrum.
        let cta = mean_error_stability(MeanErrorKind::CtaDiffusion, &a, &mus, &r_u).unwrap();
        assert_relative_eq!(cta.spectral_radius, 0.8, max_relative = 1e-9);
    }

    #[test]
    fn consensus_instability_witness() {
        // Ā with eigenvalues {1, −0.9}: at μ̄ = 0.15 and R_u = I the
        // consensus matrix leaves the unit circle while diffusion and
        // non-cooperative stay strictly inside.
        let a = Mat::from_rows(&[vec![0.05, 0.95], vec![0.95, 0.05]]).unwrap();
        let m = 2;
        let r_u = vec![Mat::identity(m), Mat::identity(m)];
        let mus = [0.15, 0.15];

        let cons = mean_error_stability(MeanErrorKind::Consensus, &a, &mus, &r_u).unwrap();
        assert_relative_eq!(cons.spectral_radius, 1.2, max_relative = 1e-9);

        let diff = mean_error_stability(MeanErrorKind::AtcDiffusion, &a, &mus, &r_u).unwrap();
        assert_relative_eq!(diff.spectral_radius, 0.7, max_relative = 1e-9);
        // The coupled mode sits at |−0.9 · 0.7| = 0.63, also inside.
        let nd = nalgebra::DMatrix::from_row_slice(m * 2, m * 2, diff.matrix.data());
        let mut mags: Vec<f64> = nd.complex_eigenvalues().iter().map(|c| c.norm()).collect();
        mags.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_relative_eq!(mags[0], 0.63, max_relative = 1e-9);

        let ncop = mean_error_stability(MeanErrorKind::NonCooperative, &a, &mus, &r_u).unwrap();
        assert_relative_eq!(ncop.spectral_radius, 0.7, max_relative = 1e-9);
    }

    #[test]
    fn diffusion_never_less_stable_than_non_cooperative() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(41);
        for _ in 0..10 {
            let n = 4;
            // Random positive left-stochastic mean policy.
            let mut a = Mat::from_fn(n, n, |_, _| 0.02 + rng.random::<f64>());
            for k in 0..n {
                let s = a.col_sum(k);
                for l in 0..n {
                    a[(l, k)] /= s;
                }
            }
            // Uniform agents: shared SPD R_u and mean step-size.
            let mut b = Mat::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5);
            b = b.matmul(&b.transpose()).add(&Mat::scaled_identity(2, 0.5));
            let mu = 0.05 * rng.random::<f64>();
            let mus = vec![mu; n];
            let covs = vec![b.clone(); n];
            let diff =
                mean_error_stability(MeanErrorKind::AtcDiffusion, &a, &mus, &covs).unwrap();
            let ncop =
                mean_error_stability(MeanErrorKind::NonCooperative, &a, &mus, &covs).unwrap();
            assert!(diff.spectral_radius <= ncop.spectral_radius + 1e-9);
        }
    }

    #[test]
    fn stability_bound_examples() {
        // ν = δ = 2 (MSE with R_u = I), no relative noise: μ_o = 1.
        let b = stability_bound(2.0, 2.0, 0.0).unwrap();
        assert_relative_eq!(b.max_effective_step, 1.0);

        // Contraction strictly below one at half the bound.
        let alpha = b.contraction(b.max_effective_step / 2.0, 0.0);
        assert!((0.0..1.0).contains(&alpha));

        // Sweep: any moments with effective step below the bound give a
        // contraction in [0, 1).
        let b = stability_bound(1.5, 3.0, 2.0).unwrap();
        for i in 1..20 {
            let mu = b.max_effective_step * i as f64 / 21.0;
            for frac in [0.0, 0.2, 0.8] {
                // Variance chosen so the effective step stays below μ_o.
                let var = frac * mu * (b.max_effective_step - mu);
                let eff = mu + var / mu;
                if eff < b.max_effective_step {
                    let alpha = b.contraction(mu, var);
                    assert!(
                        (0.0..1.0).contains(&alpha),
                        "alpha {alpha} outside [0,1) at mu {mu} var {var}"
                    );
                }
            }
        }
    }
}
