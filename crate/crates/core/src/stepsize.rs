//! Random step-size processes.
//!
//! An asynchronous learner replaces the constant step-size of the
//! stochastic-gradient recursion with an i.i.d. bounded random process
//! `μ(i) ∈ [0, μ_ub]`. Three variants are shipped: a degenerate constant, a
//! Bernoulli on-off model (update with probability `p`, sleep otherwise), and
//! a scaled Beta distribution over the full interval.
//!
//! Steady-state behavior is governed not by the mean alone but by the
//! effective step-size `μ̄ + σ²_μ/μ̄`, which collapses to the constant value
//! in the synchronous case.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};

/// First and second-order description of a step-size process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizeMoments {
    /// Mean `μ̄`.
    pub mean: f64,
    /// Variance `σ²_μ`.
    pub variance: f64,
    /// Effective step-size `μ̄ + σ²_μ/μ̄`; plays the role of the constant
    /// step-size in steady-state error expressions.
    pub effective: f64,
}

/// A bounded i.i.d. random step-size process.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case", deny_unknown_fields))]
pub enum StepSizeProcess {
    /// Always `mu`.
    Constant { mu: f64 },
    /// `mu` with probability `p`, zero otherwise.
    Bernoulli { mu: f64, p: f64 },
    /// `mu_ub` times a Beta(`xi`, `zeta`) variable.
    BetaScaled { mu_ub: f64, xi: f64, zeta: f64 },
}

/// Prebuilt sampler for a step-size process. Constructing it validates the
/// parameters once; sampling takes an exclusive RNG handle.
#[derive(Clone, Debug)]
pub enum StepSizeSampler {
    Constant(f64),
    Bernoulli { mu: f64, p: f64 },
    Beta { mu_ub: f64, dist: rand_distr::Beta<f64> },
}

impl StepSizeProcess {
    pub fn constant(mu: f64) -> Self {
        StepSizeProcess::Constant { mu }
    }

    pub fn bernoulli(mu: f64, p: f64) -> Self {
        StepSizeProcess::Bernoulli { mu, p }
    }

    pub fn beta_scaled(mu_ub: f64, xi: f64, zeta: f64) -> Self {
        StepSizeProcess::BetaScaled { mu_ub, xi, zeta }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &'static str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFinite(name))
            }
        };
        match *self {
            StepSizeProcess::Constant { mu } => {
                finite(mu, "mu")?;
                if mu < 0.0 {
                    return Err(Error::InvalidParameter { name: "mu", reason: "must be nonnegative" });
                }
            }
            StepSizeProcess::Bernoulli { mu, p } => {
                finite(mu, "mu")?;
                finite(p, "p")?;
                if mu < 0.0 {
                    return Err(Error::InvalidParameter { name: "mu", reason: "must be nonnegative" });
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter { name: "p", reason: "must lie in [0, 1]" });
                }
            }
            StepSizeProcess::BetaScaled { mu_ub, xi, zeta } => {
                finite(mu_ub, "mu_ub")?;
                finite(xi, "xi")?;
                finite(zeta, "zeta")?;
                if mu_ub <= 0.0 {
                    return Err(Error::InvalidParameter { name: "mu_ub", reason: "must be positive" });
                }
                if xi <= 0.0 {
                    return Err(Error::InvalidParameter { name: "xi", reason: "must be positive" });
                }
                if zeta <= 0.0 {
                    return Err(Error::InvalidParameter { name: "zeta", reason: "must be positive" });
                }
            }
        }
        Ok(())
    }

    /// Upper bound of the support.
    pub fn upper_bound(&self) -> f64 {
        match *self {
            StepSizeProcess::Constant { mu } => mu,
            StepSizeProcess::Bernoulli { mu, .. } => mu,
            StepSizeProcess::BetaScaled { mu_ub, .. } => mu_ub,
        }
    }

    /// Exact mean `μ̄`.
    pub fn mean(&self) -> f64 {
        match *self {
            StepSizeProcess::Constant { mu } => mu,
            StepSizeProcess::Bernoulli { mu, p } => p * mu,
            StepSizeProcess::BetaScaled { mu_ub, xi, zeta } => xi / (xi + zeta) * mu_ub,
        }
    }

    /// Exact variance `σ²_μ`.
    pub fn variance(&self) -> f64 {
        match *self {
            StepSizeProcess::Constant { .. } => 0.0,
            StepSizeProcess::Bernoulli { mu, p } => p * (1.0 - p) * mu * mu,
            StepSizeProcess::BetaScaled { mu_ub, xi, zeta } => {
                let s = xi + zeta;
                xi * zeta / (s * s * (s + 1.0)) * mu_ub * mu_ub
            }
        }
    }

    /// Closed-form moments, including the effective step-size. Fails when the
    /// mean vanishes (the effective step-size is undefined for a process that
    /// never updates).
    pub fn moments(&self) -> Result<StepSizeMoments> {
        self.validate()?;
        let mean = self.mean();
        if mean <= 0.0 {
            return Err(Error::ZeroMeanStepSize);
        }
        let variance = self.variance();
        Ok(StepSizeMoments { mean, variance, effective: mean + variance / mean })
    }

    /// Builds a validated sampler.
    pub fn sampler(&self) -> Result<StepSizeSampler> {
        self.validate()?;
        Ok(match *self {
            StepSizeProcess::Constant { mu } => StepSizeSampler::Constant(mu),
            StepSizeProcess::Bernoulli { mu, p } => StepSizeSampler::Bernoulli { mu, p },
            StepSizeProcess::BetaScaled { mu_ub, xi, zeta } => StepSizeSampler::Beta {
                mu_ub,
                dist: rand_distr::Beta::new(xi, zeta)
                    .map_err(|_| Error::InvalidParameter { name: "xi/zeta", reason: "invalid Beta shape" })?,
            },
        })
    }

    /// Draws one step-size. Convenience wrapper that builds a sampler per
    /// call; hot loops should hold a [`StepSizeSampler`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sampler()?.sample(rng))
    }
}

impl StepSizeSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            StepSizeSampler::Constant(mu) => *mu,
            StepSizeSampler::Bernoulli { mu, p } => {
                if rng.random::<f64>() < *p {
                    *mu
                } else {
                    0.0
                }
            }
            StepSizeSampler::Beta { mu_ub, dist } => mu_ub * dist.sample(rng),
        }
    }
}

/// Builds per-agent samplers from per-agent processes.
pub fn samplers(processes: &[StepSizeProcess]) -> Result<Vec<StepSizeSampler>> {
    processes.iter().map(|p| p.sampler()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn empirical_moments(proc: &StepSizeProcess, n: usize, seed: u64) -> (f64, f64, f64) {
        let sampler = proc.sampler().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let m4 = draws.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        (mean, var, m4)
    }

    #[test]
    fn constant_process_is_degenerate() {
        let proc = StepSizeProcess::constant(0.01);
        let sampler = proc.sampler().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sampler.sample(&mut rng), 0.01);
        }
        let m = proc.moments().unwrap();
        assert_eq!((m.mean, m.variance, m.effective), (0.01, 0.0, 0.01));
    }

    #[test]
    fn bernoulli_with_unit_probability_never_sleeps() {
        let proc = StepSizeProcess::bernoulli(0.1, 1.0);
        let sampler = proc.sampler().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..1000 {
            assert_eq!(sampler.sample(&mut rng), 0.1);
        }
    }

    #[test]
    fn bernoulli_moments_closed_form() {
        let proc = StepSizeProcess::bernoulli(0.1, 0.5);
        let m = proc.moments().unwrap();
        assert_relative_eq!(m.mean, 0.05);
        assert_relative_eq!(m.variance, 0.0025);
        assert_relative_eq!(m.effective, 0.1);
    }

    #[test]
    fn bernoulli_sample_mean_within_three_sigma() {
        let proc = StepSizeProcess::bernoulli(0.1, 0.5);
        let n = 1_000_000;
        let (mean, _, _) = empirical_moments(&proc, n, 3);
        let se = (proc.variance() / n as f64).sqrt();
        assert!((mean - 0.05).abs() < 3.0 * se, "mean {mean} off by more than 3 SE {se}");
    }

    #[test]
    fn beta_uniform_special_case() {
        // ξ = ζ = 1 is the uniform distribution on [0, mu_ub].
        let proc = StepSizeProcess::beta_scaled(0.1, 1.0, 1.0);
        let m = proc.moments().unwrap();
        assert_relative_eq!(m.mean, 0.05);
        assert_relative_eq!(m.variance, 0.01 / 12.0, max_relative = 1e-12);
        assert_relative_eq!(m.effective, 0.05 + (0.01 / 12.0) / 0.05, max_relative = 1e-12);
        assert_relative_eq!(m.effective, 0.066667, max_relative = 1e-4);
    }

    #[test]
    fn beta_moments_match_quadrature_of_pdf() {
        // Independent oracle: Simpson quadrature of x·f(x) and x²·f(x) with
        // the pdf supplied by statrs.
        use statrs::distribution::{Beta, Continuous};
        for &(xi, zeta) in &[(2.0, 5.0), (0.8, 0.8), (3.0, 1.5)] {
            let beta = Beta::new(xi, zeta).unwrap();
            let n = 200_000;
            let h = 1.0 / n as f64;
            let (mut m1, mut m2) = (0.0, 0.0);
            for k in 0..n {
                let x0 = k as f64 * h;
                let xm = x0 + 0.5 * h;
                let x1 = x0 + h;
                let f0 = if k == 0 { 0.0 } else { beta.pdf(x0) };
                let fm = beta.pdf(xm);
                let f1 = if k == n - 1 { 0.0 } else { beta.pdf(x1) };
                m1 += h / 6.0 * (x0 * f0 + 4.0 * xm * fm + x1 * f1);
                m2 += h / 6.0 * (x0 * x0 * f0 + 4.0 * xm * xm * fm + x1 * x1 * f1);
            }
            let mu_ub = 0.2;
            let proc = StepSizeProcess::beta_scaled(mu_ub, xi, zeta);
            // Endpoint handling above drops a vanishing sliver for shape
            // parameters below one; quadrature is still good to ~1e-4.
            assert_relative_eq!(proc.mean(), m1 * mu_ub, max_relative = 2e-4);
            assert_relative_eq!(proc.variance(), (m2 - m1 * m1) * mu_ub * mu_ub, max_relative = 2e-3);
        }
    }

    #[test]
    fn empirical_moments_match_for_all_variants() {
        let variants = [
            StepSizeProcess::constant(0.02),
            StepSizeProcess::bernoulli(0.1, 0.3),
            StepSizeProcess::beta_scaled(0.1, 2.0, 5.0),
        ];
        let n = 1_000_000;
        for (i, proc) in variants.iter().enumerate() {
            let (mean, var, m4) = empirical_moments(proc, n, 10 + i as u64);
            let se_mean = (proc.variance() / n as f64).sqrt();
            assert!(
                (mean - proc.mean()).abs() <= 4.0 * se_mean + 1e-11,
                "variant {i}: mean {mean} vs {}",
                proc.mean()
            );
            // SE of the sample variance from the empirical fourth moment.
            let se_var = ((m4 - var * var).max(0.0) / n as f64).sqrt();
            assert!(
                (var - proc.variance()).abs() <= 4.0 * se_var + 1e-15,
                "variant {i}: variance {var} vs {}",
                proc.variance()
            );
        }
    }

    #[test]
    fn samples_respect_support_bounds() {
        let variants = [
            StepSizeProcess::constant(0.02),
            StepSizeProcess::bernoulli(0.1, 0.7),
            StepSizeProcess::beta_scaled(0.05, 0.5, 0.5),
        ];
        for (i, proc) in variants.iter().enumerate() {
            let sampler = proc.sampler().unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(100 + i as u64);
            let ub = proc.upper_bound();
            for _ in 0..100_000 {
                let v = sampler.sample(&mut rng);
                assert!((0.0..=ub).contains(&v), "variant {i}: sample {v} outside [0, {ub}]");
            }
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(StepSizeProcess::bernoulli(0.1, -0.1).sampler().is_err());
        assert!(StepSizeProcess::bernoulli(0.1, 1.5).sampler().is_err());
        assert!(StepSizeProcess::beta_scaled(0.1, 0.0, 1.0).sampler().is_err());
        assert!(StepSizeProcess::beta_scaled(0.1, 1.0, -2.0).sampler().is_err());
        assert_eq!(StepSizeProcess::constant(0.0).moments(), Err(Error::ZeroMeanStepSize));
        assert_eq!(StepSizeProcess::bernoulli(0.1, 0.0).moments(), Err(Error::ZeroMeanStepSize));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Effective step-size dominates the mean, with equality exactly
            // in the degenerate case; and μ̄·μ_x = μ̄² + σ²_μ ≤ μ_x².
            #[test]
            fn effective_step_size_identities(
                mu in 1e-6f64..1.0,
                p in 0.01f64..1.0,
                xi in 0.1f64..10.0,
                zeta in 0.1f64..10.0,
            ) {
                for proc in [
                    StepSizeProcess::constant(mu),
                    StepSizeProcess::bernoulli(mu, p),
                    StepSizeProcess::beta_scaled(mu, xi, zeta),
                ] {
                    let m = proc.moments().unwrap();
                    prop_assert!(m.effective >= m.mean - 1e-18);
                    if m.variance == 0.0 {
                        prop_assert_eq!(m.effective, m.mean);
                    } else {
                        prop_assert!(m.effective > m.mean);
                    }
                    let lhs = m.mean * m.mean + m.variance;
                    prop_assert!((lhs - m.mean * m.effective).abs() <= 1e-12 * lhs.max(1e-30));
                    prop_assert!(m.mean * m.effective <= m.effective * m.effective * (1.0 + 1e-12));
                }
            }
        }
    }
}
