//! Cost (risk) models with exact derivatives and streaming-sample gradient
//! approximations.
//!
//! Two families are supported:
//!
//! - **Mean-square-error**: `J(w) = σ_d² − 2 r_duᵀw + wᵀR_u w (+ ρ/2‖w‖²)`
//!   with exact gradient/Hessian, generated by a linear regression model
//!   `d = u·w_o + v` with Gaussian regressors.
//! - **Regularized logistic**: `J(w) = ρ/2‖w‖² + E ln(1 + e^{−γ hᵀw})` whose
//!   distribution-level expectations have no closed form and are estimated by
//!   seeded Monte Carlo; per-sample quantities are exact.
//!
//! Replacing the expectation by the per-sample loss gradient yields the
//! stochastic gradient used by all learning recursions; the difference is the
//! gradient noise, whose limiting covariance and bounds are captured in
//! [`GradientNoiseProfile`].

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq, Mat};

/// Default sample budget for distribution-level logistic expectations.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
/// Default seed for distribution-level logistic expectations.
pub const DEFAULT_MC_SEED: u64 = 0x51AD;

/// One streaming observation.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSample {
    /// Scalar observation `d` and `1×M` regressor row `u`.
    Mse { d: f64, u: Vec<f64> },
    /// Binary label in {−1, +1} and feature vector `h`.
    Logistic { label: i8, features: Vec<f64> },
}

impl DataSample {
    pub fn dim(&self) -> usize {
        match self {
            DataSample::Mse { u, .. } => u.len(),
            DataSample::Logistic { features, .. } => features.len(),
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

// ---------------------------------------------------------------------------
// Mean-square-error cost
// ---------------------------------------------------------------------------

/// Quadratic risk `σ_d² − 2 r_duᵀ w + wᵀ R_u w + (ρ/2)‖w‖²`.
#[derive(Clone, Debug)]
pub struct MseCost {
    r_u: Mat,
    r_du: Vec<f64>,
    sigma_d2: f64,
    rho: f64,
}

impl MseCost {
    /// `rho = 0` gives the plain quadratic cost; `R_u` must be SPD.
    pub fn new(r_u: Mat, r_du: Vec<f64>, sigma_d2: f64, rho: f64) -> Result<Self> {
        if !r_u.is_square() || r_u.rows() != r_du.len() {
            return Err(Error::DimensionMismatch { expected: r_u.rows(), found: r_du.len() });
        }
        if !r_u.is_finite() || !r_du.iter().all(|v| v.is_finite()) || !sigma_d2.is_finite() {
            return Err(Error::NonFinite("mse cost parameters"));
        }
        if !r_u.is_spd() {
            return Err(Error::NotPositiveDefinite("regressor covariance"));
        }
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidParameter { name: "rho", reason: "must be nonnegative" });
        }
        if sigma_d2 < 0.0 {
            return Err(Error::InvalidParameter { name: "sigma_d2", reason: "must be nonnegative" });
        }
        Ok(MseCost { r_u, r_du, sigma_d2, rho })
    }

    pub fn dim(&self) -> usize {
        self.r_du.len()
    }

    pub fn regressor_covariance(&self) -> &Mat {
        &self.r_u
    }

    pub fn regularizer(&self) -> f64 {
        self.rho
    }

    fn check_point(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: w.len() });
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("weight vector"));
        }
        Ok(())
    }

    pub fn evaluate(&self, w: &[f64]) -> Result<f64> {
        self.check_point(w)?;
        let quad = self.r_u.quad_form(w);
        Ok(self.sigma_d2 - 2.0 * dot(&self.r_du, w) + quad + 0.5 * self.rho * norm_sq(w))
    }

    /// Exact column gradient `2(R_u w − r_du) + ρ w`.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_point(w)?;
        let mut g = self.r_u.matvec(w);
        for (gi, &ri) in g.iter_mut().zip(&self.r_du) {
            *gi = 2.0 * (*gi - ri);
        }
        if self.rho != 0.0 {
            axpy(self.rho, w, &mut g);
        }
        Ok(g)
    }

    /// Exact Hessian `2R_u + ρI`, symmetrized.
    pub fn hessian(&self) -> Mat {
        let mut h = self.r_u.scale(2.0);
        for i in 0..h.rows() {
            h[(i, i)] += self.rho;
        }
        h.symmetrized()
    }

    /// Unique minimizer, from `(2R_u + ρI) w = 2 r_du`.
    pub fn minimizer(&self) -> Result<Vec<f64>> {
        let h = self.hessian();
        let b: Vec<f64> = self.r_du.iter().map(|v| 2.0 * v).collect();
        h.solve_spd_vec(&b)
    }

    /// Strong-convexity constant `ν = 2λ_min(R_u) + ρ`.
    pub fn nu(&self) -> f64 {
        2.0 * self.r_u.sym_min_eigenvalue() + self.rho
    }

    /// Gradient Lipschitz constant `δ = 2λ_max(R_u) + ρ`.
    pub fn delta(&self) -> f64 {
        2.0 * self.r_u.sym_max_eigenvalue() + self.rho
    }
}

// ---------------------------------------------------------------------------
// Logistic cost
// ---------------------------------------------------------------------------

/// Sampling model for labelled features: `γ = +1` with the given prior and
/// `h | γ ~ N(γ·mean, covariance)`.
#[derive(Clone, Debug)]
pub struct FeatureModel {
    positive_prior: f64,
    mean: Vec<f64>,
    covariance: Mat,
    chol: Mat,
}

impl FeatureModel {
    pub fn new(positive_prior: f64, mean: Vec<f64>, covariance: Mat) -> Result<Self> {
        if !(0.0..=1.0).contains(&positive_prior) {
            return Err(Error::InvalidParameter { name: "positive_prior", reason: "must lie in [0, 1]" });
        }
        if !covariance.is_square() || covariance.rows() != mean.len() {
            return Err(Error::DimensionMismatch { expected: covariance.rows(), found: mean.len() });
        }
        if !covariance.is_spd() {
            return Err(Error::NotPositiveDefinite("feature covariance"));
        }
        let chol = covariance.cholesky()?;
        Ok(FeatureModel { positive_prior, mean, covariance, chol })
    }

    /// Balanced classes with the given class mean and covariance.
    pub fn balanced(mean: Vec<f64>, covariance: Mat) -> Result<Self> {
        FeatureModel::new(0.5, mean, covariance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Second moment `R_h = E hhᵀ = covariance + mean·meanᵀ` (the class sign
    /// cancels in the outer product).
    pub fn second_moment(&self) -> Mat {
        let mut r = self.covariance.clone();
        for i in 0..r.rows() {
            for j in 0..r.cols() {
                r[(i, j)] += self.mean[i] * self.mean[j];
            }
        }
        r
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DataSample {
        let mut s = DataSample::Logistic { label: 1, features: vec![0.0; self.dim()] };
        self.fill_sample(rng, &mut s);
        s
    }

    /// Refills an existing logistic sample in place.
    pub fn fill_sample<R: Rng + ?Sized>(&self, rng: &mut R, sample: &mut DataSample) {
        match sample {
            DataSample::Logistic { label, features } => {
                let m = self.dim();
                debug_assert_eq!(features.len(), m);
                *label = if rng.random::<f64>() < self.positive_prior { 1 } else { -1 };
                for (fi, &mi) in features.iter_mut().zip(&self.mean) {
                    *fi = *label as f64 * mi;
                }
                for j in 0..m {
                    let zj: f64 = StandardNormal.sample(rng);
                    for i in j..m {
                        features[i] += self.chol[(i, j)] * zj;
                    }
                }
            }
            DataSample::Mse { .. } => unreachable!("feature model fills logistic samples"),
        }
    }
}

/// Regularized logistic risk; `ρ > 0` is required so the risk is strongly
/// convex.
#[derive(Clone, Debug)]
pub struct LogisticCost {
    rho: f64,
    features: FeatureModel,
    second_moment: Mat,
}

/// Numerically stable `ln(1 + e^u)`.
fn softplus(u: f64) -> f64 {
    if u > 35.0 {
        u
    } else if u < -35.0 {
        u.exp()
    } else {
        u.exp().ln_1p()
    }
}

/// Numerically stable `1 / (1 + e^t)`.
fn sigmoid_neg(t: f64) -> f64 {
    if t > 35.0 {
        (-t).exp()
    } else {
        1.0 / (1.0 + t.exp())
    }
}

impl LogisticCost {
    pub fn new(rho: f64, features: FeatureModel) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter { name: "rho", reason: "must be positive for strong convexity" });
        }
        let second_moment = features.second_moment();
        Ok(LogisticCost { rho, features, second_moment })
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn regularizer(&self) -> f64 {
        self.rho
    }

    pub fn feature_model(&self) -> &FeatureModel {
        &self.features
    }

    pub fn second_moment(&self) -> &Mat {
        &self.second_moment
    }

    /// Strong-convexity constant `ν = ρ`.
    pub fn nu(&self) -> f64 {
        self.rho
    }

    /// Gradient Lipschitz constant `δ = ρ + λ_max(R_h)`.
    pub fn delta(&self) -> f64 {
        self.rho + self.second_moment.sym_max_eigenvalue()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DataSample {
        self.features.sample(rng)
    }

    fn unpack<'a>(&self, sample: &'a DataSample) -> Result<(f64, &'a [f64])> {
        match sample {
            DataSample::Logistic { label, features } if features.len() == self.dim() => {
                Ok((*label as f64, features))
            }
            DataSample::Logistic { .. } => {
                Err(Error::DimensionMismatch { expected: self.dim(), found: sample.dim() })
            }
            DataSample::Mse { .. } => Err(Error::SampleMismatch),
        }
    }

    /// Per-sample loss `ρ/2‖w‖² + ln(1 + e^{−γhᵀw})`.
    pub fn loss(&self, w: &[f64], sample: &DataSample) -> Result<f64> {
        let (gamma, h) = self.unpack(sample)?;
        Ok(0.5 * self.rho * norm_sq(w) + softplus(-gamma * dot(h, w)))
    }

    /// Per-sample loss gradient `ρw − γh/(1 + e^{γhᵀw})`.
    pub fn loss_gradient(&self, w: &[f64], sample: &DataSample) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        self.loss_gradient_into(w, sample, &mut g)?;
        Ok(g)
    }

    pub fn loss_gradient_into(&self, w: &[f64], sample: &DataSample, out: &mut [f64]) -> Result<()> {
        let (gamma, h) = self.unpack(sample)?;
        let factor = gamma * sigmoid_neg(gamma * dot(h, w));
        for ((o, &wi), &hi) in out.iter_mut().zip(w).zip(h) {
            *o = self.rho * wi - factor * hi;
        }
        Ok(())
    }

    /// Sample-average risk over a fixed set.
    pub fn empirical_risk(&self, w: &[f64], samples: &[DataSample]) -> Result<f64> {
        let mut acc = 0.0;
        for s in samples {
            let (gamma, h) = self.unpack(s)?;
            acc += softplus(-gamma * dot(h, w));
        }
        Ok(0.5 * self.rho * norm_sq(w) + acc / samples.len() as f64)
    }

    /// Sample-average gradient over a fixed set: the unbiased sample mean of
    /// per-sample loss gradients.
    pub fn empirical_gradient(&self, w: &[f64], samples: &[DataSample]) -> Result<Vec<f64>> {
        let m = self.dim();
        let mut acc = vec![0.0; m];
        for s in samples {
            let (gamma, h) = self.unpack(s)?;
            let factor = gamma * sigmoid_neg(gamma * dot(h, w));
            axpy(-factor, h, &mut acc);
        }
        let inv = 1.0 / samples.len() as f64;
        for (a, &wi) in acc.iter_mut().zip(w) {
            *a = *a * inv + self.rho * wi;
        }
        Ok(acc)
    }

    /// Sample-average Hessian `ρI + mean(hhᵀ·σ(t)σ(−t))`, symmetrized.
    pub fn empirical_hessian(&self, w: &[f64], samples: &[DataSample]) -> Result<Mat> {
        let m = self.dim();
        let mut acc = Mat::zeros(m, m);
        for s in samples {
            let (gamma, h) = self.unpack(s)?;
            let sneg = sigmoid_neg(gamma * dot(h, w));
            let factor = sneg * (1.0 - sneg);
            for i in 0..m {
                for j in 0..m {
                    acc[(i, j)] += factor * h[i] * h[j];
                }
            }
        }
        let mut out = acc.scale(1.0 / samples.len() as f64);
        for i in 0..m {
            out[(i, i)] += self.rho;
        }
        Ok(out.symmetrized())
    }

    fn draw(&self, n: usize, seed: u64) -> Vec<DataSample> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }

    /// Monte Carlo estimate of the risk with its standard error (the
    /// deterministic regularizer does not contribute to the error).
    pub fn risk_mc(&self, w: &[f64], n: usize, seed: u64) -> Result<McEstimate> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: w.len() });
        }
        let samples = self.draw(n, seed);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for s in &samples {
            let (gamma, h) = self.unpack(s)?;
            let v = softplus(-gamma * dot(h, w));
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        Ok(McEstimate {
            value: 0.5 * self.rho * norm_sq(w) + mean,
            std_error: (var / n as f64).sqrt(),
            samples: n,
        })
    }

    /// Monte Carlo gradient estimate with per-coordinate standard errors.
    pub fn gradient_mc(&self, w: &[f64], n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: w.len() });
        }
        let m = self.dim();
        let samples = self.draw(n, seed);
        let mut sum = vec![0.0; m];
        let mut sum_sq = vec![0.0; m];
        for s in &samples {
            let (gamma, h) = self.unpack(s)?;
            let factor = gamma * sigmoid_neg(gamma * dot(h, w));
            for j in 0..m {
                let v = -factor * h[j];
                sum[j] += v;
                sum_sq[j] += v * v;
            }
        }
        let mut value = vec![0.0; m];
        let mut se = vec![0.0; m];
        for j in 0..m {
            let mean = sum[j] / n as f64;
            value[j] = self.rho * w[j] + mean;
            let var = (sum_sq[j] / n as f64 - mean * mean).max(0.0);
            se[j] = (var / n as f64).sqrt();
        }
        Ok((value, se))
    }

    /// Monte Carlo Hessian estimate.
    pub fn hessian_mc(&self, w: &[f64], n: usize, seed: u64) -> Result<Mat> {
        let samples = self.draw(n, seed);
        self.empirical_hessian(w, &samples)
    }

    /// Monte Carlo estimate of the gradient-noise covariance at a point where
    /// the true gradient vanishes: `E ∇Q(w; x) ∇Q(w; x)ᵀ`.
    pub fn noise_covariance_mc(&self, w: &[f64], n: usize, seed: u64) -> Result<Mat> {
        let m = self.dim();
        let samples = self.draw(n, seed);
        let mut acc = Mat::zeros(m, m);
        let mut g = vec![0.0; m];
        for s in &samples {
            self.loss_gradient_into(w, s, &mut g)?;
            for i in 0..m {
                for j in 0..m {
                    acc[(i, j)] += g[i] * g[j];
                }
            }
        }
        Ok(acc.scale(1.0 / n as f64).symmetrized())
    }
}

// ---------------------------------------------------------------------------
// Unified cost model
// ---------------------------------------------------------------------------

/// A risk function an agent can evaluate, differentiate, and approximate from
/// streaming samples.
#[derive(Clone, Debug)]
pub enum CostModel {
    Mse(MseCost),
    Logistic(LogisticCost),
}

impl CostModel {
    pub fn dim(&self) -> usize {
        match self {
            CostModel::Mse(c) => c.dim(),
            CostModel::Logistic(c) => c.dim(),
        }
    }

    /// Risk at `w`. Exact for MSE; for logistic this is a seeded Monte Carlo
    /// estimate with the default budget (use [`LogisticCost::risk_mc`] to
    /// control the budget and read the standard error).
    pub fn evaluate(&self, w: &[f64]) -> Result<f64> {
        match self {
            CostModel::Mse(c) => c.evaluate(w),
            CostModel::Logistic(c) => Ok(c.risk_mc(w, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED)?.value),
        }
    }

    /// Column gradient at `w`; exact for MSE, Monte Carlo for logistic.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        match self {
            CostModel::Mse(c) => c.gradient(w),
            CostModel::Logistic(c) => Ok(c.gradient_mc(w, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED)?.0),
        }
    }

    /// Hessian at `w`; exact for MSE, Monte Carlo for logistic. Always
    /// symmetrized.
    pub fn hessian(&self, w: &[f64]) -> Result<Mat> {
        match self {
            CostModel::Mse(c) => {
                c.check_point(w)?;
                Ok(c.hessian())
            }
            CostModel::Logistic(c) => c.hessian_mc(w, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED),
        }
    }

    /// Per-sample stochastic gradient: drop the expectation and differentiate
    /// the loss at the observed sample.
    pub fn stochastic_gradient(&self, w: &[f64], sample: &DataSample) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        self.stochastic_gradient_into(w, sample, &mut g)?;
        Ok(g)
    }

    pub fn stochastic_gradient_into(
        &self,
        w: &[f64],
        sample: &DataSample,
        out: &mut [f64],
    ) -> Result<()> {
        match (self, sample) {
            (CostModel::Mse(c), DataSample::Mse { d, u }) => {
                if u.len() != c.dim() || w.len() != c.dim() {
                    return Err(Error::DimensionMismatch { expected: c.dim(), found: u.len() });
                }
                // 2[uᵀu w − uᵀ d]; with the residual factored out this is the
                // negated LMS update direction.
                let err = dot(u, w) - d;
                for (o, &ui) in out.iter_mut().zip(u) {
                    *o = 2.0 * err * ui;
                }
                if c.rho != 0.0 {
                    axpy(c.rho, w, out);
                }
                Ok(())
            }
            (CostModel::Logistic(c), s @ DataSample::Logistic { .. }) => {
                c.loss_gradient_into(w, s, out)
            }
            _ => Err(Error::SampleMismatch),
        }
    }

    /// Strong-convexity constant of the risk.
    pub fn nu(&self) -> f64 {
        match self {
            CostModel::Mse(c) => c.nu(),
            CostModel::Logistic(c) => c.nu(),
        }
    }

    /// Gradient Lipschitz constant of the risk.
    pub fn delta(&self) -> f64 {
        match self {
            CostModel::Mse(c) => c.delta(),
            CostModel::Logistic(c) => c.delta(),
        }
    }
}

// ---------------------------------------------------------------------------
// Linear regression data model and gradient-noise profile
// ---------------------------------------------------------------------------

/// Synthetic streaming source `d(i) = u_i·w_o + v(i)` with `u ~ N(0, R_u)`
/// (via the Cholesky factor of `R_u`) and white noise of variance `σ_v²`.
#[derive(Clone, Debug)]
pub struct LinearRegressionModel {
    w_o: Vec<f64>,
    r_u: Mat,
    sigma_v2: f64,
    chol: Mat,
}

impl LinearRegressionModel {
    pub fn new(w_o: Vec<f64>, r_u: Mat, sigma_v2: f64) -> Result<Self> {
        if !r_u.is_square() || r_u.rows() != w_o.len() {
            return Err(Error::DimensionMismatch { expected: r_u.rows(), found: w_o.len() });
        }
        if !r_u.is_spd() {
            return Err(Error::NotPositiveDefinite("regressor covariance"));
        }
        if !(sigma_v2.is_finite() && sigma_v2 >= 0.0) {
            return Err(Error::InvalidParameter { name: "sigma_v2", reason: "must be nonnegative" });
        }
        if !w_o.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("w_o"));
        }
        let chol = r_u.cholesky()?;
        Ok(LinearRegressionModel { w_o, r_u, sigma_v2, chol })
    }

    pub fn dim(&self) -> usize {
        self.w_o.len()
    }

    pub fn optimum(&self) -> &[f64] {
        &self.w_o
    }

    pub fn regressor_covariance(&self) -> &Mat {
        &self.r_u
    }

    pub fn noise_variance(&self) -> f64 {
        self.sigma_v2
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DataSample {
        let mut s = DataSample::Mse { d: 0.0, u: vec![0.0; self.dim()] };
        self.fill_sample(rng, &mut s);
        s
    }

    /// Refills an existing MSE sample in place (hot-loop path).
    pub fn fill_sample<R: Rng + ?Sized>(&self, rng: &mut R, sample: &mut DataSample) {
        let m = self.dim();
        match sample {
            DataSample::Mse { d, u } => {
                debug_assert_eq!(u.len(), m);
                // u = (L z)ᵀ with z standard normal, so E uᵀu = L Lᵀ = R_u.
                // The triangular product is accumulated column by column to
                // avoid scratch storage for z.
                u.fill(0.0);
                for j in 0..m {
                    let zj: f64 = StandardNormal.sample(rng);
                    for i in j..m {
                        u[i] += self.chol[(i, j)] * zj;
                    }
                }
                let v: f64 = if self.sigma_v2 > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    self.sigma_v2.sqrt() * z
                } else {
                    0.0
                };
                *d = dot(u, &self.w_o) + v;
            }
            DataSample::Logistic { .. } => unreachable!("regression model fills MSE samples"),
        }
    }

    /// The mean-square-error cost induced by the model: `r_du = R_u w_o` and
    /// `σ_d² = w_oᵀ R_u w_o + σ_v²`.
    pub fn cost(&self) -> MseCost {
        let r_du = self.r_u.matvec(&self.w_o);
        let sigma_d2 = self.r_u.quad_form(&self.w_o) + self.sigma_v2;
        MseCost::new(self.r_u.clone(), r_du, sigma_d2, 0.0).expect("model invariants hold")
    }

    /// Gradient-noise profile of the LMS gradient approximation under this
    /// model: `H = 2R_u`, `R_s = 4σ_v²R_u`, `σ_s² = 4σ_v²Tr(R_u)`.
    ///
    /// The relative bound uses the exact Gaussian fourth-moment identity
    /// `E‖s(w)‖² = 4 w̃ᵀ(R_u² + Tr(R_u)R_u)w̃ + σ_s²`, so
    /// `β² = 4 λ_max(R_u² + Tr(R_u)R_u)` is a true (and tight) bound for this
    /// sampling model.
    pub fn noise_profile(&self) -> GradientNoiseProfile {
        let hessian = self.r_u.scale(2.0);
        let covariance = self.r_u.scale(4.0 * self.sigma_v2);
        let sigma_s2 = 4.0 * self.sigma_v2 * self.r_u.trace();
        let second = self.r_u.matmul(&self.r_u).add(&self.r_u.scale(self.r_u.trace()));
        let relative_bound = 4.0 * second.sym_max_eigenvalue();
        GradientNoiseProfile { hessian, covariance, relative_bound, absolute_bound: sigma_s2 }
    }
}

/// Second-order description of the gradient noise of a stochastic-gradient
/// construction: Hessian at the minimizer, limiting noise covariance there,
/// and the relative/absolute variance bounds
/// `E‖s(w)‖² ≤ β²‖w_o − w‖² + σ_s²`.
#[derive(Clone, Debug)]
pub struct GradientNoiseProfile {
    /// `H = ∇²J(w_o)`.
    pub hessian: Mat,
    /// `R_s = lim E[s(w_o)s(w_o)ᵀ]`.
    pub covariance: Mat,
    /// Relative-noise bound `β²`.
    pub relative_bound: f64,
    /// Absolute-noise bound `σ_s²`.
    pub absolute_bound: f64,
}

/// Estimates the relative-noise bound `β²` empirically: measures
/// `E‖s(w)‖² − σ_s²` at a grid of points and regresses it on `‖w_o − w‖²`
/// through the origin.
pub fn estimate_relative_noise_bound(
    model: &LinearRegressionModel,
    radii: &[f64],
    samples_per_point: usize,
    seed: u64,
) -> Result<f64> {
    let m = model.dim();
    let cost = CostModel::Mse(model.cost());
    let sigma_s2 = model.noise_profile().absolute_bound;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut g = vec![0.0; m];
    let mut sample = DataSample::Mse { d: 0.0, u: vec![0.0; m] };
    for &r in radii {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter { name: "radii", reason: "must be positive" });
        }
        // Random direction scaled to the requested radius.
        let mut w = vec![0.0; m];
        for wi in w.iter_mut() {
            *wi = StandardNormal.sample(&mut rng);
        }
        let scale = r / norm_sq(&w).sqrt();
        for (wi, &oi) in w.iter_mut().zip(model.optimum()) {
            *wi = oi + *wi * scale;
        }
        let grad = cost.gradient(&w)?;
        let mut acc = 0.0;
        for _ in 0..samples_per_point {
            model.fill_sample(&mut rng, &mut sample);
            cost.stochastic_gradient_into(&w, &sample, &mut g)?;
            for (gi, ti) in g.iter().zip(&grad) {
                let s = gi - ti;
                acc += s * s;
            }
        }
        let excess = acc / samples_per_point as f64 - sigma_s2;
        num += excess * r * r;
        den += r * r * r * r;
    }
    Ok((num / den).max(0.0))
}
