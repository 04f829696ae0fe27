//! Combination policies over networks of agents.
//!
//! A combination policy is a left-stochastic matrix `A = [a_{ℓk}]`: column
//! `k` holds the weights agent `k` applies to data received from its
//! neighbors. Random policies model link failures: each off-diagonal edge is
//! independently on with its own probability and the diagonal entry absorbs
//! the mass of dropped links, so every realization stays left-stochastic
//! without renormalization.
//!
//! The randomness enters performance theory only through the first two
//! moments: the mean matrix `Ā` and the Kronecker covariance
//! `C_A = E[(A_i − Ā) ⊗ (A_i − Ā)]`. The asynchronous network is strongly
//! connected when `Ā ⊗ Ā + C_A` is primitive, in which case two Perron
//! vectors exist and every steady-state expression is written in terms of
//! them; [`PerronData`] bundles that machinery.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{perron_power_iteration, Mat};

/// Default tolerance for stochasticity and eigenvector residual checks.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Successive-iterate tolerance for Perron power iteration.
pub const PERRON_TOL: f64 = 1e-12;
/// Iteration cap for Perron power iteration.
pub const PERRON_MAX_ITER: usize = 1_000_000;

// ---------------------------------------------------------------------------
// Left-stochastic validation
// ---------------------------------------------------------------------------

/// One way a matrix fails to be left-stochastic.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum StochasticityViolation {
    NegativeEntry { row: usize, col: usize, value: f64 },
    ColumnSum { col: usize, sum: f64 },
    NonFinite { row: usize, col: usize },
}

/// Report produced by [`validate_left_stochastic`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StochasticityReport {
    pub ok: bool,
    pub violations: Vec<StochasticityViolation>,
}

/// Checks that `a` is nonnegative with unit column sums within `tol`;
/// reports every violation rather than failing on the first.
pub fn validate_left_stochastic(a: &Mat, tol: f64) -> StochasticityReport {
    let mut violations = Vec::new();
    let n = a.rows();
    for i in 0..n {
        for j in 0..a.cols() {
            let v = a[(i, j)];
            if !v.is_finite() {
                violations.push(StochasticityViolation::NonFinite { row: i, col: j });
            } else if v < 0.0 {
                violations.push(StochasticityViolation::NegativeEntry { row: i, col: j, value: v });
            }
        }
    }
    for j in 0..a.cols() {
        let sum = a.col_sum(j);
        if !((sum - 1.0).abs() <= tol) {
            violations.push(StochasticityViolation::ColumnSum { col: j, sum });
        }
    }
    StochasticityReport { ok: violations.is_empty(), violations }
}

fn first_left_stochastic_error(a: &Mat, tol: f64) -> Result<()> {
    let report = validate_left_stochastic(a, tol);
    if report.ok {
        return Ok(());
    }
    Err(match report.violations[0] {
        StochasticityViolation::NegativeEntry { row, col, value } => {
            Error::NegativeEntry { row, col, value }
        }
        StochasticityViolation::ColumnSum { col, sum } => Error::NotLeftStochastic { column: col, sum },
        StochasticityViolation::NonFinite { .. } => Error::NonFinite("combination matrix"),
    })
}

// ---------------------------------------------------------------------------
// Primitivity
// ---------------------------------------------------------------------------

/// Boolean adjacency matrix stored as bitset rows; used for reachability so
/// primitivity checks never overflow.
struct BitMat {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl BitMat {
    fn from_pattern(a: &Mat) -> Self {
        let n = a.rows();
        let words = n.div_ceil(64);
        let mut rows = vec![0u64; n * words];
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    rows[i * words + j / 64] |= 1 << (j % 64);
                }
            }
        }
        BitMat { n, words, rows }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.row(i)[j / 64] & (1 << (j % 64)) != 0
    }

    fn all_ones(&self) -> bool {
        for i in 0..self.n {
            let row = self.row(i);
            for (w, word) in row.iter().enumerate() {
                let expect = if (w + 1) * 64 <= self.n {
                    u64::MAX
                } else {
                    (1u64 << (self.n - w * 64)) - 1
                };
                if *word & expect != expect {
                    return false;
                }
            }
        }
        true
    }

    fn square(&self) -> BitMat {
        let n = self.n;
        let words = self.words;
        let mut rows = vec![0u64; n * words];
        for i in 0..n {
            let dst_start = i * words;
            for j in 0..n {
                if self.get(i, j) {
                    let src = self.row(j);
                    for w in 0..words {
                        rows[dst_start + w] |= src[w];
                    }
                }
            }
        }
        BitMat { n, words, rows }
    }

    fn has_zero_line(&self) -> bool {
        for i in 0..self.n {
            if self.row(i).iter().all(|w| *w == 0) {
                return true;
            }
        }
        for j in 0..self.n {
            if (0..self.n).all(|i| !self.get(i, j)) {
                return true;
            }
        }
        false
    }
}

/// Tests whether a nonnegative square matrix is primitive: some power is
/// entrywise positive. Works on the zero pattern via bitset reachability and
/// squares the pattern until past twice the Wielandt bound `(N−1)² + 1`.
pub fn is_primitive(b: &Mat) -> bool {
    assert!(b.is_square());
    let n = b.rows();
    if n == 0 {
        return false;
    }
    if n == 1 {
        return b[(0, 0)] > 0.0;
    }
    let mut pat = BitMat::from_pattern(b);
    // With a zero row or column no power can be positive; excluding them
    // makes positivity of successive squares monotone, so checking powers
    // of two suffices.
    if pat.has_zero_line() {
        return false;
    }
    let wielandt = (n - 1) * (n - 1) + 1;
    let mut power = 1usize;
    loop {
        if pat.all_ones() {
            return true;
        }
        if power > 2 * wielandt {
            return false;
        }
        pat = pat.square();
        power *= 2;
    }
}

/// Perron eigenvector of a primitive left-stochastic matrix:
/// `B p = p`, `𝟙ᵀp = 1`, `p > 0`, computed by power iteration.
pub fn perron_vector(b: &Mat, tol: f64) -> Result<Vec<f64>> {
    first_left_stochastic_error(b, DEFAULT_TOL)?;
    if !is_primitive(b) {
        return Err(Error::NotPrimitive("combination matrix"));
    }
    perron_power_iteration(b, tol, PERRON_MAX_ITER)
}

// ---------------------------------------------------------------------------
// Static combination matrices
// ---------------------------------------------------------------------------

/// A validated left-stochastic combination matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinationMatrix {
    a: Mat,
}

impl CombinationMatrix {
    pub fn new(a: Mat) -> Result<Self> {
        Self::with_tolerance(a, DEFAULT_TOL)
    }

    pub fn with_tolerance(a: Mat, tol: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        first_left_stochastic_error(&a, tol)?;
        Ok(CombinationMatrix { a })
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }

    pub fn size(&self) -> usize {
        self.a.rows()
    }

    pub fn is_primitive(&self) -> bool {
        is_primitive(&self.a)
    }

    /// True when rows also sum to one.
    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        (0..self.size()).all(|i| (self.a.row_sum(i) - 1.0).abs() <= tol)
    }

    pub fn perron_vector(&self) -> Result<Vec<f64>> {
        perron_vector(&self.a, PERRON_TOL)
    }

    /// Uniform all-to-all averaging `𝟙𝟙ᵀ/N`.
    pub fn fully_connected(n: usize) -> Self {
        CombinationMatrix { a: Mat::from_fn(n, n, |_, _| 1.0 / n as f64) }
    }

    /// Ring with self-loops and uniform 1/3 weights (averaging rule on the
    /// cycle graph).
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter { name: "n", reason: "ring needs at least 3 agents" });
        }
        let mut a = Mat::zeros(n, n);
        let w = 1.0 / 3.0;
        for k in 0..n {
            a[(k, k)] = w;
            a[((k + 1) % n, k)] = w;
            a[((k + n - 1) % n, k)] = w;
        }
        Ok(CombinationMatrix { a })
    }

    /// Metropolis weights on an undirected graph: symmetric and doubly
    /// stochastic, `a_{ℓk} = 1/max(d_ℓ, d_k)` across edges with the diagonal
    /// absorbing the remainder.
    pub fn metropolis(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let neighbors = undirected_neighbors(n, edges)?;
        let deg: Vec<usize> = neighbors.iter().map(|s| s.len()).collect();
        let mut a = Mat::zeros(n, n);
        for k in 0..n {
            let mut rest = 1.0;
            for &l in &neighbors[k] {
                let w = 1.0 / deg[l].max(deg[k]) as f64;
                a[(l, k)] = w;
                rest -= w;
            }
            a[(k, k)] = rest;
        }
        CombinationMatrix::new(a)
    }

    /// Averaging rule on an undirected graph: each column is uniform over the
    /// closed neighborhood (neighbors plus self).
    pub fn uniform_averaging(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let neighbors = undirected_neighbors(n, edges)?;
        let mut a = Mat::zeros(n, n);
        for k in 0..n {
            let w = 1.0 / (neighbors[k].len() + 1) as f64;
            a[(k, k)] = w;
            for &l in &neighbors[k] {
                a[(l, k)] = w;
            }
        }
        CombinationMatrix::new(a)
    }
}

fn undirected_neighbors(n: usize, edges: &[(usize, usize)]) -> Result<Vec<Vec<usize>>> {
    let mut neighbors = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::InvalidParameter { name: "edges", reason: "vertex index out of range" });
        }
        if u == v {
            continue; // self-loops are implicit
        }
        if !neighbors[u].contains(&v) {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
    }
    for s in neighbors.iter_mut() {
        s.sort_unstable();
    }
    Ok(neighbors)
}

// ---------------------------------------------------------------------------
// Random combination policies
// ---------------------------------------------------------------------------

/// Activation probability of one directed link (`from` feeds `to`).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LinkProbability {
    pub from: usize,
    pub to: usize,
    pub p: f64,
}

/// A left-stochastic combination policy with independent per-link Bernoulli
/// on-off randomness. A dropped link's weight moves onto the receiving
/// agent's self-weight, so realizations are left-stochastic by construction.
#[derive(Clone, Debug)]
pub struct RandomCombinationPolicy {
    nominal: CombinationMatrix,
    /// Activation probability per entry; 1 on the diagonal and wherever the
    /// nominal weight is zero.
    link_prob: Mat,
}

impl RandomCombinationPolicy {
    /// A policy whose links never fail.
    pub fn deterministic(nominal: CombinationMatrix) -> Self {
        let n = nominal.size();
        RandomCombinationPolicy { nominal, link_prob: Mat::from_fn(n, n, |_, _| 1.0) }
    }

    /// Per-link probabilities; links not listed stay always-on.
    pub fn new(nominal: CombinationMatrix, links: &[LinkProbability]) -> Result<Self> {
        let n = nominal.size();
        let mut link_prob = Mat::from_fn(n, n, |_, _| 1.0);
        for lp in links {
            if lp.from >= n || lp.to >= n {
                return Err(Error::InvalidParameter { name: "link", reason: "agent index out of range" });
            }
            if lp.from == lp.to {
                return Err(Error::InvalidParameter {
                    name: "link",
                    reason: "self-weights absorb dropped mass and cannot fail",
                });
            }
            if !(0.0..=1.0).contains(&lp.p) || !lp.p.is_finite() {
                return Err(Error::InvalidParameter { name: "link.p", reason: "must lie in [0, 1]" });
            }
            if nominal.matrix()[(lp.from, lp.to)] == 0.0 {
                return Err(Error::InvalidParameter {
                    name: "link",
                    reason: "probability given for a link absent from the nominal policy",
                });
            }
            link_prob[(lp.from, lp.to)] = lp.p;
        }
        Ok(RandomCombinationPolicy { nominal, link_prob })
    }

    /// Same activation probability `q` on every off-diagonal nominal link.
    pub fn with_uniform_probability(nominal: CombinationMatrix, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) || !q.is_finite() {
            return Err(Error::InvalidParameter { name: "q", reason: "must lie in [0, 1]" });
        }
        let n = nominal.size();
        let mut link_prob = Mat::from_fn(n, n, |_, _| 1.0);
        for l in 0..n {
            for k in 0..n {
                if l != k && nominal.matrix()[(l, k)] != 0.0 {
                    link_prob[(l, k)] = q;
                }
            }
        }
        Ok(RandomCombinationPolicy { nominal, link_prob })
    }

    pub fn size(&self) -> usize {
        self.nominal.size()
    }

    pub fn nominal(&self) -> &CombinationMatrix {
        &self.nominal
    }

    pub fn is_deterministic(&self) -> bool {
        let n = self.size();
        (0..n).all(|l| (0..n).all(|k| self.link_prob[(l, k)] == 1.0))
    }

    /// Draws one realization `A_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        let mut a = Mat::zeros(self.size(), self.size());
        self.sample_into(&mut a, rng);
        a
    }

    /// Draws one realization in place. Dropped mass is added to the
    /// receiving agent's self-weight; nothing is renormalized.
    pub fn sample_into<R: Rng + ?Sized>(&self, a: &mut Mat, rng: &mut R) {
        let n = self.size();
        let nominal = self.nominal.matrix();
        for k in 0..n {
            let mut dropped = 0.0;
            for l in 0..n {
                let w = nominal[(l, k)];
                if l == k || w == 0.0 {
                    a[(l, k)] = if l == k { w } else { 0.0 };
                    continue;
                }
                let q = self.link_prob[(l, k)];
                let on = q == 1.0 || rng.random::<f64>() < q;
                if on {
                    a[(l, k)] = w;
                } else {
                    a[(l, k)] = 0.0;
                    dropped += w;
                }
            }
            a[(k, k)] = nominal[(k, k)] + dropped;
        }
    }

    /// Mean matrix `Ā`: off-diagonal entries scale by their probabilities and
    /// the diagonal picks up the expected dropped mass.
    pub fn mean(&self) -> Mat {
        let n = self.size();
        let nominal = self.nominal.matrix();
        let mut mean = Mat::zeros(n, n);
        for k in 0..n {
            let mut absorbed = 0.0;
            for l in 0..n {
                if l == k {
                    continue;
                }
                let w = nominal[(l, k)];
                if w == 0.0 {
                    continue;
                }
                let q = self.link_prob[(l, k)];
                mean[(l, k)] = q * w;
                absorbed += (1.0 - q) * w;
            }
            mean[(k, k)] = nominal[(k, k)] + absorbed;
        }
        mean
    }

    /// First and second moments `(Ā, C_A)` with
    /// `C_A = E[(A_i − Ā) ⊗ (A_i − Ā)]` assembled from the closed form of the
    /// spatially-uncorrelated on-off model. Entry layout follows the
    /// Kronecker convention `C_A[(ℓN + n, kN + m)] = cov(a_{ℓk}, a_{nm})`.
    pub fn moments(&self) -> (Mat, Mat) {
        let n = self.size();
        let nominal = self.nominal.matrix();
        let mean = self.mean();
        let mut c = Mat::zeros(n * n, n * n);
        // Per-link variance of the on-off coefficient.
        let var = |l: usize, k: usize| -> f64 {
            let w = nominal[(l, k)];
            if l == k || w == 0.0 {
                return 0.0;
            }
            let q = self.link_prob[(l, k)];
            q * (1.0 - q) * w * w
        };
        for k in 0..n {
            let mut total = 0.0;
            for l in 0..n {
                if l == k {
                    continue;
                }
                let v = var(l, k);
                if v == 0.0 {
                    continue;
                }
                total += v;
                // cov(a_{ℓk}, a_{ℓk}) = σ²; covariance with the absorbing
                // diagonal coefficient of the same column is −σ².
                c[(l * n + l, k * n + k)] = v;
                c[(l * n + k, k * n + k)] = -v;
                c[(k * n + l, k * n + k)] = -v;
            }
            c[(k * n + k, k * n + k)] = total;
        }
        (mean, c)
    }

    /// Neighborhoods of the mean graph: `N_k = {ℓ : ā_{ℓk} > 0}` (equal to
    /// the union of realization neighborhoods).
    pub fn mean_graph(&self) -> Vec<Vec<usize>> {
        let mean = self.mean();
        let n = self.size();
        (0..n)
            .map(|k| (0..n).filter(|&l| mean[(l, k)] > 0.0).collect())
            .collect()
    }

    /// Strong connectivity of the asynchronous model: primitivity of
    /// `Ā ⊗ Ā + C_A`.
    pub fn is_strongly_connected(&self) -> bool {
        let (mean, c) = self.moments();
        is_primitive(&mean.kron(&mean).add(&c))
    }
}

// ---------------------------------------------------------------------------
// Perron data
// ---------------------------------------------------------------------------

/// Perron machinery for an asynchronous combination policy.
///
/// `mean_vector` is the Perron vector of `Ā`; `pair_vector` is the Perron
/// vector of `Ā ⊗ Ā + C_A`, whose `N×N` reshape `pair_matrix` is symmetric
/// PSD with rows and columns summing to the mean vector. The difference
/// `pair_covariance = pair_matrix − p̄ p̄ᵀ` is PSD with zero row sums and its
/// diagonal measures how link randomness inflates steady-state error.
#[derive(Clone, Debug)]
pub struct PerronData {
    pub mean_vector: Vec<f64>,
    pub pair_vector: Vec<f64>,
    pub pair_matrix: Mat,
    pub pair_covariance: Mat,
    pub pair_covariance_diag: Vec<f64>,
}

impl PerronData {
    /// Builds from explicit `(Ā, C_A)` moments.
    pub fn from_moments(a_mean: &Mat, c_a: &Mat, tol: f64) -> Result<Self> {
        let n = a_mean.rows();
        if !a_mean.is_square() || !c_a.is_square() || c_a.rows() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: c_a.rows() });
        }
        let second = a_mean.kron(a_mean).add(c_a);
        if !is_primitive(&second) {
            return Err(Error::NotPrimitive("moment matrix of the combination policy"));
        }
        // Primitivity of the second moment implies primitivity of the mean.
        debug_assert!(is_primitive(a_mean));
        let mean_vector = perron_power_iteration(a_mean, tol, PERRON_MAX_ITER)?;
        let pair_vector = perron_power_iteration(&second, tol, PERRON_MAX_ITER)?;
        // pair_vector stacks N subvectors of length N; subvector k becomes
        // column k of the pair matrix.
        let pair_matrix = Mat::from_fn(n, n, |l, k| pair_vector[k * n + l]);
        let pair_covariance =
            Mat::from_fn(n, n, |l, k| pair_matrix[(l, k)] - mean_vector[l] * mean_vector[k]);
        let pair_covariance_diag = (0..n).map(|k| pair_covariance[(k, k)]).collect();
        Ok(PerronData {
            mean_vector,
            pair_vector,
            pair_matrix,
            pair_covariance,
            pair_covariance_diag,
        })
    }

    pub fn from_policy(policy: &RandomCombinationPolicy, tol: f64) -> Result<Self> {
        let (mean, c) = policy.moments();
        PerronData::from_moments(&mean, &c, tol)
    }

    /// Synchronous case: a fixed primitive matrix, `C_A = 0`.
    pub fn from_static(a: &CombinationMatrix) -> Result<Self> {
        let n = a.size();
        PerronData::from_moments(a.matrix(), &Mat::zeros(n * n, n * n), PERRON_TOL)
    }

    pub fn size(&self) -> usize {
        self.mean_vector.len()
    }
}
