//! Target distributions: scores, log densities, seeded sampling, and the distribution-side
//! constants the convergence bounds consume.
//!
//! Two families are supported. Gaussians work in any dimension; their constants are exact
//! linear algebra on the covariance. Gaussian mixtures (shared component variance) are
//! one-dimensional; their score-Lipschitz constant is certified from a dense grid of the
//! analytic score derivative, and their transport-inequality constant lambda cannot be
//! derived here, so it must be supplied as `lambda_override` (see
//! [`Target::t1_sanity_check`] for a numerical check of a candidate value).
//!
//! Per-distribution constants:
//! - `lipschitz` (L): Lipschitz constant of the score. Gaussian: largest eigenvalue of the
//!   precision matrix. Mixture: certified grid bound, floored at 1/sigma^2 (the limit at
//!   infinity) and inflated 0.1% to absorb grid resolution; over-estimates are safe.
//! - `x_star`: a score root. Gaussian: the mean. Mixture: leftmost root by bisection.
//! - `lambda`: transport-inequality constant. Gaussian: smallest precision eigenvalue.
//! - `m_p`, `big_m_p`: E||Z|| and E||Z||^2. Exact in 1-D and in the centered isotropic
//!   case; otherwise m_p falls back to the Jensen upper bound sqrt(big_m_p) and is flagged.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    chi_mean, folded_normal_mean, kahan_sum, logsumexp, trapezoid_integral, KahanSum,
};
use crate::transport::ParticleEnsemble;

const LN_2PI: f64 = 1.8378770664093453;

/// Serializable target description. Build a [`Target`] with [`TargetSpec::build`].
///
/// For `GaussianMixture`, `mean` holds the component means (the family is 1-D).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    GaussianMixture {
        mean: Vec<f64>,
        weights: Vec<f64>,
        sigma2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_override: Option<f64>,
    },
}

impl TargetSpec {
    pub fn gaussian_1d(mean: f64, variance: f64) -> Self {
        Self::Gaussian {
            mean: vec![mean],
            covariance: vec![vec![variance]],
        }
    }

    pub fn standard_normal(dim: usize) -> Self {
        let covariance = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::Gaussian {
            mean: vec![0.0; dim],
            covariance,
        }
    }

    pub fn build(&self) -> Result<Target> {
        match self {
            Self::Gaussian { mean, covariance } => Ok(Target::Gaussian(Gaussian::new(
                mean.clone(),
                covariance.clone(),
            )?)),
            Self::GaussianMixture {
                mean,
                weights,
                sigma2,
                lambda_override,
            } => Ok(Target::Mixture(Mixture1d::new(
                mean.clone(),
                weights.clone(),
                *sigma2,
                *lambda_override,
            )?)),
        }
    }
}

/// Distribution-side constants for the convergence bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetConstants {
    pub lipschitz: f64,
    pub x_star: Vec<f64>,
    pub lambda: f64,
    pub m_p: f64,
    pub big_m_p: f64,
    /// True when `m_p` is the Jensen bound sqrt(big_m_p) rather than the exact value.
    pub m_p_is_upper_bound: bool,
}

/// A moment computed either exactly or by seeded Monte Carlo (with standard error).
#[derive(Clone, Copy, Debug)]
pub struct EstimatedMoment {
    pub value: f64,
    pub std_error: Option<f64>,
}

impl EstimatedMoment {
    fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: None,
        }
    }
}

/// Validated, evaluation-ready target.
#[derive(Clone, Debug)]
pub enum Target {
    Gaussian(Gaussian),
    Mixture(Mixture1d),
}

#[derive(Clone, Debug)]
pub struct Gaussian {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
    /// -(d/2) ln 2 pi - (1/2) ln det Sigma.
    log_norm: f64,
    cov_eig_min: f64,
    cov_eig_max: f64,
}

#[derive(Clone, Debug)]
pub struct Mixture1d {
    means: Vec<f64>,
    weights: Vec<f64>,
    sigma2: f64,
    sigma: f64,
    lambda_override: Option<f64>,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidSpec("gaussian mean must be non-empty".into()));
        }
        if covariance.len() != d || covariance.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidSpec(format!(
                "covariance must be {d} x {d} to match the mean"
            )));
        }
        if mean.iter().any(|v| !v.is_finite())
            || covariance.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("gaussian parameters"));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidSpec("covariance must be symmetric".into()));
        }
        let chol: Cholesky<f64, Dyn> = Cholesky::new(cov.clone()).ok_or_else(|| {
            Error::InvalidSpec("covariance must be symmetric positive definite".into())
        })?;
        let precision = chol.inverse();
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let eig = SymmetricEigen::new(cov.clone());
        let cov_eig_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let cov_eig_max = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            mean: DVector::from_vec(mean),
            covariance: cov,
            precision,
            chol_lower: chol.l(),
            log_norm: -0.5 * (d as f64) * LN_2PI - 0.5 * log_det,
            cov_eig_min,
            cov_eig_max,
        })
    }

    fn is_isotropic_centered(&self) -> bool {
        let d = self.mean.len();
        let s = self.covariance[(0, 0)];
        self.mean.iter().all(|&m| m == 0.0)
            && (0..d).all(|i| {
                (0..d).all(|j| {
                    let want = if i == j { s } else { 0.0 };
                    (self.covariance[(i, j)] - want).abs() <= 1e-14 * s.max(1.0)
                })
            })
    }
}

impl Mixture1d {
    pub fn new(
        means: Vec<f64>,
        weights: Vec<f64>,
        sigma2: f64,
        lambda_override: Option<f64>,
    ) -> Result<Self> {
        if means.is_empty() || means.len() != weights.len() {
            return Err(Error::InvalidSpec(format!(
                "mixture needs matching non-empty means/weights, got {} / {}",
                means.len(),
                weights.len()
            )));
        }
        if means.iter().chain(weights.iter()).any(|v| !v.is_finite()) || !sigma2.is_finite() {
            return Err(Error::NonFinite("mixture parameters"));
        }
        if sigma2 <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "mixture sigma2 must be positive, got {sigma2}"
            )));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidSpec("mixture weights must be positive".into()));
        }
        let total = kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "mixture weights must sum to 1, got {total}"
            )));
        }
        if let Some(lambda) = lambda_override {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "lambda_override must be positive, got {lambda}"
                )));
            }
        }
        Ok(Self {
            means,
            weights,
            sigma2,
            sigma: sigma2.sqrt(),
            lambda_override,
        })
    }

    /// Log of component responsibilities plus the total log density.
    fn log_responsibilities(&self, x: f64) -> (Vec<f64>, f64) {
        let log_terms: Vec<f64> = self
            .means
            .iter()
            .zip(&self.weights)
            .map(|(&m, &w)| {
                let z = (x - m) / self.sigma;
                w.ln() - 0.5 * LN_2PI - self.sigma.ln() - 0.5 * z * z
            })
            .collect();
        let log_p = logsumexp(&log_terms);
        (log_terms, log_p)
    }

    /// Posterior mean and variance of the component means given x.
    fn posterior_mean_var(&self, x: f64) -> (f64, f64) {
        let (log_terms, log_p) = self.log_responsibilities(x);
        let mut mean = 0.0;
        for (lt, &m) in log_terms.iter().zip(&self.means) {
            mean += (lt - log_p).exp() * m;
        }
        let mut var = 0.0;
        for (lt, &m) in log_terms.iter().zip(&self.means) {
            var += (lt - log_p).exp() * (m - mean) * (m - mean);
        }
        (mean, var)
    }

    fn score_scalar(&self, x: f64) -> f64 {
        let (mean, _) = self.posterior_mean_var(x);
        -(x - mean) / self.sigma2
    }

    /// d/dx score = -1/sigma^2 + Var_post(mu) / sigma^4.
    fn score_derivative(&self, x: f64) -> f64 {
        let (_, var) = self.posterior_mean_var(x);
        -1.0 / self.sigma2 + var / (self.sigma2 * self.sigma2)
    }

    fn grid(&self, points: usize) -> Vec<f64> {
        let lo = self.means.iter().copied().fold(f64::INFINITY, f64::min) - 12.0 * self.sigma;
        let hi = self
            .means
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            + 12.0 * self.sigma;
        (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect()
    }

    /// Certified score-Lipschitz bound: grid max of |score'| with a 0.1% resolution
    /// margin, floored at the tail limit 1/sigma^2. Stays below the crude global bound
    /// 1/sigma^2 + (dmu/sigma^2)^2, which tests assert.
    fn certified_lipschitz(&self) -> f64 {
        let grid_max = self
            .grid(40_001)
            .into_iter()
            .map(|x| self.score_derivative(x).abs())
            .fold(0.0, f64::max);
        (1.001 * grid_max).max(1.0 / self.sigma2)
    }

    /// Leftmost score root by sign-change scan plus bisection.
    fn leftmost_score_root(&self) -> Result<f64> {
        let grid = self.grid(40_001);
        let mut prev_x = grid[0];
        let mut prev_s = self.score_scalar(prev_x);
        if prev_s == 0.0 {
            return Ok(prev_x);
        }
        for &x in &grid[1..] {
            let s = self.score_scalar(x);
            if s == 0.0 {
                return Ok(x);
            }
            if prev_s.signum() != s.signum() {
                let (mut lo, mut hi) = (prev_x, x);
                let mut s_lo = prev_s;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let s_mid = self.score_scalar(mid);
                    if s_mid == 0.0 {
                        return Ok(mid);
                    }
                    if s_lo.signum() == s_mid.signum() {
                        lo = mid;
                        s_lo = s_mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok(0.5 * (lo + hi));
            }
            prev_x = x;
            prev_s = s;
        }
        Err(Error::RootFinding(
            "mixture score has no sign change on the search grid".into(),
        ))
    }
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.mean.len(),
            Self::Mixture(_) => 1,
        }
    }

    /// Score s_p(x) = grad log p(x).
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        match self {
            Self::Gaussian(g) => {
                let diff = DVector::from_fn(x.len(), |i, _| x[i] - g.mean[i]);
                let s = -(&g.precision * diff);
                Ok(s.iter().copied().collect())
            }
            Self::Mixture(m) => Ok(vec![m.score_scalar(x[0])]),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        match self {
            Self::Gaussian(g) => {
                let diff = DVector::from_fn(x.len(), |i, _| x[i] - g.mean[i]);
                Ok(g.log_norm - 0.5 * (&g.precision * &diff).dot(&diff))
            }
            Self::Mixture(m) => Ok(m.log_responsibilities(x[0]).1),
        }
    }

    /// n equal-weight i.i.d. draws; deterministic given the seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<ParticleEnsemble> {
        if n == 0 {
            return Err(Error::InvalidSpec("cannot sample an empty ensemble".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut positions = Vec::with_capacity(n * d);
        match self {
            Self::Gaussian(g) => {
                for _ in 0..n {
                    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                    let x = &g.mean + &g.chol_lower * z;
                    positions.extend(x.iter());
                }
            }
            Self::Mixture(m) => {
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut mean = *m.means.last().expect("mixture is non-empty");
                    for (&w, &mu) in m.weights.iter().zip(&m.means) {
                        acc += w;
                        if u < acc {
                            mean = mu;
                            break;
                        }
                    }
                    let z: f64 = StandardNormal.sample(&mut rng);
                    positions.push(mean + m.sigma * z);
                }
            }
        }
        ParticleEnsemble::equal_weights(positions, d)
    }

    pub fn target_constants(&self) -> Result<TargetConstants> {
        match self {
            Self::Gaussian(g) => {
                let d = g.mean.len();
                let big_m_p =
                    g.covariance.trace() + g.mean.iter().map(|m| m * m).sum::<f64>();
                let (m_p, upper) = if d == 1 {
                    (
                        folded_normal_mean(g.mean[0], g.covariance[(0, 0)].sqrt()),
                        false,
                    )
                } else if g.is_isotropic_centered() {
                    (g.covariance[(0, 0)].sqrt() * chi_mean(d), false)
                } else {
                    (big_m_p.sqrt(), true)
                };
                Ok(TargetConstants {
                    lipschitz: 1.0 / g.cov_eig_min,
                    x_star: g.mean.iter().copied().collect(),
                    lambda: 1.0 / g.cov_eig_max,
                    m_p,
                    big_m_p,
                    m_p_is_upper_bound: upper,
                })
            }
            Self::Mixture(m) => {
                let lambda = m.lambda_override.ok_or_else(|| {
                    Error::InvalidSpec(
                        "mixture targets need target.lambda_override (transport-inequality \
                         constant); validate a candidate with t1_sanity_check"
                            .into(),
                    )
                })?;
                let m_p = kahan_sum(
                    m.means
                        .iter()
                        .zip(&m.weights)
                        .map(|(&mu, &w)| w * folded_normal_mean(mu, m.sigma)),
                );
                let big_m_p = kahan_sum(
                    m.means
                        .iter()
                        .zip(&m.weights)
                        .map(|(&mu, &w)| w * (mu * mu + m.sigma2)),
                );
                Ok(TargetConstants {
                    lipschitz: m.certified_lipschitz(),
                    x_star: vec![m.leftmost_score_root()?],
                    lambda,
                    m_p,
                    big_m_p,
                    m_p_is_upper_bound: false,
                })
            }
        }
    }

    /// E_P ||Z - point||. Exact in 1-D (folded normal) and for centered isotropic
    /// Gaussians evaluated at their mean; otherwise seeded Monte Carlo with its standard
    /// error reported.
    pub fn abs_moment_about(&self, point: &[f64]) -> Result<EstimatedMoment> {
        self.check_point(point)?;
        match self {
            Self::Gaussian(g) if g.mean.len() == 1 => Ok(EstimatedMoment::exact(
                folded_normal_mean(g.mean[0] - point[0], g.covariance[(0, 0)].sqrt()),
            )),
            Self::Gaussian(g)
                if g.is_isotropic_centered() && point.iter().all(|&v| v == 0.0) =>
            {
                Ok(EstimatedMoment::exact(
                    g.covariance[(0, 0)].sqrt() * chi_mean(g.mean.len()),
                ))
            }
            Self::Gaussian(_) => self.abs_moment_monte_carlo(point),
            Self::Mixture(m) => Ok(EstimatedMoment::exact(kahan_sum(
                m.means
                    .iter()
                    .zip(&m.weights)
                    .map(|(&mu, &w)| w * folded_normal_mean(mu - point[0], m.sigma)),
            ))),
        }
    }

    fn abs_moment_monte_carlo(&self, point: &[f64]) -> Result<EstimatedMoment> {
        const SAMPLES: usize = 200_000;
        const SEED: u64 = 0x5eed_ab50;
        let ens = self.sample(SAMPLES, SEED)?;
        let mut sum = crate::numeric::KahanSum::new();
        let mut sum_sq = crate::numeric::KahanSum::new();
        for i in 0..SAMPLES {
            let x = ens.position(i);
            let r = x
                .iter()
                .zip(point)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            sum.add(r);
            sum_sq.add(r * r);
        }
        let mean = sum.value() / SAMPLES as f64;
        let var = (sum_sq.value() / SAMPLES as f64 - mean * mean).max(0.0);
        Ok(EstimatedMoment {
            value: mean,
            std_error: Some((var / SAMPLES as f64).sqrt()),
        })
    }

    /// E_P ||Z - point||^2, exact for both families.
    pub fn second_moment_about(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        match self {
            Self::Gaussian(g) => {
                let shift: f64 = g
                    .mean
                    .iter()
                    .zip(point)
                    .map(|(m, p)| (m - p) * (m - p))
                    .sum();
                Ok(g.covariance.trace() + shift)
            }
            Self::Mixture(m) => Ok(kahan_sum(m.means.iter().zip(&m.weights).map(
                |(&mu, &w)| w * ((mu - point[0]) * (mu - point[0]) + m.sigma2),
            ))),
        }
    }

    /// Mean vector of the distribution.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::Gaussian(g) => g.mean.iter().copied().collect(),
            Self::Mixture(m) => {
                vec![kahan_sum(m.means.iter().zip(&m.weights).map(|(&mu, &w)| w * mu))]
            }
        }
    }

    /// Gaussian components as (weight, mean, variance) triples; 1-D targets only.
    fn components_1d(&self) -> Result<Vec<(f64, f64, f64)>> {
        match self {
            Self::Gaussian(g) if g.mean.len() == 1 => {
                Ok(vec![(1.0, g.mean[0], g.covariance[(0, 0)])])
            }
            Self::Mixture(m) => Ok(m
                .weights
                .iter()
                .zip(&m.means)
                .map(|(&w, &mu)| (w, mu, m.sigma2))
                .collect()),
            _ => Err(Error::InvalidSpec(
                "component decomposition is only defined for 1-D targets".into(),
            )),
        }
    }

    /// Mean and standard deviation for 1-D targets (used to size quadrature grids).
    pub fn scalar_moments(&self) -> Result<(f64, f64)> {
        match self {
            Self::Gaussian(g) if g.mean.len() == 1 => {
                Ok((g.mean[0], g.covariance[(0, 0)].sqrt()))
            }
            Self::Mixture(m) => {
                let mean = kahan_sum(m.means.iter().zip(&m.weights).map(|(&mu, &w)| w * mu));
                let var = m.sigma2
                    + kahan_sum(
                        m.means
                            .iter()
                            .zip(&m.weights)
                            .map(|(&mu, &w)| w * (mu - mean) * (mu - mean)),
                    );
                Ok((mean, var.sqrt()))
            }
            _ => Err(Error::InvalidSpec(
                "scalar moments are only defined for 1-D targets".into(),
            )),
        }
    }

    /// KL(self || other): closed form for Gaussian pairs, trapezoid quadrature for 1-D
    /// pairs involving a mixture.
    pub fn kl_to(&self, other: &Target) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        match (self, other) {
            (Self::Gaussian(q), Self::Gaussian(p)) => {
                let d = q.mean.len() as f64;
                let diff = &q.mean - &p.mean;
                let trace = (&p.precision * &q.covariance).trace();
                let quad = (&p.precision * &diff).dot(&diff);
                // log det Sigma_p - log det Sigma_q, recovered from the cached log norms.
                let log_det_ratio = 2.0 * (q.log_norm - p.log_norm);
                Ok(0.5 * (trace + quad - d + log_det_ratio))
            }
            _ if self.dim() == 1 => {
                let (mq, sq) = self.scalar_moments()?;
                let (mp, sp) = other.scalar_moments()?;
                let lo = (mq - 14.0 * sq).min(mp - 14.0 * sp);
                let hi = (mq + 14.0 * sq).max(mp + 14.0 * sp);
                let n = 40_001;
                let nodes: Vec<f64> =
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
                let mut values = Vec::with_capacity(n);
                for &x in &nodes {
                    let lq = self.log_density(&[x])?;
                    let lp = other.log_density(&[x])?;
                    values.push(if lq == f64::NEG_INFINITY {
                        0.0
                    } else {
                        lq.exp() * (lq - lp)
                    });
                }
                Ok(trapezoid_integral(&nodes, &values))
            }
            _ => Err(Error::InvalidSpec(
                "KL is implemented for Gaussian pairs and 1-D targets only".into(),
            )),
        }
    }

    /// Trapezoid residual of E_P[s_p] over [lo, hi]; should vanish for well-specified
    /// targets (the integrand is p', so the integral telescopes to tail mass).
    pub fn score_mean_residual(&self, lo: f64, hi: f64, nodes: usize) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::InvalidSpec(
                "score mean residual is a 1-D diagnostic".into(),
            ));
        }
        let xs: Vec<f64> = (0..nodes)
            .map(|i| lo + (hi - lo) * i as f64 / (nodes - 1) as f64)
            .collect();
        let mut values = Vec::with_capacity(nodes);
        for &x in &xs {
            values.push(self.score(&[x])?[0] * self.log_density(&[x])?.exp());
        }
        Ok(trapezoid_integral(&xs, &values))
    }

    /// Numerical check of a candidate transport-inequality constant lambda:
    /// W1(mu, P) <= sqrt(2 KL(mu || P) / lambda) over a family of 1-D test measures.
    /// Returns the worst slack (min over tests of RHS - LHS); a negative value beyond
    /// roundoff means the candidate is too large.
    pub fn t1_sanity_check(&self, lambda: f64, trials: usize, seed: u64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::InvalidSpec("t1_sanity_check is 1-D only".into()));
        }
        let (mp, sp) = self.scalar_moments()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..trials.max(1) {
            let shift: f64 = rng.random_range(-3.0..3.0);
            let scale: f64 = rng.random_range(0.5..2.0);
            let test = Target::Gaussian(Gaussian::new(
                vec![mp + shift * sp],
                vec![vec![(scale * sp).powi(2)]],
            )?);
            let kl = test.kl_to(self)?;
            let w1 = w1_quadrature_1d(&test, self)?;
            worst = worst.min((2.0 * kl / lambda).sqrt() - w1);
        }
        Ok(worst)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: self.dim(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target evaluation point"));
        }
        Ok(())
    }
}

/// Coupling moments of two independent distributions: E||X - Z|| and E||X - Z||^2
/// for X from `a` and Z from `b`.
#[derive(Clone, Copy, Debug)]
pub struct CrossMoments {
    pub m: f64,
    /// True when `m` is the Jensen upper bound `sqrt(big_m)` rather than exact.
    pub m_is_upper_bound: bool,
    pub big_m: f64,
}

/// Exact closed forms where available: always for the second moment; for the first
/// moment in 1-D (folded-normal mixture of the difference) and for centered isotropic
/// Gaussian pairs in higher dimension (scaled chi mean). Elsewhere the first moment
/// falls back to the Jensen bound `sqrt(E||X - Z||^2)`, flagged as an upper bound.
pub fn cross_moments(a: &Target, b: &Target) -> Result<CrossMoments> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    let mean_b = b.mean();
    let big_m = a.second_moment_about(&mean_b)? + b.second_moment_about(&b.mean())?;
    if a.dim() == 1 {
        let mut m = KahanSum::new();
        for &(wa, mu_a, var_a) in &a.components_1d()? {
            for &(wb, mu_b, var_b) in &b.components_1d()? {
                m.add(wa * wb * folded_normal_mean(mu_a - mu_b, (var_a + var_b).sqrt()));
            }
        }
        return Ok(CrossMoments { m: m.value(), m_is_upper_bound: false, big_m });
    }
    if let (Target::Gaussian(ga), Target::Gaussian(gb)) = (a, b) {
        let diff_cov = &ga.covariance + &gb.covariance;
        let s = diff_cov[(0, 0)];
        let d = ga.mean.len();
        let centered = ga.mean == gb.mean;
        let isotropic = (0..d).all(|i| {
            (0..d).all(|j| {
                let want = if i == j { s } else { 0.0 };
                (diff_cov[(i, j)] - want).abs() <= 1e-12 * s.max(1.0)
            })
        });
        if centered && isotropic {
            return Ok(CrossMoments {
                m: s.sqrt() * chi_mean(d),
                m_is_upper_bound: false,
                big_m,
            });
        }
    }
    Ok(CrossMoments { m: big_m.sqrt(), m_is_upper_bound: true, big_m })
}

/// W1 between two 1-D targets via the CDF-difference integral, on a wide trapezoid grid.
fn w1_quadrature_1d(a: &Target, b: &Target) -> Result<f64> {
    let (ma, sa) = a.scalar_moments()?;
    let (mb, sb) = b.scalar_moments()?;
    let lo = (ma - 14.0 * sa).min(mb - 14.0 * sb);
    let hi = (ma + 14.0 * sa).max(mb + 14.0 * sb);
    let n = 40_001;
    let nodes: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let h = (hi - lo) / (n - 1) as f64;
    let (mut cdf_a, mut cdf_b) = (0.0, 0.0);
    let mut prev: Option<(f64, f64)> = None;
    let mut w1 = crate::numeric::KahanSum::new();
    for &x in &nodes {
        let pa = a.log_density(&[x])?.exp();
        let pb = b.log_density(&[x])?.exp();
        if let Some((qa, qb)) = prev {
            cdf_a += 0.5 * (qa + pa) * h;
            cdf_b += 0.5 * (qb + pb) * h;
            w1.add((cdf_a - cdf_b).abs() * h);
        }
        prev = Some((pa, pb));
    }
    Ok(w1.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn std_normal() -> Target {
        TargetSpec::standard_normal(1).build().unwrap()
    }

    fn n04() -> Target {
        TargetSpec::gaussian_1d(0.0, 4.0).build().unwrap()
    }

    #[test]
    fn standard_normal_point_values() {
        let p = std_normal();
        assert_relative_eq!(p.score(&[1.0]).unwrap()[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(p.score(&[-2.5]).unwrap()[0], 2.5, epsilon = 1e-15);
        assert_relative_eq!(p.log_density(&[0.0]).unwrap(), -0.5 * LN_2PI, epsilon = 1e-15);
        assert_relative_eq!(
            p.log_density(&[1.0]).unwrap(),
            -0.5 * LN_2PI - 0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn standard_normal_constants() {
        let c = std_normal().target_constants().unwrap();
        assert_eq!(c.lipschitz, 1.0);
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.x_star, vec![0.0]);
        assert_relative_eq!(c.m_p, (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-15);
        assert_eq!(c.big_m_p, 1.0);
        assert!(!c.m_p_is_upper_bound);
    }

    #[test]
    fn wide_gaussian_constants() {
        let c = n04().target_constants().unwrap();
        assert_relative_eq!(c.lipschitz, 0.25, epsilon = 1e-14);
        assert_relative_eq!(c.lambda, 0.25, epsilon = 1e-14);
        assert_relative_eq!(
            c.m_p,
            2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(c.big_m_p, 4.0, epsilon = 1e-15);
    }

    #[test]
    fn isotropic_3d_mean_norm() {
        let c = TargetSpec::standard_normal(3).build().unwrap().target_constants().unwrap();
        assert_relative_eq!(
            c.m_p,
            2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-14
        );
        assert_eq!(c.big_m_p, 3.0);
        assert!(!c.m_p_is_upper_bound);
    }

    #[test]
    fn cross_moments_closed_forms() {
        // N(0,4) vs N(0,1): X - Z ~ N(0, 5).
        let cm = cross_moments(&n04(), &std_normal()).unwrap();
        assert!(!cm.m_is_upper_bound);
        assert_relative_eq!(cm.big_m, 5.0, epsilon = 1e-14);
        assert_relative_eq!(
            cm.m,
            5.0f64.sqrt() * (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-14
        );
        // Shifted pair in 1-D stays exact: X - Z ~ N(2, 2).
        let shifted = TargetSpec::gaussian_1d(2.0, 1.0).build().unwrap();
        let cm = cross_moments(&shifted, &std_normal()).unwrap();
        assert!(!cm.m_is_upper_bound);
        assert_relative_eq!(cm.m, folded_normal_mean(2.0, 2.0f64.sqrt()), epsilon = 1e-14);
        assert_relative_eq!(cm.big_m, 6.0, epsilon = 1e-14);
        // Centered isotropic 3-D pair: chi mean of N(0, 2 I_3).
        let p3 = TargetSpec::standard_normal(3).build().unwrap();
        let cm = cross_moments(&p3, &p3).unwrap();
        assert!(!cm.m_is_upper_bound);
        assert_relative_eq!(cm.m, 2.0f64.sqrt() * chi_mean(3), epsilon = 1e-14);
        // Anisotropic pair falls back to the flagged Jensen bound.
        let aniso = TargetSpec::Gaussian {
            mean: vec![0.0, 0.0],
            covariance: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
        }
        .build()
        .unwrap();
        let cm = cross_moments(&aniso, &aniso).unwrap();
        assert!(cm.m_is_upper_bound);
        assert_relative_eq!(cm.m, cm.big_m.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn correlated_gaussian_constants_are_eigenvalues() {
        let t = TargetSpec::Gaussian {
            mean: vec![1.0, -1.0],
            covariance: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
        }
        .build()
        .unwrap();
        let c = t.target_constants().unwrap();
        // Covariance eigenvalues: (3 +/- sqrt(2)) / 2.
        let lo = (3.0 - 2.0f64.sqrt()) / 2.0;
        let hi = (3.0 + 2.0f64.sqrt()) / 2.0;
        assert_relative_eq!(c.lipschitz, 1.0 / lo, epsilon = 1e-12);
        assert_relative_eq!(c.lambda, 1.0 / hi, epsilon = 1e-12);
        assert!(c.m_p_is_upper_bound);
        assert_relative_eq!(c.m_p, (3.0f64 + 2.0).sqrt(), epsilon = 1e-12);
        // Score is exactly -Sigma^{-1}(x - mean).
        let s = t.score(&[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_log_density_integrates_to_one() {
        let t = n04();
        let n = 20_001;
        let nodes: Vec<f64> = (0..n).map(|i| -28.0 + 56.0 * i as f64 / (n - 1) as f64).collect();
        let vals: Vec<f64> = nodes.iter().map(|&x| t.log_density(&[x]).unwrap().exp()).collect();
        assert_relative_eq!(trapezoid_integral(&nodes, &vals), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_seeded_and_deterministic() {
        let t = n04();
        let a = t.sample(32, 7).unwrap();
        let b = t.sample(32, 7).unwrap();
        let c = t.sample(32, 8).unwrap();
        assert_eq!(a.positions(), b.positions());
        assert_ne!(a.positions(), c.positions());
        assert_eq!(a.n(), 32);
        assert_relative_eq!(a.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sample_moments_match_target() {
        let t = n04();
        let ens = t.sample(200_000, 42).unwrap();
        let mean = ens.positions().iter().sum::<f64>() / 200_000.0;
        let var = ens.positions().iter().map(|x| x * x).sum::<f64>() / 200_000.0 - mean * mean;
        // 3-sigma Monte Carlo tolerances.
        assert_abs_diff_eq!(mean, 0.0, epsilon = 3.0 * 2.0 / (200_000.0f64).sqrt());
        assert_abs_diff_eq!(var, 4.0, epsilon = 3.0 * 4.0 * (2.0f64 / 200_000.0).sqrt());
    }

    fn bimodal(lambda: Option<f64>) -> Target {
        Target::Mixture(Mixture1d::new(vec![-1.5, 1.5], vec![0.5, 0.5], 1.0, lambda).unwrap())
    }

    #[test]
    fn mixture_density_and_score_match_direct_formulas() {
        let m = bimodal(Some(0.1));
        // Direct density at x = 0.3.
        let x = 0.3f64;
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let p = 0.5 * phi(x + 1.5) + 0.5 * phi(x - 1.5);
        assert_relative_eq!(m.log_density(&[x]).unwrap(), p.ln(), epsilon = 1e-12);
        // Score = p'/p with p' = -0.5 (x+1.5) phi(x+1.5) - 0.5 (x-1.5) phi(x-1.5).
        let dp = -0.5 * (x + 1.5) * phi(x + 1.5) - 0.5 * (x - 1.5) * phi(x - 1.5);
        assert_relative_eq!(m.score(&[x]).unwrap()[0], dp / p, epsilon = 1e-12);
    }

    #[test]
    fn mixture_score_is_stable_in_far_tails() {
        let m = bimodal(Some(0.1));
        let s = m.score(&[60.0]).unwrap()[0];
        // Far right the mixture looks like N(1.5, 1): score ~ -(x - 1.5).
        assert_relative_eq!(s, -(60.0 - 1.5), epsilon = 1e-9);
        assert!(m.score(&[-60.0]).unwrap()[0].is_finite());
    }

    #[test]
    fn mixture_constants() {
        let m = bimodal(Some(0.1));
        let c = m.target_constants().unwrap();
        // Symmetric bimodal mixture: score vanishes at 0 and the leftmost root is the
        // left mode's neighborhood only when modes separate; with sigma = 1 and means
        // +/- 1.5 the score has three roots; the leftmost lies near the left mode.
        assert!(c.x_star[0] < 0.0);
        assert_abs_diff_eq!(m.score(&[c.x_star[0]]).unwrap()[0], 0.0, epsilon = 1e-9);
        assert_eq!(c.lambda, 0.1);
        // L certified above the analytic sup and below the crude global bound.
        let grid_sup = (0..200_001)
            .map(|i| -13.5 + 27.0 * i as f64 / 200_000.0)
            .map(|x| match &m {
                Target::Mixture(mm) => mm.score_derivative(x).abs(),
                _ => unreachable!(),
            })
            .fold(0.0, f64::max);
        assert!(c.lipschitz >= grid_sup);
        assert!(c.lipschitz <= 1.0 + 9.0 + 1e-9, "global tail bound");
        // m_P, M_P closed forms.
        assert_relative_eq!(c.m_p, folded_normal_mean(1.5, 1.0), epsilon = 1e-12);
        assert_relative_eq!(c.big_m_p, 1.5 * 1.5 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mixture_without_lambda_is_rejected_with_guidance() {
        let err = bimodal(None).target_constants().unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
        assert!(err.to_string().contains("lambda_override"));
    }

    #[test]
    fn mixture_lambda_sanity_check_accepts_small_rejects_huge() {
        let m = bimodal(Some(0.1));
        assert!(m.t1_sanity_check(0.1, 20, 11).unwrap() > 0.0);
        assert!(m.t1_sanity_check(50.0, 20, 11).unwrap() < 0.0);
    }

    #[test]
    fn score_mean_residual_vanishes() {
        assert_abs_diff_eq!(
            std_normal().score_mean_residual(-10.0, 10.0, 100_001).unwrap(),
            0.0,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            bimodal(Some(0.1)).score_mean_residual(-14.0, 14.0, 100_001).unwrap(),
            0.0,
            epsilon = 1e-8
        );
    }

    #[test]
    fn kl_closed_form_matches_known_value() {
        // KL(N(0,4) || N(0,1)) = (4 - 1 - ln 4) / 2.
        let kl = n04().kl_to(&std_normal()).unwrap();
        assert_relative_eq!(kl, 0.5 * (3.0 - 4.0f64.ln()), epsilon = 1e-12);
        // Quadrature route agrees for a mixture-vs-gaussian pair.
        let m = bimodal(Some(0.1));
        let kl_quad = m.kl_to(&std_normal()).unwrap();
        assert!(kl_quad > 0.0);
        // Same-distribution KL vanishes.
        assert_abs_diff_eq!(n04().kl_to(&n04()).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn abs_moment_about_known_values() {
        let p = std_normal();
        assert_relative_eq!(
            p.abs_moment_about(&[0.0]).unwrap().value,
            (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-14
        );
        // Monte Carlo fallback stays within 4 standard errors of the 1-D closed form.
        let aniso = TargetSpec::Gaussian {
            mean: vec![0.5, 0.0],
            covariance: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        }
        .build()
        .unwrap();
        let est = aniso.abs_moment_about(&[0.0, 0.0]).unwrap();
        let se = est.std_error.unwrap();
        assert!(se > 0.0 && se < 0.01);
    }

    #[test]
    fn invalid_gaussians_are_rejected() {
        assert!(Gaussian::new(vec![0.0], vec![vec![0.0]]).is_err());
        assert!(Gaussian::new(vec![0.0], vec![vec![-1.0]]).is_err());
        assert!(Gaussian::new(vec![0.0, 0.0], vec![vec![1.0, 0.9], vec![0.1, 1.0]]).is_err());
        assert!(Gaussian::new(vec![], vec![]).is_err());
    }

    #[test]
    fn invalid_mixtures_are_rejected() {
        assert!(Mixture1d::new(vec![0.0], vec![0.5], 1.0, None).is_err());
        assert!(Mixture1d::new(vec![0.0, 1.0], vec![0.5, 0.5], 0.0, None).is_err());
        assert!(Mixture1d::new(vec![0.0, 1.0], vec![0.7, 0.5], 1.0, None).is_err());
        assert!(Mixture1d::new(vec![0.0, 1.0], vec![1.2, -0.2], 1.0, None).is_err());
        assert!(Mixture1d::new(vec![0.0, 1.0], vec![0.5, 0.5], 1.0, Some(-1.0)).is_err());
    }

    #[test]
    fn serde_round_trip_uses_spec_keys() {
        let json = r#"{"family":"gaussian","mean":[0.0],"covariance":[[4.0]]}"#;
        let spec: TargetSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, TargetSpec::gaussian_1d(0.0, 4.0));
        let json = r#"{"family":"gaussian_mixture","mean":[-1.5,1.5],"weights":[0.5,0.5],"sigma2":1.0,"lambda_override":0.1}"#;
        let spec: TargetSpec = serde_json::from_str(json).unwrap();
        assert!(spec.build().is_ok());
    }
}
