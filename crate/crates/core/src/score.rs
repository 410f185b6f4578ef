//! Attack scores `s(o; z⋆)` thresholded by membership adversaries.
//!
//! All LR-type scores are oriented so that larger values favour "the target
//! was in the dataset". Impossible outcomes under the membership hypothesis
//! map to `-inf` rather than an error so that ROC sweeps still work.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{ProductDistribution, TargetPoint};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::mech::{subsample_size, MechanismSpec};

/// True per-column moments known to an oracle adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMoments {
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

impl OracleMoments {
    pub fn new(mu: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        check_dim(mu.len(), sigma2.len())?;
        if let Some(v) = sigma2.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::invalid("sigma2", format!("variance {v} must be positive")));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn of(dist: &ProductDistribution) -> Self {
        let (mu, sigma2) = dist.moments();
        Self { mu, sigma2 }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// How the reference covariance is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceEstimate {
    /// Diagonal entries (ridge already added).
    Diagonal(Vec<f64>),
    /// Cholesky factor of the full matrix (ridge already added).
    Full(Cholesky),
}

/// Ridge added to the reference covariance before factorisation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ridge {
    /// `1e-6 · trace(Ĉ₀) / d`.
    #[default]
    Default,
    Fixed(f64),
}

impl Ridge {
    fn value(self, trace: f64, d: usize) -> Result<f64> {
        match self {
            Ridge::Default => Ok(1e-6 * trace / d as f64),
            Ridge::Fixed(r) if r >= 0.0 && r.is_finite() => Ok(r),
            Ridge::Fixed(r) => Err(Error::invalid("ridge", format!("{r} must be finite and ≥ 0"))),
        }
    }
}

/// Unfactorised covariance input for [`ReferenceEstimates::new`].
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceInput {
    Diagonal(Vec<f64>),
    Full(SquareMatrix),
}

/// Adversary-side estimates `(μ̂₀, Ĉ₀)` from `n0` reference points. The
/// factorisation is computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEstimates {
    mu0: Vec<f64>,
    cov: CovarianceEstimate,
    n0: usize,
    ridge: f64,
}

impl ReferenceEstimates {
    pub fn new(mu0: Vec<f64>, cov: CovarianceInput, n0: usize, ridge: Ridge) -> Result<Self> {
        let d = mu0.len();
        let (cov, ridge) = match cov {
            CovarianceInput::Diagonal(mut diag) => {
                check_dim(d, diag.len())?;
                let r = ridge.value(diag.iter().sum(), d)?;
                diag.iter_mut().for_each(|v| *v += r);
                if let Some((i, &v)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                    return Err(Error::NotPositiveDefinite {
                        index: i,
                        pivot: v,
                        ridge: r,
                        min_eigenvalue: diag.iter().copied().fold(f64::INFINITY, f64::min),
                    });
                }
                (CovarianceEstimate::Diagonal(diag), r)
            }
            CovarianceInput::Full(m) => {
                check_dim(d, m.dim())?;
                if !m.is_symmetric(1e-12) {
                    return Err(Error::invalid("c0", "reference covariance is not symmetric"));
                }
                let r = ridge.value(m.trace(), d)?;
                (CovarianceEstimate::Full(Cholesky::factor_with_ridge(&m, r)?), r)
            }
        };
        Ok(Self { mu0, cov, n0, ridge })
    }

    /// Exact moments injected as reference estimates (no ridge).
    pub fn exact(om: &OracleMoments) -> Self {
        Self {
            mu0: om.mu.clone(),
            cov: CovarianceEstimate::Diagonal(om.sigma2.clone()),
            n0: usize::MAX,
            ridge: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn covariance(&self) -> &CovarianceEstimate {
        &self.cov
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// `vᵀ Ĉ₀⁻¹ v`.
    pub fn inv_quad(&self, v: &[f64]) -> f64 {
        match &self.cov {
            CovarianceEstimate::Diagonal(c) => v.iter().zip(c).map(|(x, c)| x * x / c).sum(),
            CovarianceEstimate::Full(ch) => ch.inv_quad(v),
        }
    }

    /// `aᵀ Ĉ₀⁻¹ b`.
    pub fn inv_bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.cov {
            CovarianceEstimate::Diagonal(c) => a.iter().zip(b).zip(c).map(|((x, y), c)| x * y / c).sum(),
            CovarianceEstimate::Full(ch) => ch.inv_bilinear(a, b),
        }
    }

    /// `Ĉ₀⁻¹ v`.
    pub fn precision_apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.cov {
            CovarianceEstimate::Diagonal(c) => v.iter().zip(c).map(|(x, c)| x / c).collect(),
            CovarianceEstimate::Full(ch) => ch.solve(v),
        }
    }
}

/// `Σ_j (z_j − c_j)(μ̂_j − c_j)/v_j − (1/2n) Σ_j (z_j − c_j)²/v_j`, the
/// diagonal-precision LR kernel shared by the oracle and estimated scores.
fn diagonal_lr(mu_hat: &[f64], z: &[f64], center: &[f64], var: &[f64], n: usize) -> f64 {
    let mut cross = 0.0;
    let mut quad = 0.0;
    for j in 0..z.len() {
        let dz = z[j] - center[j];
        cross += dz * (mu_hat[j] - center[j]) / var[j];
        quad += dz * dz / var[j];
    }
    cross - quad / (2.0 * n as f64)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("n", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// Exact log-likelihood ratio for Bernoulli columns:
/// `Σ_j z_j log(μ̂_j/μ_j) + (1 − z_j) log((1 − μ̂_j)/(1 − μ_j))`.
pub fn lr_exact_bernoulli(mu_hat: &[f64], z: &TargetPoint, mu: &[f64]) -> Result<f64> {
    let z = z.as_slice();
    check_dim(mu.len(), z.len())?;
    check_dim(mu.len(), mu_hat.len())?;
    let mut total = 0.0;
    for j in 0..z.len() {
        let (m, h) = (mu[j], mu_hat[j]);
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::invalid("mu", format!("coordinate {j} = {m} is not inside (0, 1)")));
        }
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::invalid("mu_hat", format!("coordinate {j} = {h} is not in [0, 1]")));
        }
        total += if z[j] == 1.0 {
            (h / m).ln()
        } else if z[j] == 0.0 {
            ((1.0 - h) / (1.0 - m)).ln()
        } else {
            return Err(Error::invalid("z", format!("coordinate {j} = {} is not binary", z[j])));
        };
    }
    Ok(total)
}

/// Asymptotic LR with the true moments:
/// `(z − μ)ᵀ C_σ⁻¹ (μ̂ − μ) − (1/2n) ‖z − μ‖²_{C_σ⁻¹}`.
pub fn lr_asymptotic(mu_hat: &[f64], z: &TargetPoint, om: &OracleMoments, n: usize) -> Result<f64> {
    check_dim(om.dim(), z.dim())?;
    check_dim(om.dim(), mu_hat.len())?;
    check_n(n)?;
    Ok(diagonal_lr(mu_hat, z.as_slice(), &om.mu, &om.sigma2, n))
}

/// The covariance score: the asymptotic LR with `(μ, C_σ)` replaced by
/// reference estimates `(μ̂₀, Ĉ₀)`.
pub fn lr_empirical_cov(
    mu_hat: &[f64],
    z: &TargetPoint,
    refs: &ReferenceEstimates,
    n: usize,
) -> Result<f64> {
    check_dim(refs.dim(), z.dim())?;
    check_dim(refs.dim(), mu_hat.len())?;
    check_n(n)?;
    match &refs.cov {
        CovarianceEstimate::Diagonal(c) => Ok(diagonal_lr(mu_hat, z.as_slice(), &refs.mu0, c, n)),
        CovarianceEstimate::Full(ch) => {
            let dz: Vec<f64> = z.as_slice().iter().zip(&refs.mu0).map(|(a, b)| a - b).collect();
            let dm: Vec<f64> = mu_hat.iter().zip(&refs.mu0).map(|(a, b)| a - b).collect();
            let wz = ch.solve_lower(&dz);
            let wm = ch.solve_lower(&dm);
            Ok(dot(&wz, &wm) - dot(&wz, &wz) / (2.0 * n as f64))
        }
    }
}

/// Scalar-product score `(z − z_ref)ᵀ μ̂`.
pub fn scalar_product(mu_hat: &[f64], z: &TargetPoint, z_ref: &[f64]) -> Result<f64> {
    check_dim(z.dim(), z_ref.len())?;
    check_dim(z.dim(), mu_hat.len())?;
    Ok(z.as_slice()
        .iter()
        .zip(z_ref)
        .zip(mu_hat)
        .map(|((a, b), m)| (a - b) * m)
        .sum())
}

/// Asymptotic LR for the noisy mean: variances `σ² + γ²`.
pub fn lr_noisy(
    mu_hat: &[f64],
    z: &TargetPoint,
    om: &OracleMoments,
    gamma: &[f64],
    n: usize,
) -> Result<f64> {
    check_dim(om.dim(), gamma.len())?;
    let var: Vec<f64> = om.sigma2.iter().zip(gamma).map(|(s, g)| s + g * g).collect();
    check_dim(om.dim(), z.dim())?;
    check_dim(om.dim(), mu_hat.len())?;
    check_n(n)?;
    Ok(diagonal_lr(mu_hat, z.as_slice(), &om.mu, &var, n))
}

/// Second-order expansion of the sub-sampled LR, summed over columns:
/// `W_j = (ρ/2)(δ_out² − δ_in²) + ρ(1−ρ)/8 · (δ_out² − δ_in²)² + ρ/(2k)`
/// with `k = round(ρ n)`. The third-cumulant correction is not included.
pub fn lr_subsampled(
    mu_hat_sub: &[f64],
    z: &TargetPoint,
    om: &OracleMoments,
    rho: f64,
    n: usize,
) -> Result<f64> {
    check_dim(om.dim(), z.dim())?;
    check_dim(om.dim(), mu_hat_sub.len())?;
    check_n(n)?;
    let k = subsample_size(rho, n)?;
    if k < 2 {
        return Err(Error::invalid("k_n", format!("sub-sample size {k} must be at least 2")));
    }
    let kf = k as f64;
    let out_scale = kf.sqrt();
    let in_scale = kf / (kf - 1.0).sqrt();
    let z = z.as_slice();
    let mut total = 0.0;
    for j in 0..z.len() {
        let sd = om.sigma2[j].sqrt();
        let centred = mu_hat_sub[j] - om.mu[j];
        let d_out = out_scale * centred / sd;
        let d_in = in_scale * (centred + (om.mu[j] - z[j]) / kf) / sd;
        let diff = d_out * d_out - d_in * d_in;
        total += 0.5 * rho * diff + rho * (1.0 - rho) / 8.0 * diff * diff + rho / (2.0 * kf);
    }
    Ok(total)
}

/// The LR test built for `z_targ`, whatever the true target is.
pub fn lr_misspecified(
    mu_hat: &[f64],
    z_targ: &TargetPoint,
    om: &OracleMoments,
    n: usize,
) -> Result<f64> {
    lr_asymptotic(mu_hat, z_targ, om, n)
}

/// Names accepted for score selection.
pub const SCORE_NAMES: [&str; 7] = [
    "lr_exact_bernoulli",
    "lr_asymptotic",
    "lr_empirical_cov",
    "scalar_product",
    "lr_noisy",
    "lr_subsampled",
    "lr_misspecified",
];

/// Covariance representation for estimated reference moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMode {
    #[default]
    Diagonal,
    Full,
}

/// Score selection plus side information, as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreSpec {
    LrExactBernoulli,
    LrAsymptotic,
    LrEmpiricalCov {
        n0: usize,
        #[serde(default)]
        cov_mode: CovMode,
        /// Centre the second moment (`Ĉ₀ = Σ (g − μ̂₀)(g − μ̂₀)ᵀ / n0`)
        /// instead of the raw `Σ g gᵀ / n0`.
        #[serde(default)]
        centered: bool,
        #[serde(default)]
        ridge: Option<f64>,
    },
    ScalarProduct {
        /// Reference point; one fresh draw from the distribution when absent.
        #[serde(default)]
        z_ref: Option<Vec<f64>>,
    },
    LrNoisy {
        /// Per-column noise std; taken from the mechanism when absent.
        #[serde(default)]
        gamma: Option<Vec<f64>>,
    },
    LrSubsampled {
        #[serde(default)]
        rho: Option<f64>,
    },
    LrMisspecified {
        z_targ: Vec<f64>,
    },
}

impl ScoreSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreSpec::LrExactBernoulli => SCORE_NAMES[0],
            ScoreSpec::LrAsymptotic => SCORE_NAMES[1],
            ScoreSpec::LrEmpiricalCov { .. } => SCORE_NAMES[2],
            ScoreSpec::ScalarProduct { .. } => SCORE_NAMES[3],
            ScoreSpec::LrNoisy { .. } => SCORE_NAMES[4],
            ScoreSpec::LrSubsampled { .. } => SCORE_NAMES[5],
            ScoreSpec::LrMisspecified { .. } => SCORE_NAMES[6],
        }
    }
}

/// A score with all side information resolved, ready to evaluate outputs.
#[derive(Debug, Clone)]
pub enum Scorer {
    ExactBernoulli { mu: Vec<f64> },
    Asymptotic { om: OracleMoments, n: usize },
    EmpiricalCov { refs: Arc<ReferenceEstimates>, n: usize },
    Scalar { z_ref: Vec<f64> },
    Noisy { om: OracleMoments, gamma: Vec<f64>, n: usize },
    Subsampled { om: OracleMoments, rho: f64, n: usize },
    Misspecified { om: OracleMoments, z_targ: TargetPoint, n: usize },
}

/// Everything a [`ScoreSpec`] may need to become a [`Scorer`].
pub struct ScoreContext<'a> {
    pub dist: &'a ProductDistribution,
    pub mechanism: &'a MechanismSpec,
    pub n: usize,
    /// Source of reference points (for `lr_empirical_cov` and a default
    /// `scalar_product` reference).
    pub reference_rng: &'a mut crate::rng::StreamRng,
}

impl Scorer {
    pub fn resolve(spec: &ScoreSpec, ctx: ScoreContext<'_>) -> Result<Self> {
        let d = ctx.dist.dim();
        let om = || OracleMoments::of(ctx.dist);
        Ok(match spec {
            ScoreSpec::LrExactBernoulli => {
                if !ctx.dist.all_bernoulli() {
                    return Err(Error::invalid("score", "lr_exact_bernoulli needs Bernoulli columns"));
                }
                Scorer::ExactBernoulli { mu: ctx.dist.mean().to_vec() }
            }
            ScoreSpec::LrAsymptotic => Scorer::Asymptotic { om: om(), n: ctx.n },
            ScoreSpec::LrEmpiricalCov { n0, cov_mode, centered, ridge } => {
                let refs = ctx.dist.sample_dataset(*n0, ctx.reference_rng)?;
                let ridge = ridge.map_or(Ridge::Default, Ridge::Fixed);
                let est = crate::canary::estimate_reference(&refs, *cov_mode, *centered, ridge)?;
                Scorer::EmpiricalCov { refs: Arc::new(est), n: ctx.n }
            }
            ScoreSpec::ScalarProduct { z_ref } => {
                let z_ref = match z_ref {
                    Some(v) => {
                        check_dim(d, v.len())?;
                        v.clone()
                    }
                    None => ctx.dist.sample_row(ctx.reference_rng),
                };
                Scorer::Scalar { z_ref }
            }
            ScoreSpec::LrNoisy { gamma } => {
                let gamma = match (gamma, ctx.mechanism) {
                    (Some(g), _) => g.clone(),
                    (None, MechanismSpec::NoisyMean { gamma }) => gamma.clone(),
                    (None, _) => vec![0.0; d],
                };
                check_dim(d, gamma.len())?;
                Scorer::Noisy { om: om(), gamma, n: ctx.n }
            }
            ScoreSpec::LrSubsampled { rho } => {
                let rho = match (rho, ctx.mechanism) {
                    (Some(r), _) => *r,
                    (None, MechanismSpec::SubsampledMean { rho }) => *rho,
                    (None, _) => 1.0,
                };
                let k = subsample_size(rho, ctx.n)?;
                if k < 2 {
                    return Err(Error::invalid("k_n", format!("sub-sample size {k} must be at least 2")));
                }
                Scorer::Subsampled { om: om(), rho, n: ctx.n }
            }
            ScoreSpec::LrMisspecified { z_targ } => {
                check_dim(d, z_targ.len())?;
                Scorer::Misspecified {
                    om: om(),
                    z_targ: TargetPoint::new(z_targ.clone()),
                    n: ctx.n,
                }
            }
        })
    }

    /// Score of output `o` against target `z`.
    pub fn score(&self, o: &[f64], z: &TargetPoint) -> Result<f64> {
        match self {
            Scorer::ExactBernoulli { mu } => lr_exact_bernoulli(o, z, mu),
            Scorer::Asymptotic { om, n } => lr_asymptotic(o, z, om, *n),
            Scorer::EmpiricalCov { refs, n } => lr_empirical_cov(o, z, refs, *n),
            Scorer::Scalar { z_ref } => scalar_product(o, z, z_ref),
            Scorer::Noisy { om, gamma, n } => lr_noisy(o, z, om, gamma, *n),
            Scorer::Subsampled { om, rho, n } => lr_subsampled(o, z, om, *rho, *n),
            Scorer::Misspecified { om, z_targ, n } => lr_misspecified(o, z_targ, om, *n),
        }
    }

    /// Specialises the scorer to a fixed target, caching the precision
    /// solve of the full-covariance score.
    pub fn for_target<'a>(&'a self, z: &'a TargetPoint) -> Result<TargetScorer<'a>> {
        let cached = match self {
            Scorer::EmpiricalCov { refs, n } if matches!(refs.cov, CovarianceEstimate::Full(_)) => {
                check_dim(refs.dim(), z.dim())?;
                let dz: Vec<f64> = z.as_slice().iter().zip(&refs.mu0).map(|(a, b)| a - b).collect();
                let w = refs.precision_apply(&dz);
                let offset = dot(&w, &refs.mu0) + dot(&dz, &w) / (2.0 * *n as f64);
                Some((w, offset))
            }
            _ => None,
        };
        Ok(TargetScorer { scorer: self, z, cached })
    }
}

/// A [`Scorer`] bound to one target.
pub struct TargetScorer<'a> {
    scorer: &'a Scorer,
    z: &'a TargetPoint,
    cached: Option<(Vec<f64>, f64)>,
}

impl TargetScorer<'_> {
    pub fn score(&self, o: &[f64]) -> Result<f64> {
        match &self.cached {
            Some((w, offset)) => {
                check_dim(w.len(), o.len())?;
                Ok(dot(w, o) - offset)
            }
            None => self.scorer.score(o, self.z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn tp(v: &[f64]) -> TargetPoint {
        TargetPoint::new(v.to_vec())
    }

    fn om(mu: &[f64], var: &[f64]) -> OracleMoments {
        OracleMoments::new(mu.to_vec(), var.to_vec()).unwrap()
    }

    fn log_binom(n: u64, k: u64) -> f64 {
        (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
    }

    /// log P(Bin(n, p) = k), or -inf if impossible.
    fn log_binom_pmf(n: u64, k: i64, p: f64) -> f64 {
        if k < 0 || k as u64 > n {
            return f64::NEG_INFINITY;
        }
        let k = k as u64;
        log_binom(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
    }

    #[test]
    fn exact_lr_values() {
        assert_eq!(lr_exact_bernoulli(&[0.3, 0.6], &tp(&[1.0, 0.0]), &[0.3, 0.6]).unwrap(), 0.0);
        // P(1 + Bin(1,.5) = 2) / P(Bin(2,.5) = 2) = 0.5 / 0.25 = 2
        let oracle = (log_binom_pmf(1, 1, 0.5) - log_binom_pmf(2, 2, 0.5)).exp();
        assert!((oracle - 2.0).abs() < 1e-15);
        assert!((lr_exact_bernoulli(&[1.0], &tp(&[1.0]), &[0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(lr_exact_bernoulli(&[0.0], &tp(&[1.0]), &[0.5]).unwrap(), f64::NEG_INFINITY);
        assert!(lr_exact_bernoulli(&[0.5], &tp(&[0.5]), &[0.5]).is_err());
        assert!(lr_exact_bernoulli(&[0.5], &tp(&[1.0]), &[1.0]).is_err());
        assert!(lr_exact_bernoulli(&[0.5], &tp(&[1.0]), &[0.0]).is_err());
    }

    #[test]
    fn exact_lr_equals_binomial_ratio_exhaustively() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for n in 1..=8u64 {
            for d in 1..=3usize {
                let mu: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
                for zbits in 0..(1u32 << d) {
                    let z: Vec<f64> = (0..d).map(|j| f64::from((zbits >> j) & 1)).collect();
                    let mut counts = vec![0u64; d];
                    loop {
                        let mu_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
                        let oracle: f64 = (0..d)
                            .map(|j| {
                                let s = counts[j] as i64;
                                log_binom_pmf(n - 1, s - z[j] as i64, mu[j])
                                    - log_binom_pmf(n, s, mu[j])
                            })
                            .sum();
                        let got = lr_exact_bernoulli(&mu_hat, &tp(&z), &mu).unwrap();
                        if oracle == f64::NEG_INFINITY {
                            assert_eq!(got, f64::NEG_INFINITY);
                        } else {
                            assert!((got - oracle).abs() <= 1e-12, "n={n} d={d} {got} vs {oracle}");
                        }
                        // next count vector
                        let mut j = 0;
                        while j < d && counts[j] == n {
                            counts[j] = 0;
                            j += 1;
                        }
                        if j == d {
                            break;
                        }
                        counts[j] += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn asymptotic_lr_reductions() {
        let o = om(&[0.2, -1.0, 3.0], &[0.5, 2.0, 1.5]);
        let z = tp(&[1.0, 0.0, 2.0]);
        let n = 13;
        let m2: f64 = [0.8f64, 1.0, -1.0].iter().zip(o.sigma2()).map(|(d, v)| d * d / v).sum();
        let at_mu = lr_asymptotic(o.mu(), &z, &o, n).unwrap();
        assert!((at_mu + m2 / (2.0 * n as f64)).abs() < 1e-15);
        let zm = tp(o.mu());
        assert_eq!(lr_asymptotic(&[5.0, 6.0, 7.0], &zm, &o, n).unwrap(), 0.0);

        let id = om(&[0.0; 3], &[1.0; 3]);
        let mu_hat = [0.4, -0.2, 1.1];
        let expected = dot(z.as_slice(), &mu_hat) - dot(z.as_slice(), z.as_slice()) / (2.0 * n as f64);
        assert!((lr_asymptotic(&mu_hat, &z, &id, n).unwrap() - expected).abs() < 1e-15);
        assert!(lr_asymptotic(&[1.0], &z, &o, n).is_err());
        assert!(lr_asymptotic(&mu_hat, &z, &o, 0).is_err());
    }

    #[test]
    fn empirical_cov_with_exact_moments_is_the_oracle() {
        let o = om(&[0.3, 0.7, 0.5, 0.1], &[0.21, 0.21, 0.25, 0.09]);
        let refs = ReferenceEstimates::exact(&o);
        let inj = ReferenceEstimates::new(
            o.mu().to_vec(),
            CovarianceInput::Diagonal(o.sigma2().to_vec()),
            100,
            Ridge::Fixed(0.0),
        )
        .unwrap();
        let full = ReferenceEstimates::new(
            o.mu().to_vec(),
            CovarianceInput::Full(SquareMatrix::from_diagonal(o.sigma2())),
            100,
            Ridge::Fixed(0.0),
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let mu_hat: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            let z: Vec<f64> = (0..4).map(|_| f64::from(rng.random_range(0..2u8))).collect();
            let z = tp(&z);
            let a = lr_asymptotic(&mu_hat, &z, &o, 50).unwrap();
            assert_eq!(lr_empirical_cov(&mu_hat, &z, &refs, 50).unwrap().to_bits(), a.to_bits());
            assert_eq!(lr_empirical_cov(&mu_hat, &z, &inj, 50).unwrap().to_bits(), a.to_bits());
            let f = lr_empirical_cov(&mu_hat, &z, &full, 50).unwrap();
            assert!((f - a).abs() <= 1e-10 * a.abs().max(1e-300));
            let cached = Scorer::EmpiricalCov { refs: Arc::new(full.clone()), n: 50 };
            let c = cached.for_target(&z).unwrap().score(&mu_hat).unwrap();
            assert!((c - a).abs() <= 1e-10 * a.abs().max(1.0));
        }
        let z0 = tp(o.mu());
        assert_eq!(lr_empirical_cov(&[0.9, 0.1, 0.2, 0.3], &z0, &refs, 9).unwrap(), 0.0);
    }

    #[test]
    fn singular_reference_covariance_is_reported() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let err = ReferenceEstimates::new(vec![0.0; 2], CovarianceInput::Full(m.clone()), 2, Ridge::Fixed(0.0))
            .unwrap_err();
        assert!(err.is_numerical());
        assert!(err.to_string().contains("smallest eigenvalue"));
        assert!(ReferenceEstimates::new(vec![0.0; 2], CovarianceInput::Full(m), 2, Ridge::Default).is_ok());
        let asym = SquareMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(ReferenceEstimates::new(vec![0.0; 2], CovarianceInput::Full(asym), 2, Ridge::Default).is_err());
    }

    #[test]
    fn estimated_cov_score_tracks_oracle() {
        // The gap grows like √d · (1/√n0): μ̂₀ errors add up over coordinates.
        let dist = ProductDistribution::bernoulli_uniform(10, 0.25, 1).unwrap();
        let o = OracleMoments::of(&dist);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let refs_data = dist.sample_dataset(10_000, &mut rng).unwrap();
        let refs = crate::canary::estimate_reference(&refs_data, CovMode::Diagonal, true, Ridge::Default).unwrap();
        let n = 100;
        let mut within = 0;
        for _ in 0..1000 {
            let z = tp(&dist.sample_row(&mut rng));
            let mu_hat = dist.sample_dataset(n, &mut rng).unwrap().column_means();
            let a = lr_asymptotic(&mu_hat, &z, &o, n).unwrap();
            let b = lr_empirical_cov(&mu_hat, &z, &refs, n).unwrap();
            if (a - b).abs() <= 0.1 {
                within += 1;
            }
        }
        assert!(within >= 950, "{within}");
    }

    #[test]
    fn scalar_product_values() {
        assert_eq!(scalar_product(&[0.2, 0.9], &tp(&[1.0, 0.0]), &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(scalar_product(&[0.7, 0.4, 0.1], &tp(&[1.0, 1.0, 0.0]), &[0.0, 1.0, 0.0]).unwrap(), 0.7);
        assert_eq!(scalar_product(&[0.0, 0.5], &tp(&[3.0, 0.0]), &[1.0, 0.0]).unwrap(), 0.0);
        assert!(scalar_product(&[0.0], &tp(&[3.0, 0.0]), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn noisy_lr_values() {
        let o = om(&[0.5, 0.2], &[0.25, 0.16]);
        let z = tp(&[1.0, 0.0]);
        let mu_hat = [0.6, 0.1];
        assert_eq!(
            lr_noisy(&mu_hat, &z, &o, &[0.0, 0.0], 10).unwrap(),
            lr_asymptotic(&mu_hat, &z, &o, 10).unwrap()
        );
        assert!(lr_noisy(&mu_hat, &z, &o, &[1e8, 1e8], 10).unwrap().abs() < 1e-14);
        let one = om(&[0.0], &[1.0]);
        let z1 = tp(&[2.0]);
        let base = lr_asymptotic(&[0.0], &z1, &one, 4).unwrap();
        let half = lr_noisy(&[0.0], &z1, &one, &[1.0], 4).unwrap();
        // −(z−μ)²/(2n(σ²+γ²)) = −4/16
        assert_eq!(half, -0.25);
        assert_eq!(half, base / 2.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn subsampled_lr_at_full_ratio_matches_quadratic_form() {
        let o = om(&[0.4, 0.3], &[0.24, 0.21]);
        let z = tp(&[1.0, 0.0]);
        let n = 50;
        let k = 50.0f64;
        let mu_hat = [0.45, 0.28];
        let mut expected = 0.0;
        for j in 0..2 {
            let sd = o.sigma2()[j].sqrt();
            let c = mu_hat[j] - o.mu()[j];
            let d_out = k.sqrt() * c / sd;
            let d_in = k / (k - 1.0).sqrt() * (c + (o.mu()[j] - z.as_slice()[j]) / k) / sd;
            expected += 0.5 * (d_out * d_out - d_in * d_in) + 1.0 / (2.0 * k);
        }
        let got = lr_subsampled(&mu_hat, &z, &o, 1.0, n).unwrap();
        assert!((got - expected).abs() < 1e-12);
        // and close to the asymptotic LR, up to O(1/k) per column
        let asym = lr_asymptotic(&mu_hat, &z, &o, n).unwrap();
        assert!((got - asym).abs() < 0.1, "{got} vs {asym}");
    }

    #[test]
    fn subsampled_lr_degenerate_target_is_finite() {
        let o = om(&[0.4, 0.3, 0.6], &[0.24, 0.21, 0.24]);
        let z = tp(o.mu());
        let n = 200;
        let rho = 0.5;
        let k = 100.0;
        let v = lr_subsampled(o.mu(), &z, &o, rho, n).unwrap();
        assert!(v.is_finite());
        assert!((v - 3.0 * rho / (2.0 * k)).abs() < 1e-12);
        assert!(lr_subsampled(o.mu(), &z, &o, 0.01, 100).is_err());
    }

    #[test]
    fn misspecified_lr() {
        let o = om(&[0.5, 0.5], &[0.25, 0.25]);
        let z = tp(&[1.0, 0.0]);
        let mu_hat = [0.55, 0.52];
        assert_eq!(
            lr_misspecified(&mu_hat, &z, &o, 20).unwrap(),
            lr_asymptotic(&mu_hat, &z, &o, 20).unwrap()
        );
        assert_eq!(lr_misspecified(&mu_hat, &tp(o.mu()), &o, 20).unwrap(), 0.0);
    }

    #[test]
    fn score_spec_parsing() {
        let s: ScoreSpec = serde_json::from_str(r#"{"name":"lr_asymptotic"}"#).unwrap();
        assert_eq!(s, ScoreSpec::LrAsymptotic);
        let s: ScoreSpec =
            serde_json::from_str(r#"{"name":"lr_empirical_cov","n0":100,"cov_mode":"full"}"#).unwrap();
        assert_eq!(s.name(), "lr_empirical_cov");
        assert!(serde_json::from_str::<ScoreSpec>(r#"{"name":"nope"}"#).is_err());
    }

    proptest! {
        #[test]
        fn oracle_scores_are_scale_invariant(
            cols in prop::collection::vec((-2.0f64..2.0, 0.1f64..3.0, -3.0f64..3.0, -3.0f64..3.0, 0.1f64..10.0), 1..8),
            n in 2usize..200,
        ) {
            let mu: Vec<f64> = cols.iter().map(|c| c.0).collect();
            let var: Vec<f64> = cols.iter().map(|c| c.1).collect();
            let z: Vec<f64> = cols.iter().map(|c| c.2).collect();
            let mh: Vec<f64> = cols.iter().map(|c| c.3).collect();
            let scale: Vec<f64> = cols.iter().map(|c| c.4).collect();
            let base = lr_asymptotic(&mh, &tp(&z), &om(&mu, &var), n).unwrap();
            let s = |v: &[f64]| v.iter().zip(&scale).map(|(a, c)| a * c).collect::<Vec<_>>();
            let var_s: Vec<f64> = var.iter().zip(&scale).map(|(v, c)| v * c * c).collect();
            let scaled = lr_asymptotic(&s(&mh), &tp(&s(&z)), &om(&s(&mu), &var_s), n).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-9 * base.abs().max(1.0));
        }
    }
}
