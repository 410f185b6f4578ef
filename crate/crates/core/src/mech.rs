//! Mechanisms whose output the adversary observes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dist::ProductDistribution;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;

/// A validated mechanism for data of a known dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismSpec {
    /// Exact column means.
    EmpiricalMean,
    /// Column means plus `N(0, diag γ²) / √n`.
    NoisyMean { gamma: Vec<f64> },
    /// Exact mean of `k_n = round(ρ n)` rows drawn without replacement.
    SubsampledMean { rho: f64 },
}

impl MechanismSpec {
    pub fn noisy(gamma: Vec<f64>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid("gamma", format!("noise std {g} must be finite and ≥ 0")));
        }
        Ok(MechanismSpec::NoisyMean { gamma })
    }

    pub fn subsampled(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::invalid("rho", format!("{rho} must lie in (0, 1]")));
        }
        Ok(MechanismSpec::SubsampledMean { rho })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MechanismSpec::EmpiricalMean => "empirical_mean",
            MechanismSpec::NoisyMean { .. } => "noisy_mean",
            MechanismSpec::SubsampledMean { .. } => "subsampled_mean",
        }
    }

    /// Checks the mechanism against a data dimension and dataset size.
    pub fn validate(&self, d: usize, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("n", "dataset needs at least one row"));
        }
        match self {
            MechanismSpec::EmpiricalMean => Ok(()),
            MechanismSpec::NoisyMean { gamma } => check_dim(d, gamma.len()),
            MechanismSpec::SubsampledMean { rho } => subsample_size(*rho, n).map(|_| ()),
        }
    }

    /// Releases the mechanism output on dataset `data` (rows are records).
    pub fn apply<R: Rng + ?Sized>(&self, data: &Matrix, rng: &mut R) -> Result<Vec<f64>> {
        let (n, d) = (data.rows(), data.cols());
        self.validate(d, n)?;
        match self {
            MechanismSpec::EmpiricalMean => Ok(data.column_means()),
            MechanismSpec::NoisyMean { gamma } => {
                let mut out = data.column_means();
                add_noise(&mut out, gamma, n, rng);
                Ok(out)
            }
            MechanismSpec::SubsampledMean { rho } => {
                let k = subsample_size(*rho, n)?;
                let chosen = partial_shuffle(n, k, rng);
                let mut out = vec![0.0; d];
                for &i in &chosen {
                    for (o, v) in out.iter_mut().zip(data.row(i)) {
                        *o += v;
                    }
                }
                out.iter_mut().for_each(|o| *o /= k as f64);
                Ok(out)
            }
        }
    }

    /// Draws an output with the same law as `apply` on `n` i.i.d. rows of
    /// `dist`, one uniformly chosen row replaced by `inserted` when given,
    /// without materialising the dataset. Column sums are drawn from their
    /// exact binomial / Gaussian laws.
    pub fn sample_output<R: Rng + ?Sized>(
        &self,
        dist: &ProductDistribution,
        n: usize,
        inserted: Option<&[f64]>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let d = dist.dim();
        self.validate(d, n)?;
        if let Some(z) = inserted {
            check_dim(d, z.len())?;
        }
        let mean_of = |rows: usize, with_target: bool, rng: &mut R| -> Vec<f64> {
            let fresh = rows - usize::from(with_target);
            let mut sums = dist.sample_column_sums(fresh as u64, rng);
            if with_target {
                for (s, zj) in sums.iter_mut().zip(inserted.unwrap()) {
                    *s += zj;
                }
            }
            sums.iter_mut().for_each(|s| *s /= rows as f64);
            sums
        };
        match self {
            MechanismSpec::EmpiricalMean => Ok(mean_of(n, inserted.is_some(), rng)),
            MechanismSpec::NoisyMean { gamma } => {
                let mut out = mean_of(n, inserted.is_some(), rng);
                add_noise(&mut out, gamma, n, rng);
                Ok(out)
            }
            MechanismSpec::SubsampledMean { rho } => {
                let k = subsample_size(*rho, n)?;
                // The replaced row sits at a uniform position; a uniform
                // permutation keeps it with probability k / n.
                let kept = inserted.is_some() && rng.random_range(0..n) < k;
                Ok(mean_of(k, kept, rng))
            }
        }
    }
}

/// `k_n = round(ρ n)`, floored at 1.
pub fn subsample_size(rho: f64, n: usize) -> Result<usize> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid("rho", format!("{rho} must lie in (0, 1]")));
    }
    let k = ((rho * n as f64).round() as usize).clamp(1, n.max(1));
    if n == 0 {
        return Err(Error::invalid("k_n", "sub-sample would be empty"));
    }
    Ok(k)
}

fn add_noise<R: Rng + ?Sized>(out: &mut [f64], gamma: &[f64], n: usize, rng: &mut R) {
    let scale = 1.0 / (n as f64).sqrt();
    for (o, g) in out.iter_mut().zip(gamma) {
        let e: f64 = rng.sample(StandardNormal);
        *o += scale * g * e;
    }
}

/// First `k` entries of a uniformly random permutation of `0..n`
/// (partial Fisher–Yates).
pub fn partial_shuffle<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Serialised mechanism description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum MechanismConfig {
    EmpiricalMean,
    NoisyMean {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma_scalar: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<Vec<f64>>,
    },
    SubsampledMean {
        rho: f64,
    },
}

impl MechanismConfig {
    /// Resolves against data dimension `d` (broadcasting a scalar γ).
    pub fn resolve(&self, d: usize) -> Result<MechanismSpec> {
        match self {
            MechanismConfig::EmpiricalMean => Ok(MechanismSpec::EmpiricalMean),
            MechanismConfig::NoisyMean { gamma_scalar, gamma } => match (gamma_scalar, gamma) {
                (Some(g), None) => MechanismSpec::noisy(vec![*g; d]),
                (None, Some(v)) => {
                    check_dim(d, v.len())?;
                    MechanismSpec::noisy(v.clone())
                }
                _ => Err(Error::invalid(
                    "gamma",
                    "noisy_mean needs exactly one of `gamma_scalar` or `gamma`",
                )),
            },
            MechanismConfig::SubsampledMean { rho } => MechanismSpec::subsampled(*rho),
        }
    }
}
