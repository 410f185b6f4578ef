//! Column-wise independent data-generating distributions.
//!
//! Both supported laws have finite moments of every order, so the moment
//! conditions behind the asymptotic leakage formulas always hold; there is
//! no runtime check for them.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::rng::StreamFactory;

/// Law of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ColumnLaw {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, var: f64 },
}

impl ColumnLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            ColumnLaw::Bernoulli { p } if !(p > 0.0 && p < 1.0) => Err(Error::invalid(
                "p",
                format!("Bernoulli parameter {p} must lie strictly inside (0, 1)"),
            )),
            ColumnLaw::Gaussian { mean, var } if !(var > 0.0 && var.is_finite() && mean.is_finite()) => {
                Err(Error::invalid(
                    "var",
                    format!("Gaussian column needs finite mean and var > 0, got ({mean}, {var})"),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ColumnLaw::Bernoulli { p } => p,
            ColumnLaw::Gaussian { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ColumnLaw::Bernoulli { p } => p * (1.0 - p),
            ColumnLaw::Gaussian { var, .. } => var,
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ColumnLaw::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            ColumnLaw::Gaussian { mean, var } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + var.sqrt() * z
            }
        }
    }

    /// Sum of `count` i.i.d. draws, sampled directly from its exact law.
    fn sample_sum<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> f64 {
        if count == 0 {
            return 0.0;
        }
        match *self {
            ColumnLaw::Bernoulli { p } => Binomial::new(count, p)
                .expect("p validated at construction")
                .sample(rng) as f64,
            ColumnLaw::Gaussian { mean, var } => {
                let c = count as f64;
                Normal::new(c * mean, (c * var).sqrt())
                    .expect("var validated at construction")
                    .sample(rng)
            }
        }
    }
}

/// A product of independent column laws.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDistribution {
    columns: Vec<ColumnLaw>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl ProductDistribution {
    pub fn new(columns: Vec<ColumnLaw>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("columns", "need at least one column"));
        }
        for c in &columns {
            c.validate()?;
        }
        let mean = columns.iter().map(ColumnLaw::mean).collect();
        let var = columns.iter().map(ColumnLaw::variance).collect();
        Ok(Self { columns, mean, var })
    }

    /// Bernoulli columns with the given parameters.
    pub fn bernoulli(ps: &[f64]) -> Result<Self> {
        Self::new(ps.iter().map(|&p| ColumnLaw::Bernoulli { p }).collect())
    }

    /// `d` Bernoulli columns with `p_j ~ U[a, 1 − a]`, drawn from `seed`.
    pub fn bernoulli_uniform(d: usize, a: f64, seed: u64) -> Result<Self> {
        if !(a > 0.0 && a <= 0.5) {
            return Err(Error::invalid("a", format!("{a} must lie in (0, 1/2]")));
        }
        let mut rng = StreamFactory::new(seed, "bernoulli_uniform").stream(0);
        let ps: Vec<f64> = (0..d)
            .map(|_| if a == 0.5 { 0.5 } else { rng.random_range(a..1.0 - a) })
            .collect();
        Self::bernoulli(&ps)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnLaw] {
        &self.columns
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.var
    }

    /// `(μ, σ²)` per column.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        (self.mean.clone(), self.var.clone())
    }

    pub fn all_bernoulli(&self) -> bool {
        self.columns
            .iter()
            .all(|c| matches!(c, ColumnLaw::Bernoulli { .. }))
    }

    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.columns.iter().map(|c| c.sample(rng)).collect()
    }

    pub fn sample_row_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.columns) {
            *o = c.sample(rng);
        }
    }

    /// `n` i.i.d. rows.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Matrix> {
        if n == 0 {
            return Err(Error::invalid("n", "dataset needs at least one row"));
        }
        let mut m = Matrix::zeros(n, self.dim());
        for i in 0..n {
            self.sample_row_into(rng, m.row_mut(i));
        }
        Ok(m)
    }

    /// Column sums of `count` i.i.d. rows, drawn from their exact laws
    /// (binomial / Gaussian) without materialising the rows.
    pub fn sample_column_sums<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> Vec<f64> {
        self.columns.iter().map(|c| c.sample_sum(count, rng)).collect()
    }

    /// `Σ_j (z_j − μ_j)² / σ_j²`.
    pub fn mahalanobis2(&self, z: &TargetPoint) -> Result<f64> {
        check_dim(self.dim(), z.dim())?;
        Ok(z
            .as_slice()
            .iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((zj, m), v)| (zj - m).powi(2) / v)
            .sum())
    }

    /// Leakage score `m⋆ = mahalanobis2 / n`.
    pub fn leakage_score(&self, z: &TargetPoint, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        Ok(self.mahalanobis2(z)? / n as f64)
    }

    /// The binary points farthest from and closest to `p`:
    /// `z_easy = 1{p_j ≤ 1/2}` and `z_hard = 1{p_j > 1/2}`.
    pub fn make_extreme_targets(&self) -> Result<(TargetPoint, TargetPoint)> {
        let mut easy = Vec::with_capacity(self.dim());
        let mut hard = Vec::with_capacity(self.dim());
        for c in &self.columns {
            match *c {
                ColumnLaw::Bernoulli { p } => {
                    let e = if p <= 0.5 { 1.0 } else { 0.0 };
                    easy.push(e);
                    hard.push(1.0 - e);
                }
                ColumnLaw::Gaussian { .. } => {
                    return Err(Error::invalid(
                        "columns",
                        "extreme targets are defined for Bernoulli columns only",
                    ))
                }
            }
        }
        Ok((TargetPoint::new(easy), TargetPoint::new(hard)))
    }
}

/// A fixed target record `z⋆`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetPoint(Vec<f64>);

impl TargetPoint {
    pub fn new(z: Vec<f64>) -> Self {
        Self(z)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for TargetPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Serialised form of a distribution: explicit columns or a generated family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionSpec {
    Generated(GeneratedDistribution),
    Columns { columns: Vec<ColumnLaw> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum GeneratedDistribution {
    BernoulliUniform { d: usize, a: f64, seed: u64 },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<ProductDistribution> {
        match self {
            DistributionSpec::Columns { columns } => ProductDistribution::new(columns.clone()),
            DistributionSpec::Generated(GeneratedDistribution::BernoulliUniform { d, a, seed }) => {
                ProductDistribution::bernoulli_uniform(*d, *a, *seed)
            }
        }
    }
}
