//! Closed-form leakage, trade-off, threshold and Gaussian-DP formulas.
//!
//! Everything here is a function of an effective leakage score `m` (the
//! squared Mahalanobis distance of the target divided by `n`, possibly
//! contracted by noise or sub-sampling). The optimal membership test then
//! separates `N(-m/2, m)` from `N(m/2, m)`.

use serde::{Deserialize, Serialize};

use crate::dist::{ProductDistribution, TargetPoint};
use crate::error::{check_dim, Error, Result};

/// Number of points on the fixed α-grid used for trade-off curves.
pub const ALPHA_GRID_POINTS: usize = 512;

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn phi_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile. Returns `-inf` at 0 and `+inf` at 1; NaN
/// outside `[0, 1]`.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Newton step on `phi`.
pub fn phi_inv(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    let x = if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    };

    // Newton refinement; on the upper half work with the complement so the
    // residual is not swamped by rounding of values near 1.
    let density = phi_density(x);
    if density == 0.0 {
        return x;
    }
    if p > 0.5 {
        x + (phi(-x) - (1.0 - p)) / density
    } else {
        x - (phi(x) - p) / density
    }
}

/// Advantage of the Bayes-optimal attacker: `Φ(√m/2) − Φ(−√m/2)`.
pub fn theoretical_leakage(m: f64) -> f64 {
    let h = m.max(0.0).sqrt() / 2.0;
    phi(h) - phi(-h)
}

/// Optimal power at significance `alpha`: `Φ(Φ⁻¹(α) + √m)`.
pub fn theoretical_power(m: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} is outside [0, 1]")));
    }
    if m < 0.0 {
        return Err(Error::invalid("m", format!("leakage score {m} is negative")));
    }
    Ok(phi(phi_inv(alpha) + m.sqrt()))
}

/// Threshold on the LR score achieving level `alpha`:
/// `−m/2 + √m Φ⁻¹(1 − α)`.
pub fn optimal_threshold(m: f64, alpha: f64) -> f64 {
    -m / 2.0 + m.sqrt() * phi_inv(1.0 - alpha)
}

/// Noisy leakage score `(1/n) ‖z − μ‖²` in the precision `(C_σ + C_γ)⁻¹`.
pub fn noisy_leakage_score(
    dist: &ProductDistribution,
    z: &TargetPoint,
    gamma: &[f64],
    n: usize,
) -> Result<f64> {
    check_dim(dist.dim(), z.dim())?;
    check_dim(dist.dim(), gamma.len())?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let (mu, var) = dist.moments();
    let m2: f64 = z
        .as_slice()
        .iter()
        .zip(&mu)
        .zip(var.iter().zip(gamma))
        .map(|((zj, mj), (vj, gj))| (zj - mj).powi(2) / (vj + gj * gj))
        .sum();
    Ok(m2 / n as f64)
}

/// Effective leakage under sub-sampling with ratio `rho`.
pub fn subsampled_leakage_score(m: f64, rho: f64) -> f64 {
    rho * m
}

/// Advantage of an adversary running the LR test tailored for a
/// misspecified target: `Φ(|m_scal| / 2√m_targ) − Φ(−·)`. A blind test
/// (`m_targ = 0`) has advantage 0.
pub fn misspec_advantage(m_scal: f64, m_targ: f64) -> Result<f64> {
    if m_targ < 0.0 {
        return Err(Error::invalid("m_targ", format!("{m_targ} is negative")));
    }
    if m_targ == 0.0 {
        return Ok(0.0);
    }
    let h = m_scal.abs() / (2.0 * m_targ.sqrt());
    Ok(phi(h) - phi(-h))
}

/// Cross leakage `(1/n) (z_targ − μ)ᵀ C_σ⁻¹ (z⋆ − μ)`.
pub fn cross_leakage(
    dist: &ProductDistribution,
    z_targ: &TargetPoint,
    z_star: &TargetPoint,
    n: usize,
) -> Result<f64> {
    check_dim(dist.dim(), z_targ.dim())?;
    check_dim(dist.dim(), z_star.dim())?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let (mu, var) = dist.moments();
    let s: f64 = (0..dist.dim())
        .map(|j| (z_targ.as_slice()[j] - mu[j]) * (z_star.as_slice()[j] - mu[j]) / var[j])
        .sum();
    Ok(s / n as f64)
}

/// δ(ε) of a `√m`-Gaussian-DP mechanism, clamped to `[0, 1]`.
pub fn gdp_delta(m: f64, epsilon: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::invalid("m", format!("GDP profile needs m > 0, got {m}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon} is negative")));
    }
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    let mu = m.sqrt();
    let a = phi(-epsilon / mu + mu / 2.0);
    let b = phi(-epsilon / mu - mu / 2.0);
    // e^ε Φ(·) underflows to 0·inf for huge ε; the product is 0 there.
    let tail = if b == 0.0 { 0.0 } else { epsilon.exp() * b };
    Ok((a - tail).clamp(0.0, 1.0))
}

/// Total variation between `N(mu0, σ²)` and `N(mu1, σ²)`.
pub fn tv_gaussians(mu0: f64, mu1: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    let h = (mu0 - mu1).abs() / (2.0 * sigma);
    Ok(phi(h) - phi(-h))
}

/// The fixed α-grid `{ i / (N−1) : i = 0..N }` with `N = ALPHA_GRID_POINTS`.
pub fn alpha_grid() -> Vec<f64> {
    let last = (ALPHA_GRID_POINTS - 1) as f64;
    (0..ALPHA_GRID_POINTS).map(|i| i as f64 / last).collect()
}

/// Optimal trade-off curve sampled on the α-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub m_eff: f64,
    pub samples: Vec<(f64, f64)>,
}

impl TradeoffCurve {
    pub fn new(m_eff: f64) -> Result<Self> {
        if !(m_eff >= 0.0) {
            return Err(Error::invalid("m_eff", format!("{m_eff} is negative")));
        }
        let samples = alpha_grid()
            .into_iter()
            .map(|a| theoretical_power(m_eff, a).map(|p| (a, p)))
            .collect::<Result<_>>()?;
        Ok(Self { m_eff, samples })
    }

    pub fn power(&self, alpha: f64) -> f64 {
        phi(phi_inv(alpha) + self.m_eff.sqrt())
    }
}
