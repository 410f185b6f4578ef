use std::path::Path;

use mia_core::dist::DistributionSpec;
use mia_core::game::{effective_leakage, TargetSpec};
use mia_core::mech::MechanismConfig;
use mia_core::theory::{gdp_delta, theoretical_leakage, TradeoffCurve};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{ensure_dir, write_json, write_xy_csv, Envelope, Loaded};

/// Leakage given directly.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectConfig {
    m: f64,
    #[serde(default)]
    epsilons: Option<Vec<f64>>,
    #[serde(default)]
    master_seed: Option<u64>,
}

/// Leakage computed from a distribution, target and mechanism.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConfig {
    distribution: DistributionSpec,
    #[serde(default = "empirical_mean")]
    mechanism: MechanismConfig,
    n: usize,
    target: TargetSpec,
    #[serde(default)]
    epsilons: Option<Vec<f64>>,
    #[serde(default)]
    master_seed: Option<u64>,
}

fn empirical_mean() -> MechanismConfig {
    MechanismConfig::EmpiricalMean
}

#[derive(Serialize)]
struct GdpPoint {
    eps: f64,
    delta: f64,
}

#[derive(Serialize)]
struct TheoryReport {
    m_star: f64,
    m_eff: f64,
    leakage: f64,
    gdp: Vec<GdpPoint>,
    alpha_grid_points: usize,
    tradeoff_csv: &'static str,
}

fn default_epsilons() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.5).collect()
}

pub fn run(cfg: &Loaded, out: &Path) -> Result<()> {
    let (m_star, m_eff, epsilons, seed) = if cfg.value.get("m").is_some() {
        let c: DirectConfig = cfg.parse()?;
        (c.m, c.m, c.epsilons, c.master_seed)
    } else {
        let c: ModelConfig = cfg.parse()?;
        let dist = c.distribution.build()?;
        let z = c.target.build(&dist)?;
        let mech = c.mechanism.resolve(dist.dim())?;
        mech.validate(dist.dim(), c.n)?;
        (dist.leakage_score(&z, c.n)?, effective_leakage(&dist, &mech, &z, c.n)?, c.epsilons, c.master_seed)
    };
    let curve = TradeoffCurve::new(m_eff)?;
    let gdp = epsilons
        .unwrap_or_else(default_epsilons)
        .into_iter()
        .map(|eps| {
            // 0-GDP releases nothing: δ(ε) = 0 for every ε ≥ 0.
            let delta = if m_eff == 0.0 && eps >= 0.0 { 0.0 } else { gdp_delta(m_eff, eps)? };
            Ok(GdpPoint { eps, delta })
        })
        .collect::<Result<Vec<_>>>()?;

    ensure_dir(out)?;
    write_xy_csv(&out.join("tradeoff.csv"), ["alpha", "power"], &curve.samples)?;
    let report = TheoryReport {
        m_star,
        m_eff,
        leakage: theoretical_leakage(m_eff),
        gdp,
        alpha_grid_points: curve.samples.len(),
        tradeoff_csv: "tradeoff.csv",
    };
    write_json(&out.join("theory.json"), &Envelope::new(cfg.hash.clone(), seed, report))
}
