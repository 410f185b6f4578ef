use std::path::Path;

use mia_core::game::{GameConfig, GameSummary};
use mia_core::score::SCORE_NAMES;
use mia_core::theory::TradeoffCurve;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::io::{ensure_dir, fmt_f64, write_csv, write_json, write_xy_csv, Envelope, Loaded};

#[derive(Serialize)]
struct ScoreEntry {
    index: usize,
    rounds_csv: String,
    roc_csv: String,
    #[serde(flatten)]
    summary: GameSummary,
}

#[derive(Serialize)]
struct SimulateReport {
    d: usize,
    n: usize,
    rounds: usize,
    mechanism: &'static str,
    m_star: f64,
    m_eff: f64,
    theory_csv: &'static str,
    scores: Vec<ScoreEntry>,
}

/// Rejects unknown score names up front so the error can list the valid ones.
pub fn check_score_names(value: &Value) -> Result<()> {
    let mut specs: Vec<&Value> = value.get("score").into_iter().collect();
    if let Some(Value::Array(extra)) = value.get("extra_scores") {
        specs.extend(extra);
    }
    for spec in specs {
        if let Some(Value::String(name)) = spec.get("name") {
            if !SCORE_NAMES.contains(&name.as_str()) {
                return Err(CliError::UnknownScore { name: name.clone(), valid: SCORE_NAMES.to_vec() });
            }
        }
    }
    Ok(())
}

pub fn run(cfg: &Loaded, out: &Path) -> Result<()> {
    check_score_names(&cfg.value)?;
    let config: GameConfig = cfg.parse()?;
    let game = config.build()?;
    let transcripts = game.run()?;

    ensure_dir(out)?;
    let mut scores = Vec::new();
    for (i, rounds) in transcripts.iter().enumerate() {
        let (summary, curve) = GameSummary::new(&game, i, rounds)?;
        let rounds_csv = format!("rounds_{i}.csv");
        let roc_csv = format!("roc_{i}.csv");
        write_csv(
            &out.join(&rounds_csv),
            &["round", "score", "b"],
            rounds.iter().enumerate().map(|(t, r)| vec![t.to_string(), fmt_f64(r.score), r.b.to_string()]),
        )?;
        write_xy_csv(&out.join(&roc_csv), ["fpr", "tpr"], &curve.points)?;
        scores.push(ScoreEntry { index: i, rounds_csv, roc_csv, summary });
    }
    let m_eff = game.effective_leakage()?;
    write_xy_csv(&out.join("theory.csv"), ["alpha", "power"], &TradeoffCurve::new(m_eff)?.samples)?;
    let report = SimulateReport {
        d: game.dist.dim(),
        n: game.n,
        rounds: game.rounds,
        mechanism: game.mechanism.name(),
        m_star: game.leakage_score()?,
        m_eff,
        theory_csv: "theory.csv",
        scores,
    };
    write_json(&out.join("summary.json"), &Envelope::new(cfg.hash.clone(), Some(config.master_seed), report))
}
