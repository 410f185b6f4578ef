use std::path::Path;

use mia_core::game::roc;
use mia_core::whitebox::{DataSource, Example, TargetReport, WhiteboxConfig, WhiteboxReport};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{ensure_dir, fmt_f64, hash_args, read_numeric_csv, write_csv, write_json, write_xy_csv, Envelope, Loaded};

#[derive(Serialize)]
struct WhiteboxOutput {
    #[serde(flatten)]
    report: WhiteboxReport,
    scores_csv: &'static str,
    roc_csv: Vec<String>,
}

/// Examples from CSV rows: features, then the label in the last column.
pub fn load_examples(path: &Path, features: usize) -> Result<Vec<Example>> {
    let rows = read_numeric_csv(path)?;
    if rows.is_empty() {
        return Err(CliError::input(path, "no data rows"));
    }
    if rows[0].len() != features + 1 {
        return Err(CliError::input(
            path,
            format!("expected {} columns ({features} features and a label), got {}", features + 1, rows[0].len()),
        ));
    }
    Ok(rows
        .into_iter()
        .map(|mut r| {
            let y = r.pop().expect("width checked above");
            Example { x: r, y }
        })
        .collect())
}

pub fn run(cfg: &Loaded, data: Option<&Path>, out: &Path) -> Result<()> {
    let config: WhiteboxConfig = cfg.parse()?;
    let hash = match data {
        Some(path) => hash_args(cfg.value.clone(), &[("data", path)])?,
        None => cfg.hash.clone(),
    };
    let report = match data {
        Some(path) => config.run_on(&DataSource::Pool(load_examples(path, config.features)?))?,
        None => config.run()?,
    };

    ensure_dir(out)?;
    let targets: [(&str, &TargetReport); 2] = [("top", &report.top), ("bottom", &report.bottom)];
    let mut rows = Vec::new();
    let mut roc_csv = Vec::new();
    for (label, t) in targets {
        for (attack, rounds) in [("covariance", &t.covariance), ("scalar", &t.scalar)] {
            for (i, r) in rounds.iter().enumerate() {
                rows.push(vec![label.into(), attack.into(), i.to_string(), fmt_f64(r.score), r.b.to_string()]);
            }
            let name = format!("roc_{label}_{attack}.csv");
            write_xy_csv(&out.join(&name), ["fpr", "tpr"], &roc(rounds)?.points)?;
            roc_csv.push(name);
        }
    }
    write_csv(&out.join("scores.csv"), &["target", "attack", "round", "score", "b"], rows)?;
    let output = WhiteboxOutput { report, scores_csv: "scores.csv", roc_csv };
    write_json(&out.join("whitebox.json"), &Envelope::new(hash, Some(config.master_seed), output))
}
