use std::path::{Path, PathBuf};

use clap::Args;
use mia_core::canary::{estimate_reference, rank_candidates};
use mia_core::linalg::Matrix;
use mia_core::score::{CovMode, Ridge};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::io::{hash_args, read_numeric_csv, write_json, Envelope};

#[derive(Debug, Args)]
pub struct CanaryArgs {
    /// Reference points, one row per point.
    #[arg(long)]
    pub refs: PathBuf,
    /// Candidate points, same width as the references.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "diagonal", value_parser = ["diagonal", "full"])]
    pub cov_mode: String,
    /// Centre the reference covariance on the reference mean.
    #[arg(long)]
    pub centered: bool,
    /// Fixed ridge; the default scales with the covariance trace.
    #[arg(long)]
    pub ridge: Option<f64>,
}

#[derive(Serialize)]
struct Ranked {
    index: usize,
    score: f64,
}

#[derive(Serialize)]
struct CanaryReport {
    cov_mode: CovMode,
    centered: bool,
    ridge: f64,
    n_ref: usize,
    dim: usize,
    ranked: Vec<Ranked>,
}

fn load_matrix(path: &Path) -> Result<Matrix> {
    let rows = read_numeric_csv(path)?;
    if rows.is_empty() {
        return Err(CliError::input(path, "no data rows"));
    }
    Ok(Matrix::from_rows(&rows)?)
}

pub fn run(args: &CanaryArgs) -> Result<()> {
    let cov_mode = if args.cov_mode == "full" { CovMode::Full } else { CovMode::Diagonal };
    let hash = hash_args(
        json!({ "cov_mode": args.cov_mode, "centered": args.centered, "ridge": args.ridge }),
        &[("refs", &args.refs), ("candidates", &args.candidates)],
    )?;
    let refs = load_matrix(&args.refs)?;
    let candidates = read_numeric_csv(&args.candidates)?;
    if candidates.is_empty() {
        return Err(CliError::input(&args.candidates, "no data rows"));
    }
    let ridge = args.ridge.map_or(Ridge::Default, Ridge::Fixed);
    let est = estimate_reference(&refs, cov_mode, args.centered, ridge)?;
    let ranked = rank_candidates(&candidates, &est)?
        .into_iter()
        .map(|(index, score)| Ranked { index, score })
        .collect();
    let report = CanaryReport {
        cov_mode,
        centered: args.centered,
        ridge: est.ridge(),
        n_ref: refs.rows(),
        dim: refs.cols(),
        ranked,
    };
    write_json(&args.out, &Envelope::new(hash, None, report))
}
