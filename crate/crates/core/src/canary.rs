//! Reference-moment estimation and Mahalanobis canary selection.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Matrix, SquareMatrix};
use crate::score::{CovMode, CovarianceInput, ReferenceEstimates, Ridge};

/// Estimates `(μ̂₀, Ĉ₀)` from reference rows.
///
/// By default `Ĉ₀ = (1/n0) Σ g gᵀ` (raw second moment); `centered` uses
/// `(1/n0) Σ (g − μ̂₀)(g − μ̂₀)ᵀ` instead.
pub fn estimate_reference(
    refs: &Matrix,
    cov_mode: CovMode,
    centered: bool,
    ridge: Ridge,
) -> Result<ReferenceEstimates> {
    let (n0, d) = (refs.rows(), refs.cols());
    if n0 < 2 {
        return Err(Error::invalid("n0", format!("need at least 2 reference points, got {n0}")));
    }
    let mu0 = refs.column_means();
    let shift = |g: &[f64]| -> Vec<f64> {
        if centered {
            g.iter().zip(&mu0).map(|(a, b)| a - b).collect()
        } else {
            g.to_vec()
        }
    };
    let inv_n = 1.0 / n0 as f64;
    let cov = match cov_mode {
        CovMode::Diagonal => {
            let mut diag = vec![0.0; d];
            for g in refs.iter_rows() {
                for (c, x) in diag.iter_mut().zip(shift(g)) {
                    *c += x * x;
                }
            }
            diag.iter_mut().for_each(|c| *c *= inv_n);
            CovarianceInput::Diagonal(diag)
        }
        CovMode::Full => {
            let mut c = SquareMatrix::zeros(d);
            for g in refs.iter_rows() {
                c.add_outer(1.0, &shift(g));
            }
            c.scale(inv_n);
            CovarianceInput::Full(c)
        }
    };
    ReferenceEstimates::new(mu0, cov, n0, ridge)
}

/// `(x − μ̂₀)ᵀ Ĉ₀⁻¹ (x − μ̂₀)`.
pub fn mahalanobis_score_est(x: &[f64], refs: &ReferenceEstimates) -> Result<f64> {
    check_dim(refs.dim(), x.len())?;
    let dx: Vec<f64> = x.iter().zip(refs.mu0()).map(|(a, b)| a - b).collect();
    Ok(refs.inv_quad(&dx).max(0.0))
}

/// Scores every candidate; the result keeps candidate order.
pub fn score_candidates(candidates: &[Vec<f64>], refs: &ReferenceEstimates) -> Result<Vec<f64>> {
    candidates
        .par_iter()
        .map(|c| mahalanobis_score_est(c, refs))
        .collect()
}

/// Index and score of the candidate with the largest estimated Mahalanobis
/// score. Ties go to the lowest index.
pub fn select_canary(candidates: &[Vec<f64>], refs: &ReferenceEstimates) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    let scores = score_candidates(candidates, refs)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores[best]))
}

/// Candidates sorted by descending score (stable, so ties keep index order).
pub fn rank_candidates(candidates: &[Vec<f64>], refs: &ReferenceEstimates) -> Result<Vec<(usize, f64)>> {
    let scores = score_candidates(candidates, refs)?;
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}
