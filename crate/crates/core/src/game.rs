//! The crafter, fixed- and average-target games, and ROC estimation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{DistributionSpec, ProductDistribution, TargetPoint};
use crate::error::{check_dim, Error, Result};
use crate::mech::{MechanismConfig, MechanismSpec};
use crate::rng::StreamFactory;
use crate::score::{ScoreContext, ScoreSpec, Scorer};
use crate::theory::{self, TradeoffCurve};

/// Default number of rounds per game.
pub const DEFAULT_ROUNDS: usize = 1000;

/// One round reduced to the adversary's score and the true membership bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredRound {
    pub score: f64,
    pub b: u8,
}

/// One challenger round: draws `b`, builds `D ~ 𝒟ⁿ`, puts `z` at a uniform
/// row when `b = 1`, and releases `mech(D)`.
pub fn craft<R: Rng + ?Sized>(
    dist: &ProductDistribution,
    mech: &MechanismSpec,
    n: usize,
    z: &TargetPoint,
    rng: &mut R,
) -> Result<(Vec<f64>, u8)> {
    check_dim(dist.dim(), z.dim())?;
    let b = u8::from(rng.random_bool(0.5));
    let mut data = dist.sample_dataset(n, rng)?;
    if b == 1 {
        let j = rng.random_range(0..n);
        data.row_mut(j).copy_from_slice(z.as_slice());
    }
    Ok((mech.apply(&data, rng)?, b))
}

/// How a game draws mechanism outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Column sums drawn from their exact laws (no `n × d` dataset).
    #[default]
    Summary,
    /// Full datasets built by [`craft`].
    Materialised,
}

/// How the fixed target is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// `1{p ≤ 1/2}` for Bernoulli columns.
    Easy,
    /// `1{p > 1/2}` for Bernoulli columns.
    Hard,
    /// One draw from the data distribution.
    Random { seed: u64 },
    Explicit { z: Vec<f64> },
}

impl TargetSpec {
    pub fn build(&self, dist: &ProductDistribution) -> Result<TargetPoint> {
        match self {
            TargetSpec::Easy => Ok(dist.make_extreme_targets()?.0),
            TargetSpec::Hard => Ok(dist.make_extreme_targets()?.1),
            TargetSpec::Random { seed } => {
                Ok(TargetPoint::new(dist.sample_row(&mut StreamFactory::new(*seed, "target").stream(0))))
            }
            TargetSpec::Explicit { z } => {
                check_dim(dist.dim(), z.len())?;
                Ok(TargetPoint::new(z.clone()))
            }
        }
    }
}

fn default_rounds() -> usize {
    DEFAULT_ROUNDS
}

/// A fixed-target game as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub distribution: DistributionSpec,
    pub mechanism: MechanismConfig,
    pub n: usize,
    pub target: TargetSpec,
    pub score: ScoreSpec,
    /// Extra scores evaluated on the same outputs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_scores: Vec<ScoreSpec>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
}

/// A resolved fixed-target game.
#[derive(Debug, Clone)]
pub struct Game {
    pub dist: ProductDistribution,
    pub mechanism: MechanismSpec,
    pub n: usize,
    pub target: TargetPoint,
    pub scorers: Vec<(String, Scorer)>,
    pub rounds: usize,
    pub master_seed: u64,
    pub sampling: Sampling,
}

impl GameConfig {
    pub fn build(&self) -> Result<Game> {
        let dist = self.distribution.build()?;
        let target = self.target.build(&dist)?;
        Game::new(
            dist,
            self.mechanism.resolve(target.dim())?,
            self.n,
            target,
            &std::iter::once(&self.score).chain(&self.extra_scores).cloned().collect::<Vec<_>>(),
            self.rounds,
            self.master_seed,
        )
        .map(|g| Game { sampling: self.sampling, ..g })
    }
}

impl Game {
    /// Resolves scores; reference draws for score `i` come from stream `i`
    /// of the `(master_seed, "reference")` domain.
    pub fn new(
        dist: ProductDistribution,
        mechanism: MechanismSpec,
        n: usize,
        target: TargetPoint,
        scores: &[ScoreSpec],
        rounds: usize,
        master_seed: u64,
    ) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::invalid("rounds", "a game needs at least one round"));
        }
        if scores.is_empty() {
            return Err(Error::Empty("score list"));
        }
        check_dim(dist.dim(), target.dim())?;
        mechanism.validate(dist.dim(), n)?;
        let refs = StreamFactory::new(master_seed, "reference");
        let scorers = scores
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let ctx = ScoreContext {
                    dist: &dist,
                    mechanism: &mechanism,
                    n,
                    reference_rng: &mut refs.stream(i as u64),
                };
                Scorer::resolve(spec, ctx).map(|s| (spec.name().to_owned(), s))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dist,
            mechanism,
            n,
            target,
            scorers,
            rounds,
            master_seed,
            sampling: Sampling::Summary,
        })
    }

    /// Leakage score `m⋆` of the target under the exact mean.
    pub fn leakage_score(&self) -> Result<f64> {
        self.dist.leakage_score(&self.target, self.n)
    }

    /// Leakage score governing the optimal trade-off of this mechanism.
    pub fn effective_leakage(&self) -> Result<f64> {
        effective_leakage(&self.dist, &self.mechanism, &self.target, self.n)
    }

    /// Plays every round; returns one transcript per configured score, all
    /// sharing the same outputs and membership bits.
    pub fn run(&self) -> Result<Vec<Vec<ScoredRound>>> {
        let bound = self
            .scorers
            .iter()
            .map(|(_, s)| s.for_target(&self.target))
            .collect::<Result<Vec<_>>>()?;
        let streams = StreamFactory::new(self.master_seed, "fixed_game");
        let per_round: Vec<Result<Vec<ScoredRound>>> = (0..self.rounds)
            .into_par_iter()
            .map(|t| {
                let mut rng = streams.stream(t as u64);
                let (o, b) = match self.sampling {
                    Sampling::Summary => {
                        let b = u8::from(rng.random_bool(0.5));
                        let inserted = (b == 1).then_some(self.target.as_slice());
                        (self.mechanism.sample_output(&self.dist, self.n, inserted, &mut rng)?, b)
                    }
                    Sampling::Materialised => {
                        craft(&self.dist, &self.mechanism, self.n, &self.target, &mut rng)?
                    }
                };
                bound
                    .iter()
                    .map(|s| s.score(&o).map(|score| ScoredRound { score, b }))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::Round { round: t, source: Box::new(e) })
            })
            .collect();
        let mut out = vec![Vec::with_capacity(self.rounds); self.scorers.len()];
        for r in per_round {
            for (col, round) in out.iter_mut().zip(r?) {
                col.push(round);
            }
        }
        Ok(out)
    }
}

/// `m⋆` for the exact mean, `m̃⋆` for the noisy mean, `ρ m⋆` under
/// sub-sampling.
pub fn effective_leakage(
    dist: &ProductDistribution,
    mech: &MechanismSpec,
    z: &TargetPoint,
    n: usize,
) -> Result<f64> {
    match mech {
        MechanismSpec::EmpiricalMean => dist.leakage_score(z, n),
        MechanismSpec::NoisyMean { gamma } => theory::noisy_leakage_score(dist, z, gamma, n),
        MechanismSpec::SubsampledMean { rho } => {
            Ok(theory::subsampled_leakage_score(dist.leakage_score(z, n)?, *rho))
        }
    }
}

/// Fixed-target game with the first configured score.
pub fn run_fixed_game(cfg: &GameConfig) -> Result<Vec<ScoredRound>> {
    Ok(cfg.build()?.run()?.swap_remove(0))
}

/// Average-target game: per round `b` is drawn first; the target is a fresh
/// draw from `dist` when `b = 0` and a uniformly chosen row of the dataset
/// when `b = 1`. Outputs are drawn with the summary sampler.
pub fn run_average_game(
    dist: &ProductDistribution,
    mech: &MechanismSpec,
    n: usize,
    scorer: &Scorer,
    rounds: usize,
    master_seed: u64,
) -> Result<Vec<ScoredRound>> {
    if rounds == 0 {
        return Err(Error::invalid("rounds", "a game needs at least one round"));
    }
    mech.validate(dist.dim(), n)?;
    let streams = StreamFactory::new(master_seed, "average_game");
    let per_round: Vec<Result<ScoredRound>> = (0..rounds)
        .into_par_iter()
        .map(|t| {
            let mut rng = streams.stream(t as u64);
            let b = u8::from(rng.random_bool(0.5));
            // A uniformly chosen row of an i.i.d. dataset is itself a fresh
            // draw independent of the other rows.
            let z = TargetPoint::new(dist.sample_row(&mut rng));
            let inserted = (b == 1).then_some(z.as_slice());
            let o = mech.sample_output(dist, n, inserted, &mut rng)?;
            scorer
                .score(&o, &z)
                .map(|score| ScoredRound { score, b })
                .map_err(|e| Error::Round { round: t, source: Box::new(e) })
        })
        .collect();
    per_round.into_iter().collect()
}

/// Empirical ROC curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn class_counts(rounds: &[ScoredRound]) -> Result<(usize, usize)> {
    let positives = rounds.iter().filter(|r| r.b == 1).count();
    let negatives = rounds.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { negatives, positives });
    }
    if let Some(r) = rounds.iter().find(|r| r.b > 1) {
        return Err(Error::invalid("b", format!("membership bit {} is not 0 or 1", r.b)));
    }
    if rounds.iter().any(|r| r.score.is_nan()) {
        return Err(Error::invalid("score", "NaN score"));
    }
    Ok((negatives, positives))
}

/// Sweeps the threshold over the distinct scores (guess 1 when
/// `score ≥ threshold`); equal scores move the curve in one step.
pub fn roc(rounds: &[ScoredRound]) -> Result<RocCurve> {
    let (negatives, positives) = class_counts(rounds)?;
    let mut sorted = rounds.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut points = vec![(0.0, 0.0)];
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].score;
        while i < sorted.len() && sorted[i].score == s {
            if sorted[i].b == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let p = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        let last = *points.last().unwrap();
        auc += (p.0 - last.0) * (p.1 + last.1) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}

impl RocCurve {
    /// Largest TPR among points with `fpr ≤ alpha`.
    pub fn power_at(&self, alpha: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.0 <= alpha)
            .map(|p| p.1)
            .fold(0.0, f64::max)
    }

    /// TPR of the linear interpolation of the curve at `fpr = alpha`.
    pub fn interpolated_power(&self, alpha: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 < alpha);
        if k == 0 {
            return self.points[0].1.max(
                self.points.iter().take_while(|p| p.0 <= alpha).map(|p| p.1).fold(0.0, f64::max),
            );
        }
        if k == self.points.len() {
            return 1.0;
        }
        let (a, b) = (self.points[k - 1], self.points[k]);
        if b.0 == alpha {
            // several points may share this fpr; take the top of the step
            return self.points[k..].iter().take_while(|p| p.0 == alpha).map(|p| p.1).fold(b.1, f64::max);
        }
        a.1 + (b.1 - a.1) * (alpha - a.0) / (b.0 - a.0)
    }
}

/// `2 · mean(1{(score > τ) = b}) − 1`.
pub fn empirical_advantage(rounds: &[ScoredRound], threshold: f64) -> f64 {
    if rounds.is_empty() {
        return 0.0;
    }
    let correct = rounds.iter().filter(|r| (r.score > threshold) == (r.b == 1)).count();
    2.0 * correct as f64 / rounds.len() as f64 - 1.0
}

/// Largest empirical advantage over all thresholds.
pub fn max_empirical_advantage(rounds: &[ScoredRound]) -> Result<f64> {
    let (negatives, positives) = class_counts(rounds)?;
    let total = rounds.len() as f64;
    let curve = roc(rounds)?;
    Ok(curve
        .points
        .iter()
        .map(|&(fpr, tpr)| {
            let correct = negatives as f64 * (1.0 - fpr) + positives as f64 * tpr;
            2.0 * correct / total - 1.0
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

fn directed_gap(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    from.iter()
        .map(|&p| {
            if to.len() == 1 {
                return point_segment_distance(p, to[0], to[0]);
            }
            to.windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two curves given as polylines,
/// evaluated at the vertices of each. Unlike a vertical sup-norm it does
/// not blow up where the curves are steep near `α = 0`.
pub fn curve_gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    directed_gap(a, b).max(directed_gap(b, a))
}

/// Gap between an empirical ROC and the optimal trade-off with `m_eff`.
pub fn roc_gap(curve: &RocCurve, m_eff: f64) -> Result<f64> {
    Ok(curve_gap(&curve.points, &TradeoffCurve::new(m_eff)?.samples))
}

/// Vertical sup-norm `max_α |TPR(α) − Φ(Φ⁻¹(α) + √m)|` over the α-grid, with
/// the empirical curve linearly interpolated.
pub fn vertical_gap(curve: &RocCurve, m_eff: f64) -> Result<f64> {
    let theory = TradeoffCurve::new(m_eff)?;
    Ok(theory
        .samples
        .iter()
        .map(|&(a, p)| (curve.interpolated_power(a) - p).abs())
        .fold(0.0, f64::max))
}

/// Numbers reported for one simulated score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSummary {
    pub score: String,
    pub m_star: f64,
    pub m_eff: f64,
    pub auc: f64,
    /// Advantage at `τ = 0`, the equal-prior Bayes threshold of LR scores;
    /// absent for the scalar-product score.
    pub advantage_at_bayes_threshold: Option<f64>,
    pub max_advantage: f64,
    pub theory_leakage: f64,
    pub sup_norm_gap: f64,
    pub vertical_gap: f64,
    pub alpha_grid_points: usize,
}

impl GameSummary {
    pub fn new(game: &Game, score_index: usize, rounds: &[ScoredRound]) -> Result<(Self, RocCurve)> {
        let m_star = game.leakage_score()?;
        let m_eff = game.effective_leakage()?;
        let curve = roc(rounds)?;
        let name = game.scorers[score_index].0.clone();
        let bayes = (!matches!(game.scorers[score_index].1, Scorer::Scalar { .. }))
            .then(|| empirical_advantage(rounds, 0.0));
        let summary = Self {
            score: name,
            m_star,
            m_eff,
            auc: curve.auc,
            advantage_at_bayes_threshold: bayes,
            max_advantage: max_empirical_advantage(rounds)?,
            theory_leakage: theory::theoretical_leakage(m_eff),
            sup_norm_gap: roc_gap(&curve, m_eff)?,
            vertical_gap: vertical_gap(&curve, m_eff)?,
            alpha_grid_points: theory::ALPHA_GRID_POINTS,
        };
        Ok((summary, curve))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ColumnLaw;
    use crate::score::OracleMoments;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn rounds(pairs: &[(f64, u8)]) -> Vec<ScoredRound> {
        pairs.iter().map(|&(score, b)| ScoredRound { score, b }).collect()
    }

    #[test]
    fn single_row_insert_is_released_verbatim() {
        let dist = ProductDistribution::bernoulli(&[0.3, 0.6, 0.5]).unwrap();
        let z = TargetPoint::new(vec![1.0, 0.0, 1.0]);
        let mut r = rng(3);
        let mut seen = 0;
        for _ in 0..50 {
            let (o, b) = craft(&dist, &MechanismSpec::EmpiricalMean, 1, &z, &mut r).unwrap();
            if b == 1 {
                assert_eq!(o, z.as_slice());
                seen += 1;
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn membership_coin_is_fair() {
        let dist = ProductDistribution::bernoulli(&[0.5]).unwrap();
        let z = TargetPoint::new(vec![1.0]);
        let mut r = rng(4);
        let ones: u32 = (0..10_000)
            .map(|_| u32::from(craft(&dist, &MechanismSpec::EmpiricalMean, 3, &z, &mut r).unwrap().1))
            .sum();
        assert!((f64::from(ones) / 1e4 - 0.5).abs() < 0.015);
    }

    #[test]
    fn included_target_shifts_the_mean_by_one_nth() {
        let dist = ProductDistribution::bernoulli(&[0.3, 0.8]).unwrap();
        let z = TargetPoint::new(vec![1.0, 0.0]);
        let n = 10;
        let mut r = rng(5);
        let (mut sum, mut sq, mut count) = ([0.0; 2], [0.0; 2], 0.0);
        while count < 1e5 {
            let (o, b) = craft(&dist, &MechanismSpec::EmpiricalMean, n, &z, &mut r).unwrap();
            if b == 1 {
                for j in 0..2 {
                    sum[j] += o[j];
                    sq[j] += o[j] * o[j];
                }
                count += 1.0;
            }
        }
        for j in 0..2 {
            let mu = dist.mean()[j];
            let expected = mu + (z.as_slice()[j] - mu) / n as f64;
            let mean = sum[j] / count;
            let sd = (sq[j] / count - mean * mean).sqrt();
            assert!((mean - expected).abs() < 4.0 * sd / count.sqrt(), "{j}: {mean} vs {expected}");
        }
    }

    fn small_config(rounds: usize) -> GameConfig {
        serde_json::from_value(serde_json::json!({
            "distribution": {"law": "bernoulli_uniform", "d": 200, "a": 0.25, "seed": 9},
            "mechanism": {"mechanism": "empirical_mean"},
            "n": 100,
            "target": {"kind": "easy"},
            "score": {"name": "lr_asymptotic"},
            "extra_scores": [{"name": "scalar_product"}, {"name": "lr_exact_bernoulli"}],
            "rounds": rounds,
            "master_seed": 77
        }))
        .unwrap()
    }

    #[test]
    fn fixed_game_is_deterministic_and_thread_independent() {
        let cfg = small_config(64);
        let a = run_fixed_game(&GameConfig { rounds: 1, ..cfg.clone() }).unwrap();
        let b = run_fixed_game(&GameConfig { rounds: 1, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        let game = cfg.build().unwrap();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| game.run().unwrap());
        let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| game.run().unwrap());
        assert_eq!(serial.len(), 3);
        for (s, p) in serial.iter().zip(&parallel) {
            let bits = |v: &Vec<ScoredRound>| v.iter().map(|r| (r.score.to_bits(), r.b)).collect::<Vec<_>>();
            assert_eq!(bits(s), bits(p));
        }
        // the first round of the long game is the one-round game
        assert_eq!(serial[0][0], a[0]);
    }

    #[test]
    fn materialised_and_summary_games_agree_in_law() {
        let mut cfg = small_config(600);
        cfg.extra_scores.clear();
        let fast = run_fixed_game(&cfg).unwrap();
        cfg.sampling = Sampling::Materialised;
        let slow = run_fixed_game(&cfg).unwrap();
        let (a, b) = (roc(&fast).unwrap().auc, roc(&slow).unwrap().auc);
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }

    #[test]
    fn round_errors_carry_the_round_index() {
        let dist = ProductDistribution::bernoulli(&[0.5, 0.5]).unwrap();
        let bad = Scorer::Scalar { z_ref: vec![0.0; 3] };
        let err = run_average_game(&dist, &MechanismSpec::EmpiricalMean, 5, &bad, 4, 1).unwrap_err();
        assert!(matches!(err, Error::Round { round: 0, .. }), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config(0);
        assert!(cfg.build().is_err());
        cfg.rounds = 5;
        cfg.target = TargetSpec::Explicit { z: vec![1.0] };
        assert!(matches!(cfg.build(), Err(Error::DimensionMismatch { .. })));
        let gauss = ProductDistribution::new(vec![ColumnLaw::Gaussian { mean: 0.0, var: 1.0 }]).unwrap();
        assert!(TargetSpec::Easy.build(&gauss).is_err());
    }

    #[test]
    fn average_game_matches_mean_of_fixed_games() {
        let dist = ProductDistribution::bernoulli_uniform(50, 0.25, 21).unwrap();
        let n = 100;
        let mech = MechanismSpec::EmpiricalMean;
        let scorer = Scorer::Asymptotic { om: OracleMoments::of(&dist), n };
        let avg = run_average_game(&dist, &mech, n, &scorer, 4000, 5).unwrap();
        let avg_adv = empirical_advantage(&avg, 0.0);
        let mut fixed = 0.0;
        for k in 0..20 {
            let game = Game::new(
                dist.clone(),
                mech.clone(),
                n,
                TargetSpec::Random { seed: 100 + k }.build(&dist).unwrap(),
                &[ScoreSpec::LrAsymptotic],
                1000,
                k,
            )
            .unwrap();
            fixed += empirical_advantage(&game.run().unwrap()[0], 0.0) / 20.0;
        }
        assert!((avg_adv - fixed).abs() < 0.05, "{avg_adv} vs {fixed}");
    }

    #[test]
    fn roc_edge_cases() {
        let sep = roc(&rounds(&[(3.0, 1), (2.0, 1), (1.0, 0), (0.0, 0)])).unwrap();
        assert_eq!(sep.auc, 1.0);
        assert!(sep.points.contains(&(0.0, 1.0)));
        let flat = roc(&rounds(&[(1.0, 1), (1.0, 0), (1.0, 0), (1.0, 1)])).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        let inf = roc(&rounds(&[
            (f64::INFINITY, 1),
            (f64::NEG_INFINITY, 0),
            (f64::NEG_INFINITY, 1),
            (0.0, 0),
        ]))
        .unwrap();
        assert_eq!(inf.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(inf.points.last(), Some(&(1.0, 1.0)));
        assert!(matches!(roc(&rounds(&[(1.0, 1), (2.0, 1)])), Err(Error::SingleClass { .. })));
        assert!(roc(&rounds(&[(f64::NAN, 1), (2.0, 0)])).is_err());
    }

    #[test]
    fn vanishing_noise_gives_a_perfect_step() {
        let mut r = rng(6);
        let rs: Vec<ScoredRound> = (0..500)
            .map(|i| {
                let b = (i % 2) as u8;
                ScoredRound { score: f64::from(b) + 1e-6 * r.random::<f64>(), b }
            })
            .collect();
        assert_eq!(roc(&rs).unwrap().auc, 1.0);
        assert_eq!(max_empirical_advantage(&rs).unwrap(), 1.0);
    }

    #[test]
    fn advantage_values() {
        let rs = rounds(&[(1.0, 1), (-1.0, 0), (2.0, 0), (-2.0, 1)]);
        assert_eq!(empirical_advantage(&rs, 0.0), 0.0);
        assert_eq!(empirical_advantage(&rs, f64::INFINITY), 0.0);
        let mut r = rng(7);
        let random: Vec<ScoredRound> = (0..1000)
            .map(|_| ScoredRound { score: r.random(), b: u8::from(r.random_bool(0.5)) })
            .collect();
        assert!(empirical_advantage(&random, 0.5).abs() < 3.0 / 1000f64.sqrt());
    }

    #[test]
    fn bayes_threshold_advantage_matches_leakage() {
        // Columns with equal variance so that m⋆ = 4 exactly.
        let d = 400;
        let dist = ProductDistribution::bernoulli(&vec![0.5; d]).unwrap();
        let n = 25;
        // ‖z − μ‖² / σ² = d, m⋆ = d / n = 16; take half the coordinates at μ
        let z: Vec<f64> = (0..d).map(|j| if j < 100 { 1.0 } else { 0.5 }).collect();
        let z = TargetPoint::new(z);
        assert!((dist.leakage_score(&z, n).unwrap() - 4.0).abs() < 1e-12);
        let game = Game::new(dist, MechanismSpec::EmpiricalMean, n, z, &[ScoreSpec::LrAsymptotic], 1000, 3).unwrap();
        let rs = game.run().unwrap().swap_remove(0);
        let adv = empirical_advantage(&rs, 0.0);
        assert!((adv - theory::theoretical_leakage(4.0)).abs() < 0.05, "{adv}");
    }

    #[test]
    fn gap_of_a_curve_with_itself_is_zero() {
        let c = TradeoffCurve::new(3.0).unwrap();
        assert_eq!(curve_gap(&c.samples, &c.samples), 0.0);
        let curve = RocCurve { points: c.samples.clone(), auc: 0.0 };
        assert!(roc_gap(&curve, 3.0).unwrap() == 0.0);
        assert!(vertical_gap(&curve, 3.0).unwrap() < 1e-12);
        let diag = RocCurve { points: vec![(0.0, 0.0), (1.0, 1.0)], auc: 0.5 };
        assert!(roc_gap(&diag, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn power_lookup() {
        let c = RocCurve { points: vec![(0.0, 0.0), (0.0, 0.4), (0.5, 0.8), (1.0, 1.0)], auc: 0.0 };
        assert_eq!(c.power_at(0.0), 0.4);
        assert_eq!(c.power_at(0.3), 0.4);
        assert_eq!(c.power_at(0.5), 0.8);
        assert_eq!(c.interpolated_power(0.0), 0.4);
        assert!((c.interpolated_power(0.25) - 0.6).abs() < 1e-15);
        assert_eq!(c.interpolated_power(1.0), 1.0);
    }

    proptest! {
        #[test]
        fn roc_is_monotone_and_transform_invariant(
            pairs in prop::collection::vec((-50.0f64..50.0, 0u8..2), 2..200),
            shift in -10.0f64..10.0,
            scale in 0.01f64..10.0,
        ) {
            let mut pairs = pairs;
            pairs[0].1 = 0;
            pairs[1].1 = 1;
            let base = rounds(&pairs);
            let curve = roc(&base).unwrap();
            prop_assert_eq!(curve.points[0], (0.0, 0.0));
            prop_assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
            for w in curve.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert!((0.0..=1.0).contains(&curve.auc));
            // a strictly increasing transform keeps the curve
            let mono: Vec<ScoredRound> = base
                .iter()
                .map(|r| ScoredRound { score: scale * r.score.powi(3) + shift, b: r.b })
                .collect();
            prop_assert_eq!(&roc(&mono).unwrap(), &curve);
            // maximising over τ beats any fixed τ
            let best = max_empirical_advantage(&base).unwrap();
            for &(s, _) in pairs.iter().take(20) {
                prop_assert!(best >= empirical_advantage(&base, s) - 1e-12);
            }
        }
    }
}
