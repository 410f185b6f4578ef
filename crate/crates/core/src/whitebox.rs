//! A toy white-box federated-learning harness.
//!
//! A small linear or logistic model is trained with mini-batch SGD (or
//! DP-SGD) and every iterate is recorded. An adversary who sees the iterates
//! recovers each batch gradient as `(θ_t − θ_{t+1}) / η` and attacks it
//! like an empirical mean of per-example gradients.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canary::{estimate_reference, rank_candidates};
use crate::error::{check_dim, Error, Result};
use crate::game::{roc, ScoredRound};
use crate::linalg::{dot, Matrix};
use crate::mech::partial_shuffle;
use crate::rng::StreamFactory;
use crate::score::{CovMode, ReferenceEstimates, Ridge};

/// Model family and shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum Arch {
    /// `ŷ = wᵀx + b` with squared loss `(ŷ − y)² / 2`.
    Linear { features: usize },
    /// Softmax over `classes` with cross-entropy. Parameters are the
    /// `classes × features` weights (row-major) followed by the biases.
    Logistic { features: usize, classes: usize },
}

impl Arch {
    pub fn features(&self) -> usize {
        match *self {
            Arch::Linear { features } | Arch::Logistic { features, .. } => features,
        }
    }

    pub fn param_dim(&self) -> usize {
        match *self {
            Arch::Linear { features } => features + 1,
            Arch::Logistic { features, classes } => features * classes + classes,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Arch::Logistic { classes, .. } if classes < 2 => {
                Err(Error::invalid("classes", format!("need at least 2 classes, got {classes}")))
            }
            _ => Ok(()),
        }
    }
}

/// A labelled example. Logistic labels are class indices stored as `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    arch: Arch,
    theta: Vec<f64>,
}

impl ToyModel {
    pub fn new(arch: Arch, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        check_dim(arch.param_dim(), theta.len())?;
        Ok(Self { arch, theta })
    }

    pub fn zeros(arch: Arch) -> Result<Self> {
        Self::new(arch, vec![0.0; arch.param_dim()])
    }

    /// Parameters drawn i.i.d. from `N(0, scale²)`.
    pub fn random(arch: Arch, scale: f64, seed: u64) -> Result<Self> {
        let mut rng = StreamFactory::new(seed, "model_init").stream(0);
        let theta = (0..arch.param_dim())
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(arch, theta)
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn with_theta<'a>(&self, theta: &'a [f64]) -> ModelView<'a> {
        ModelView { arch: self.arch, theta }
    }

    pub fn loss(&self, ex: &Example) -> Result<f64> {
        self.with_theta(&self.theta).loss(ex)
    }

    pub fn grad(&self, ex: &Example) -> Result<Vec<f64>> {
        self.with_theta(&self.theta).grad(ex)
    }

    /// Mean loss over a dataset.
    pub fn mean_loss(&self, data: &[Example]) -> Result<f64> {
        let total: f64 = data.iter().map(|e| self.loss(e)).sum::<Result<f64>>()?;
        Ok(total / data.len().max(1) as f64)
    }
}

/// A model architecture evaluated at borrowed parameters.
#[derive(Clone, Copy)]
struct ModelView<'a> {
    arch: Arch,
    theta: &'a [f64],
}

impl ModelView<'_> {
    fn check(&self, ex: &Example) -> Result<()> {
        check_dim(self.arch.features(), ex.x.len())?;
        if let Arch::Logistic { classes, .. } = self.arch {
            if !(ex.y >= 0.0 && ex.y < classes as f64 && ex.y.fract() == 0.0) {
                return Err(Error::invalid("label", format!("{} is not a class index below {classes}", ex.y)));
            }
        }
        Ok(())
    }

    /// Softmax probabilities of the logistic model.
    fn probabilities(&self, x: &[f64], features: usize, classes: usize) -> Vec<f64> {
        let bias = &self.theta[features * classes..];
        let logits: Vec<f64> = (0..classes)
            .map(|k| dot(&self.theta[k * features..(k + 1) * features], x) + bias[k])
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / total).collect()
    }

    fn loss(&self, ex: &Example) -> Result<f64> {
        self.check(ex)?;
        Ok(match self.arch {
            Arch::Linear { features } => {
                let r = dot(&self.theta[..features], &ex.x) + self.theta[features] - ex.y;
                0.5 * r * r
            }
            Arch::Logistic { features, classes } => {
                let bias = &self.theta[features * classes..];
                let logits: Vec<f64> = (0..classes)
                    .map(|k| dot(&self.theta[k * features..(k + 1) * features], &ex.x) + bias[k])
                    .collect();
                let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = top + logits.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
                lse - logits[ex.y as usize]
            }
        })
    }

    fn grad(&self, ex: &Example) -> Result<Vec<f64>> {
        self.check(ex)?;
        Ok(match self.arch {
            Arch::Linear { features } => {
                let r = dot(&self.theta[..features], &ex.x) + self.theta[features] - ex.y;
                let mut g: Vec<f64> = ex.x.iter().map(|x| r * x).collect();
                g.push(r);
                g
            }
            Arch::Logistic { features, classes } => {
                let mut p = self.probabilities(&ex.x, features, classes);
                p[ex.y as usize] -= 1.0;
                let mut g = Vec::with_capacity(self.arch.param_dim());
                for &pk in &p {
                    g.extend(ex.x.iter().map(|x| pk * x));
                }
                g.extend_from_slice(&p);
                g
            }
        })
    }
}

/// `min{1, C / ‖x‖} x`.
pub fn clip(x: &mut [f64], c: f64) {
    let norm = dot(x, x).sqrt();
    if norm > c {
        let s = c / norm;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// SGD hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub eta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Per-example clipping norm `C`.
    #[serde(default)]
    pub clip: Option<f64>,
    /// DP-SGD noise multiplier `γ`: `N(0, γ²C²I)` is added to the mean of
    /// the clipped gradients.
    #[serde(default)]
    pub noise: Option<f64>,
    pub seed: u64,
}

/// Every iterate of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// `θ_0 … θ_T`.
    pub thetas: Vec<Vec<f64>>,
    pub eta: f64,
    pub batch_size: usize,
    /// Row indices of each step's batch.
    pub batch_schedule: Vec<Vec<usize>>,
    /// The (clipped, noised) batch gradient applied at each step.
    pub applied: Vec<Vec<f64>>,
}

impl TrainTrace {
    pub fn steps(&self) -> usize {
        self.thetas.len() - 1
    }

    /// `(θ_t − θ_{t+1}) / η`, or zero when `η = 0`.
    pub fn batch_gradient(&self, t: usize) -> Vec<f64> {
        if self.eta == 0.0 {
            return vec![0.0; self.thetas[t].len()];
        }
        self.thetas[t]
            .iter()
            .zip(&self.thetas[t + 1])
            .map(|(a, b)| (a - b) / self.eta)
            .collect()
    }

    /// Inserts `count` no-op steps (repeated iterate, empty batch) after
    /// step `at`.
    pub fn with_noop_steps(&self, at: usize, count: usize) -> Self {
        let mut out = self.clone();
        let theta = out.thetas[at].clone();
        for _ in 0..count {
            out.thetas.insert(at, theta.clone());
            out.batch_schedule.insert(at, Vec::new());
            out.applied.insert(at, vec![0.0; theta.len()]);
        }
        out
    }
}

/// Mini-batch SGD from `model`'s parameters. Each epoch walks a fresh
/// permutation in consecutive batches; a final incomplete batch is dropped.
pub fn train_sgd(model: &ToyModel, data: &[Example], opts: &TrainOptions) -> Result<TrainTrace> {
    let n = data.len();
    if opts.batch_size == 0 || opts.batch_size > n {
        return Err(Error::invalid("batch_size", format!("{} must lie in 1..={n}", opts.batch_size)));
    }
    if !(opts.eta >= 0.0 && opts.eta.is_finite()) {
        return Err(Error::invalid("eta", format!("{} must be finite and ≥ 0", opts.eta)));
    }
    if let Some(c) = opts.clip {
        if !(c > 0.0) {
            return Err(Error::invalid("clip", format!("{c} must be positive")));
        }
    }
    let noise_sd = match (opts.noise, opts.clip) {
        (None, _) | (Some(0.0), _) => 0.0,
        (Some(g), Some(c)) if g > 0.0 && c.is_finite() => g * c,
        (Some(g), _) => {
            return Err(Error::invalid("noise", format!("noise multiplier {g} needs a finite clipping norm")))
        }
    };
    let b = opts.batch_size;
    let steps_per_epoch = n / b;
    let streams = StreamFactory::new(opts.seed, "sgd");
    let mut theta = model.theta.clone();
    let mut trace = TrainTrace {
        thetas: vec![theta.clone()],
        eta: opts.eta,
        batch_size: b,
        batch_schedule: Vec::with_capacity(opts.epochs * steps_per_epoch),
        applied: Vec::with_capacity(opts.epochs * steps_per_epoch),
    };
    for epoch in 0..opts.epochs {
        let mut rng = streams.stream(epoch as u64);
        let order = partial_shuffle(n, n, &mut rng);
        for batch in order.chunks_exact(b) {
            let view = model.with_theta(&theta);
            let mut g = vec![0.0; theta.len()];
            for &i in batch {
                let mut gi = view.grad(&data[i])?;
                if let Some(c) = opts.clip {
                    clip(&mut gi, c);
                }
                g.iter_mut().zip(&gi).for_each(|(a, v)| *a += v);
            }
            g.iter_mut().for_each(|a| *a /= b as f64);
            if noise_sd > 0.0 {
                for a in g.iter_mut() {
                    *a += noise_sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
            theta.iter_mut().zip(&g).for_each(|(t, gi)| *t -= opts.eta * gi);
            trace.thetas.push(theta.clone());
            trace.batch_schedule.push(batch.to_vec());
            trace.applied.push(g);
        }
    }
    Ok(trace)
}

/// Score used on each recovered batch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    /// `(g⋆ − μ̂₀)ᵀ Ĉ₀⁻¹ (g_batch − μ̂₀) − ‖g⋆ − μ̂₀‖²_{Ĉ₀⁻¹} / 2b`.
    Covariance,
    /// `g⋆ᵀ g_batch`.
    Scalar,
}

fn check_slice(slice: &Range<usize>, dim: usize) -> Result<()> {
    if slice.start >= slice.end || slice.end > dim {
        return Err(Error::invalid(
            "slice",
            format!("{}..{} is not a non-empty range inside 0..{dim}", slice.start, slice.end),
        ));
    }
    Ok(())
}

/// Per-example gradients at `model`'s parameters, restricted to `slice`.
pub fn gradient_matrix(model: &ToyModel, examples: &[Example], slice: &Range<usize>) -> Result<Matrix> {
    check_slice(slice, model.arch.param_dim())?;
    let rows = examples
        .iter()
        .map(|e| model.grad(e).map(|g| g[slice.clone()].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

/// Summed per-step attack score over a training trace. The target gradient
/// is taken at each step's iterate; `refs` describe per-example gradients on
/// the attacked `slice` (the whole parameter vector when `None`).
pub fn run_whitebox_attack(
    trace: &TrainTrace,
    arch: Arch,
    target: &Example,
    refs: &ReferenceEstimates,
    attack: Attack,
    slice: Option<Range<usize>>,
) -> Result<f64> {
    let dp = arch.param_dim();
    let slice = slice.unwrap_or(0..dp);
    check_slice(&slice, dp)?;
    if attack == Attack::Covariance {
        check_dim(slice.len(), refs.dim())?;
    }
    let b = trace.batch_size as f64;
    let mut total = 0.0;
    for t in 0..trace.steps() {
        check_dim(dp, trace.thetas[t].len())?;
        let g_star = ModelView { arch, theta: &trace.thetas[t] }.grad(target)?;
        let g_star = &g_star[slice.clone()];
        let g_batch = trace.batch_gradient(t);
        let g_batch = &g_batch[slice.clone()];
        total += match attack {
            Attack::Scalar => dot(g_star, g_batch),
            Attack::Covariance => {
                let dz: Vec<f64> = g_star.iter().zip(refs.mu0()).map(|(a, m)| a - m).collect();
                let dm: Vec<f64> = g_batch.iter().zip(refs.mu0()).map(|(a, m)| a - m).collect();
                let w = refs.precision_apply(&dz);
                dot(&w, &dm) - dot(&w, &dz) / (2.0 * b)
            }
        };
    }
    Ok(total)
}

/// Gaussian class blobs: `y` uniform over classes, `x ~ N(m_y, I)` with
/// class means drawn once from `N(0, separation² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobGenerator {
    means: Vec<Vec<f64>>,
}

impl BlobGenerator {
    pub fn new(features: usize, classes: usize, separation: f64, seed: u64) -> Result<Self> {
        if features == 0 || classes < 2 {
            return Err(Error::invalid("blobs", "need at least one feature and two classes"));
        }
        let mut rng = StreamFactory::new(seed, "blob_means").stream(0);
        let means = (0..classes)
            .map(|_| {
                (0..features)
                    .map(|_| separation * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Ok(Self { means })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Example {
        let y = rng.random_range(0..self.means.len());
        let x = self.means[y]
            .iter()
            .map(|m| m + rng.sample::<f64, _>(StandardNormal))
            .collect();
        Example { x, y: y as f64 }
    }

    pub fn dataset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Example> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Where the whitebox game draws examples from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Blobs(BlobGenerator),
    /// A fixed pool; datasets are drawn without replacement, references
    /// and candidates with replacement.
    Pool(Vec<Example>),
}

impl DataSource {
    fn draw<R: Rng + ?Sized>(&self, count: usize, replace: bool, rng: &mut R) -> Result<Vec<Example>> {
        match self {
            DataSource::Blobs(g) => Ok(g.dataset(count, rng)),
            DataSource::Pool(pool) if replace => {
                if pool.is_empty() {
                    return Err(Error::Empty("example pool"));
                }
                Ok((0..count).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect())
            }
            DataSource::Pool(pool) => {
                if count > pool.len() {
                    return Err(Error::invalid("n", format!("pool has {} rows, need {count}", pool.len())));
                }
                Ok(partial_shuffle(pool.len(), count, rng).into_iter().map(|i| pool[i].clone()).collect())
            }
        }
    }
}

fn default_features() -> usize {
    10
}
fn default_classes() -> usize {
    2
}
fn default_n() -> usize {
    512
}
fn default_batch() -> usize {
    64
}
fn default_epochs() -> usize {
    1
}
fn default_eta() -> f64 {
    1e-3
}
fn default_init_scale() -> f64 {
    0.01
}
fn default_separation() -> f64 {
    1.0
}
fn default_repetitions() -> usize {
    200
}
fn default_n_ref() -> usize {
    2000
}
fn default_candidates() -> usize {
    100
}
fn default_scale_max() -> f64 {
    8.0
}

/// The repeated include/exclude game against a toy logistic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhiteboxConfig {
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub clip: Option<f64>,
    #[serde(default)]
    pub noise: Option<f64>,
    /// Std of the fixed initial parameters.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    /// Std of the blob class means.
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Reference examples used to estimate gradient moments at `θ_0`.
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
    /// Size of the canary candidate pool.
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    /// Candidate `k` has its features scaled by a factor rising linearly
    /// from 1 to this value across the pool.
    #[serde(default = "default_scale_max")]
    pub candidate_scale_max: f64,
    #[serde(default = "full_mode")]
    pub cov_mode: CovMode,
    #[serde(default)]
    pub centered: bool,
    #[serde(default)]
    pub ridge: Option<f64>,
    /// Attacked parameter range `[start, end)`; everything when absent.
    #[serde(default)]
    pub slice: Option<[usize; 2]>,
    pub master_seed: u64,
}

fn full_mode() -> CovMode {
    CovMode::Full
}

/// Results of one target in the whitebox game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub candidate_index: usize,
    pub mahalanobis: f64,
    pub auc_covariance: f64,
    pub auc_scalar: f64,
    #[serde(skip)]
    pub covariance: Vec<ScoredRound>,
    #[serde(skip)]
    pub scalar: Vec<ScoredRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteboxReport {
    pub param_dim: usize,
    pub attacked_dim: usize,
    pub ridge: f64,
    pub top: TargetReport,
    pub bottom: TargetReport,
}

impl WhiteboxConfig {
    pub fn arch(&self) -> Arch {
        Arch::Logistic { features: self.features, classes: self.classes }
    }

    fn slice(&self) -> Result<Range<usize>> {
        let dp = self.arch().param_dim();
        let s = self.slice.map_or(0..dp, |[a, b]| a..b);
        check_slice(&s, dp)?;
        Ok(s)
    }

    /// Runs the game on Gaussian blobs.
    pub fn run(&self) -> Result<WhiteboxReport> {
        let blobs = BlobGenerator::new(self.features, self.classes, self.separation, self.master_seed)?;
        self.run_on(&DataSource::Blobs(blobs))
    }

    /// Runs the game: picks the top and bottom Mahalanobis candidates at
    /// `θ_0`, then for each repetition draws a dataset and a coin, puts the
    /// target at a uniform row on heads, trains, and scores both attacks.
    /// Both targets share datasets, coins and batch orders.
    pub fn run_on(&self, source: &DataSource) -> Result<WhiteboxReport> {
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "need at least one repetition"));
        }
        if self.candidates < 2 {
            return Err(Error::invalid("candidates", "need at least two candidates"));
        }
        let arch = self.arch();
        let slice = self.slice()?;
        let model = ToyModel::random(arch, self.init_scale, self.master_seed)?;
        let root = StreamFactory::new(self.master_seed, "whitebox");

        let refs_data = source.draw(self.n_ref, true, &mut root.child("reference").stream(0))?;
        let grads = gradient_matrix(&model, &refs_data, &slice)?;
        let ridge = self.ridge.map_or(Ridge::Default, Ridge::Fixed);
        let refs = estimate_reference(&grads, self.cov_mode, self.centered, ridge)?;

        let mut crng = root.child("candidates").stream(0);
        let mut candidates = source.draw(self.candidates, true, &mut crng)?;
        let last = (self.candidates - 1) as f64;
        for (k, c) in candidates.iter_mut().enumerate() {
            let s = 1.0 + (self.candidate_scale_max - 1.0) * k as f64 / last;
            c.x.iter_mut().for_each(|v| *v *= s);
        }
        let cand_grads = gradient_matrix(&model, &candidates, &slice)?;
        let rows: Vec<Vec<f64>> = cand_grads.iter_rows().map(<[f64]>::to_vec).collect();
        let ranked = rank_candidates(&rows, &refs)?;
        let (top, bottom) = (ranked[0], ranked[ranked.len() - 1]);
        let targets = [&candidates[top.0], &candidates[bottom.0]];

        let opts = |seed| TrainOptions {
            eta: self.eta,
            batch_size: self.batch_size,
            epochs: self.epochs,
            clip: self.clip,
            noise: self.noise,
            seed,
        };
        let reps = root.child("repetition");
        let per_rep: Vec<Result<[[ScoredRound; 2]; 2]>> = (0..self.repetitions)
            .into_par_iter()
            .map(|r| {
                let mut rng = reps.stream(r as u64);
                let b = u8::from(rng.random_bool(0.5));
                let data = source.draw(self.n, false, &mut rng)?;
                let row = rng.random_range(0..self.n);
                let train_seed: u64 = rng.random();
                let mut out = [[ScoredRound { score: 0.0, b }; 2]; 2];
                for (slot, target) in out.iter_mut().zip(targets) {
                    let mut data = data.clone();
                    if b == 1 {
                        data[row] = target.clone();
                    }
                    let trace = train_sgd(&model, &data, &opts(train_seed))?;
                    for (cell, attack) in slot.iter_mut().zip([Attack::Covariance, Attack::Scalar]) {
                        cell.score = run_whitebox_attack(&trace, arch, target, &refs, attack, Some(slice.clone()))?;
                    }
                }
                Ok(out)
            })
            .collect();
        let mut cols: [[Vec<ScoredRound>; 2]; 2] = Default::default();
        for (r, res) in per_rep.into_iter().enumerate() {
            let rounds = res.map_err(|e| Error::Round { round: r, source: Box::new(e) })?;
            for i in 0..2 {
                for j in 0..2 {
                    cols[i][j].push(rounds[i][j]);
                }
            }
        }
        let [[top_cov, top_scal], [bot_cov, bot_scal]] = cols;
        let report = |(index, m): (usize, f64), cov: Vec<ScoredRound>, scal: Vec<ScoredRound>| {
            Ok::<_, Error>(TargetReport {
                candidate_index: index,
                mahalanobis: m,
                auc_covariance: roc(&cov)?.auc,
                auc_scalar: roc(&scal)?.auc,
                covariance: cov,
                scalar: scal,
            })
        };
        Ok(WhiteboxReport {
            param_dim: arch.param_dim(),
            attacked_dim: slice.len(),
            ridge: refs.ridge(),
            top: report(top, top_cov, top_scal)?,
            bottom: report(bottom, bot_cov, bot_scal)?,
        })
    }
}
