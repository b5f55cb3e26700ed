//! Contrastive fitness: a linear score `θ·φ(g)` trained so that real games
//! outscore corrupted copies of themselves.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::nodes;
use crate::dsl::{regrow, Game, Pcfg};
use crate::features::{FeatureContext, FeatureVector, Registry};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitnessError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("dataset too small: {0}")]
    TooSmall(String),
    #[error("feature registry mismatch: model has {model}, features have {found}")]
    Version { model: String, found: String },
    #[error("model has no feature context; score feature vectors instead")]
    NoContext,
}

/// Numerically stable `−log softmax(pos | pos, negs)`.
pub fn loss(pos: f64, negs: &[f64]) -> f64 {
    let m = negs.iter().copied().fold(pos, f64::max);
    let z: f64 = (pos - m).exp() + negs.iter().map(|n| (n - m).exp()).sum::<f64>();
    m + z.ln() - pos
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one positive against its negatives, and its gradient w.r.t. θ
/// added into `grad` scaled by `scale`.
pub fn loss_and_grad(theta: &[f64], pos: &[f64], negs: &[&[f64]], grad: &mut [f64], scale: f64) -> f64 {
    let fp = dot(theta, pos);
    let fn_: Vec<f64> = negs.iter().map(|x| dot(theta, x)).collect();
    let m = fn_.iter().copied().fold(fp, f64::max);
    let wp = (fp - m).exp();
    let wn: Vec<f64> = fn_.iter().map(|f| (f - m).exp()).collect();
    let z = wp + wn.iter().sum::<f64>();
    for (j, g) in grad.iter_mut().enumerate() {
        let mut e = wp / z * pos[j];
        for (w, x) in wn.iter().zip(negs) {
            e += w / z * x[j];
        }
        *g += scale * (e - pos[j]);
    }
    m + z.ln() - fp
}

/// Feature rows: one per positive, with that positive's negatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.positives.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            positives: idx.iter().map(|&i| self.positives[i].clone()).collect(),
            negatives: idx.iter().map(|&i| self.negatives[i].clone()).collect(),
        }
    }

    fn check(&self) -> Result<(), FitnessError> {
        if self.positives.len() != self.negatives.len() {
            return Err(FitnessError::TooSmall("every positive needs a negative group".into()));
        }
        let d = self.dim();
        for row in self.positives.iter().chain(self.negatives.iter().flatten()) {
            if row.len() != d {
                return Err(FitnessError::Dimension { expected: d, found: row.len() });
            }
        }
        if self.negatives.iter().any(Vec::is_empty) {
            return Err(FitnessError::TooSmall("a positive has no negatives".into()));
        }
        Ok(())
    }

    /// Mean loss of θ with every positive scored against all its negatives.
    pub fn mean_loss(&self, theta: &[f64]) -> f64 {
        let total: f64 = self
            .positives
            .iter()
            .zip(&self.negatives)
            .map(|(p, ns)| loss(dot(theta, p), &ns.iter().map(|n| dot(theta, n)).collect::<Vec<_>>()))
            .sum();
        total / self.positives.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Positives per batch.
    pub batch_size: usize,
    /// Negatives sampled per positive per epoch.
    pub k: usize,
    /// Negatives generated per positive.
    pub m: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub plateau: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { batch_size: 1, k: 1024, m: 1024, lr: 4e-3, weight_decay: 0.003, max_epochs: 25_000, plateau: 500, val_fraction: 0.1, seed: 0 }
    }
}

impl TrainConfig {
    /// Small settings for laptop-scale runs.
    pub fn desk() -> TrainConfig {
        TrainConfig { k: 32, m: 64, max_epochs: 2000, ..TrainConfig::default() }
    }

    pub fn check(&self) -> Result<(), FitnessError> {
        let bad = |m: &str| Err(FitnessError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        if self.k == 0 || self.k > self.m {
            return bad("need 1 ≤ k ≤ m");
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return bad("learning rate must be > 0 and weight decay ≥ 0");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must be in [0, 1)");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be ≥ 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Best-so-far validation loss after each epoch.
    pub best_curve: Vec<f64>,
}

/// SGD with L2 decay on the softmax contrastive loss; returns the weights
/// with the lowest validation loss.
pub fn train_weights(data: &Dataset, cfg: &TrainConfig) -> Result<(Vec<f64>, TrainReport), FitnessError> {
    cfg.check()?;
    data.check()?;
    if data.is_empty() {
        return Err(FitnessError::TooSmall("no positives".into()));
    }
    let dim = data.dim();
    let mut split_rng = rng::substream(cfg.seed, "fitness/split");
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut split_rng);
    let n_val = ((data.len() as f64 * cfg.val_fraction).round() as usize).min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train = data.subset(train_idx);
    // with no held-out positives, track the training loss instead
    let val = if n_val == 0 { train.clone() } else { data.subset(val_idx) };

    let pool: Vec<&[f64]> = train.negatives.iter().flatten().map(Vec::as_slice).collect();
    let k = cfg.k.min(pool.len());
    let mut theta = vec![0.0; dim];
    let mut best = (theta.clone(), f64::INFINITY, 0usize);
    let mut curve = Vec::new();
    let mut epoch_rng = rng::substream(cfg.seed, "fitness/epochs");
    let mut epochs = 0;
    for epoch in 0..cfg.max_epochs {
        epochs = epoch + 1;
        let mut neg_order: Vec<usize> = (0..pool.len()).collect();
        neg_order.shuffle(&mut epoch_rng);
        let mut pos_order: Vec<usize> = (0..train.len()).collect();
        pos_order.shuffle(&mut epoch_rng);
        for (b, batch) in pos_order.chunks(cfg.batch_size).enumerate() {
            let mut grad = vec![0.0; dim];
            let scale = 1.0 / batch.len() as f64;
            for (slot, &p) in batch.iter().enumerate() {
                let at = (b * cfg.batch_size + slot) * k;
                let negs: Vec<&[f64]> = (0..k).map(|j| pool[neg_order[(at + j) % pool.len()]]).collect();
                loss_and_grad(&theta, &train.positives[p], &negs, &mut grad, scale);
            }
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= cfg.lr * (g + cfg.weight_decay * *t);
            }
        }
        let v = val.mean_loss(&theta);
        if v < best.1 {
            best = (theta.clone(), v, epoch);
        } else if epoch - best.2 > cfg.plateau {
            curve.push(best.1);
            break;
        }
        curve.push(best.1);
    }
    Ok((best.0, TrainReport { epochs, best_epoch: best.2, best_val_loss: best.1, best_curve: curve }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitnessModel {
    pub registry: Registry,
    pub theta: Vec<f64>,
    pub config: TrainConfig,
    pub report: Option<TrainReport>,
    /// Needed to score games directly rather than feature vectors.
    pub context: Option<FeatureContext>,
}

impl FitnessModel {
    pub fn new(registry: Registry, theta: Vec<f64>) -> FitnessModel {
        FitnessModel { registry, theta, config: TrainConfig::default(), report: None, context: None }
    }

    pub fn check_registry(&self, r: &Registry) -> Result<(), FitnessError> {
        if r.version != self.registry.version || r.names() != self.registry.names() {
            return Err(FitnessError::Version { model: self.registry.version.clone(), found: r.version.clone() });
        }
        Ok(())
    }

    pub fn score_vector(&self, fv: &FeatureVector) -> Result<f64, FitnessError> {
        if fv.values.len() != self.theta.len() {
            return Err(FitnessError::Dimension { expected: self.theta.len(), found: fv.values.len() });
        }
        Ok(dot(&self.theta, &fv.values))
    }

    /// Scores a full-catalog vector by projecting it onto the model's registry.
    pub fn score_full(&self, full: &FeatureVector) -> Result<f64, FitnessError> {
        self.score_vector(&self.registry.project(full))
    }

    pub fn score_game(&self, g: &Game) -> Result<f64, FitnessError> {
        let ctx = self.context.as_ref().ok_or(FitnessError::NoContext)?;
        self.check_registry(&ctx.registry)?;
        self.score_vector(&ctx.extract(g))
    }
}

pub fn train(data: &Dataset, cfg: &TrainConfig, registry: Registry) -> Result<FitnessModel, FitnessError> {
    if data.dim() != registry.len() {
        return Err(FitnessError::Dimension { expected: registry.len(), found: data.dim() });
    }
    let (theta, report) = train_weights(data, cfg)?;
    Ok(FitnessModel { registry, theta, config: cfg.clone(), report: Some(report), context: None })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub config: TrainConfig,
    pub mean_loss: f64,
}

/// Contiguous fold assignment over a seeded permutation of positives.
pub fn folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::substream(seed, "fitness/folds"));
    (0..k).map(|f| order.iter().enumerate().filter(|(i, _)| i % k == f).map(|(_, &x)| x).collect()).collect()
}

/// k-fold cross-validation by positive game. Returns the config with the
/// lowest mean held-out loss (first in grid order on ties) and every result.
pub fn crossvalidate(data: &Dataset, grid: &[TrainConfig], k_folds: usize, seed: u64) -> Result<(TrainConfig, Vec<CvResult>), FitnessError> {
    if k_folds < 2 || data.len() < k_folds {
        return Err(FitnessError::TooSmall(format!("{} positives cannot form {k_folds} folds", data.len())));
    }
    let mut unique: Vec<&TrainConfig> = Vec::new();
    for c in grid {
        if !unique.contains(&c) {
            unique.push(c);
        }
    }
    if unique.is_empty() {
        return Err(FitnessError::Config("empty grid".into()));
    }
    let fs = folds(data.len(), k_folds, seed);
    let results: Vec<CvResult> = unique
        .par_iter()
        .map(|cfg| {
            let mut total = 0.0;
            for held in &fs {
                let rest: Vec<usize> = (0..data.len()).filter(|i| !held.contains(i)).collect();
                let (theta, _) = train_weights(&data.subset(&rest), cfg)?;
                total += data.subset(held).mean_loss(&theta);
            }
            Ok(CvResult { config: (*cfg).clone(), mean_loss: total / fs.len() as f64 })
        })
        .collect::<Result<_, FitnessError>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.mean_loss < results[best].mean_loss {
            best = i;
        }
    }
    Ok((results[best].config.clone(), results))
}

/// The full-scale hyperparameter grid.
pub fn default_grid(base: &TrainConfig) -> Vec<TrainConfig> {
    let mut out = Vec::new();
    for b in [1, 2, 4] {
        for k in [256, 512, 1024] {
            for lr in [1e-3, 4e-3] {
                out.push(TrainConfig { batch_size: b, k, lr, ..base.clone() });
            }
        }
    }
    out
}

/// A corrupted copy of a positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Negative {
    pub game: Game,
    pub node: usize,
    /// Height and size of the replaced subtree in the source game.
    pub height: usize,
    pub size: usize,
}

/// `m` regrowth corruptions per positive, each at a node chosen uniformly.
pub fn gen_negatives(corpus: &[Game], pcfg: &Pcfg, m: usize, seed: u64) -> Vec<Vec<Negative>> {
    corpus
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let ns = nodes::nodes(g);
            (0..m)
                .map(|j| {
                    let mut r = rng::indexed(seed, "fitness/negatives", i as u64, j as u64);
                    let n = ns.choose(&mut r).expect("a game has nodes");
                    let game = regrow(g, n.id, pcfg, &mut r).expect("node ids come from the same game");
                    Negative { game, node: n.id, height: n.height, size: n.size }
                })
                .collect()
        })
        .collect()
}

/// Extracts features for positives and their negatives.
pub fn build_dataset(ctx: &FeatureContext, positives: &[Game], negatives: &[Vec<Negative>]) -> Dataset {
    Dataset {
        positives: positives.par_iter().map(|g| ctx.extract(g).values).collect(),
        negatives: negatives.par_iter().map(|ns| ns.iter().map(|n| ctx.extract(&n.game).values).collect()).collect(),
    }
}
