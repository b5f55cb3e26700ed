//! Corpus to trained model in one call: grammar fit, regrowth negatives,
//! feature context, contrastive training.

use crate::dsl::pcfg::PcfgError;
use crate::dsl::{Game, Pcfg};
use crate::features::{FeatureContext, NormalizeError, Registry};
use crate::fitness::{build_dataset, gen_negatives, train, FitnessError, FitnessModel, Negative, TrainConfig};
use crate::trace::db::PredicateDb;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Pcfg(#[from] PcfgError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
}

pub struct Trained {
    pub pcfg: Pcfg,
    /// Carries its feature context, so it can score games directly.
    pub model: FitnessModel,
    pub negatives: Vec<Vec<Negative>>,
}

impl Trained {
    pub fn context(&self) -> &FeatureContext {
        self.model.context.as_ref().expect("pipeline models carry a context")
    }
}

/// Fits everything on `corpus`. Negatives use `train.m` corruptions per game
/// and are seeded from `train.seed`.
pub fn fit_model(corpus: &[Game], db: Option<PredicateDb>, registry: Registry, train_cfg: &TrainConfig) -> Result<Trained, PipelineError> {
    let pcfg = Pcfg::fit(corpus)?;
    let negatives = gen_negatives(corpus, &pcfg, train_cfg.m, train_cfg.seed);
    let refs: Vec<&Game> = negatives.iter().flatten().map(|n| &n.game).collect();
    let ctx = FeatureContext::fit(corpus, &refs, db, registry.clone())?;
    let data = build_dataset(&ctx, corpus, &negatives);
    let mut model = train(&data, train_cfg, registry)?;
    model.context = Some(ctx);
    Ok(Trained { pcfg, model, negatives })
}
