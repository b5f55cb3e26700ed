//! Corpus analyses, similarity measures, ablations and templated
//! descriptions.

mod ablation;
mod corpus;
pub mod describe;
mod edit;
pub mod stats;

pub use ablation::{component_satisfaction, compare, run_ablation, run_arm, AblationSetup, Arm, Comparison, Profile};
pub use corpus::{
    abstract_structures, coarsen_pred, coarsen_seq_func, motifs, role_filler_stats, split_of, structures_of, Motif,
    RoleFillerTable, Split, StructureReport,
};
pub use describe::describe;
pub use edit::{edit_distance, game_distance, levenshtein, nearest_real, preprocess};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("unknown ablation profile: {0}")]
    UnknownProfile(String),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
    #[error(transparent)]
    Fitness(#[from] crate::fitness::FitnessError),
}

#[cfg(test)]
mod tests;
