//! Goal programs for a toy-room game DSL: parsing, execution over behavior
//! traces, feature extraction, contrastive fitness learning, and
//! quality-diversity search over programs.

pub mod analysis;
pub mod dsl;
pub mod features;
pub mod fitness;
pub mod interp;
pub mod pipeline;
pub mod qd;
pub mod rng;
pub mod synth;
pub mod trace;

pub use dsl::{parse_game, print_game, validate, Game, Pcfg};
pub use features::{FeatureContext, FeatureVector, Registry};
pub use fitness::{FitnessModel, TrainConfig};
pub use qd::{Archive, ArchiveKey, ExemplarSet, QdConfig};
pub use trace::{load_trace, parse_trace, Trace};
