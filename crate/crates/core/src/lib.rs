//! Knowledge graph completion by embedding projection.
//!
//! A query (an entity and a relation, or two entities) is merged by a
//! diagonal combination layer into a target vector; every candidate
//! embedding is projected onto that vector to produce its ranking score.
//! The crate covers triple ingestion ([`kg`]), the model and its losses
//! ([`model`]), hand-derived gradients with lazy Adam ([`training`]), raw and
//! filtered ranking metrics ([`eval`]), and a binary checkpoint format
//! ([`checkpoint`]).

pub mod checkpoint;
pub mod eval;
pub mod kg;
pub mod model;
pub mod rng;
pub mod sweep;
pub mod synthetic;
pub mod training;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CheckpointMeta};
pub use eval::{evaluate, evaluate_triples, rank_of_target, EvalError, EvalReport, QueryRank};
pub use kg::{
    build_filter_index, load_triples, DataError, FilterIndex, KnowledgeGraph, Split, Triple,
    Vocabulary,
};
pub use model::{
    count_parameters, ConfigError, Direction, ModelConfig, ModelParams, Query, Task,
    TrainingInstance, Variant,
};
pub use rng::RngStreams;
pub use training::{train, EpochMetrics, ReportSink, TrainError, TrainOptions, TrainOutcome};
