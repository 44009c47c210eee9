//! Shared fixtures for the criterion benches.

use proje_core::model::{ModelConfig, Task, Variant};
use proje_core::synthetic::BlockGraphSpec;
use proje_core::KnowledgeGraph;

/// The default 200-entity block graph.
pub fn block_graph() -> KnowledgeGraph {
    BlockGraphSpec::default().build()
}

/// Entity-task defaults scaled down to `k`.
pub fn scaled_config(k: usize, variant: Variant) -> ModelConfig {
    ModelConfig {
        k,
        variant,
        ..ModelConfig::defaults(Task::EntityPrediction)
    }
}
