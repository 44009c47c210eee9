//! Per-epoch instance construction and dropout masks.

use rand::Rng;

use crate::kg::{KnowledgeGraph, Triple};
use crate::model::{ConfigError, Direction, Query, Task, TrainingInstance};
use crate::rng::RngStreams;

/// Builds one training instance per triple in `train`.
///
/// Entity task: the head or tail is dropped uniformly at random; the
/// positives are every train-split completion of the remaining pair and each
/// other entity joins the candidate list independently with probability
/// `p_y`. Relation task: the pair `(h, t)` is kept and relations are the
/// candidates. Candidates come out in ascending ID order.
pub fn build_instances(
    train: &[Triple],
    graph: &KnowledgeGraph,
    p_y: f64,
    task: Task,
    rngs: &mut RngStreams,
) -> Vec<TrainingInstance> {
    assert!((0.0..=1.0).contains(&p_y), "p_y must lie in [0, 1]");
    let index = graph.train_index();
    train
        .iter()
        .map(|t| {
            let direction = match task {
                Task::RelationPrediction => Direction::RelationMissing,
                Task::EntityPrediction => {
                    if rngs.corruption.random_bool(0.5) {
                        Direction::TailMissing
                    } else {
                        Direction::HeadMissing
                    }
                }
            };
            let (positives, pool) = match direction {
                Direction::TailMissing => (index.tails_of(t.head, t.relation), graph.n_entities()),
                Direction::HeadMissing => (index.heads_of(t.relation, t.tail), graph.n_entities()),
                Direction::RelationMissing => (index.rels_of(t.head, t.tail), graph.n_relations()),
            };
            let (candidates, labels) = sample_candidates(positives, pool, p_y, &mut rngs.sampling);
            TrainingInstance {
                query: Query::from_triple(t, direction),
                candidates,
                labels,
            }
        })
        .collect()
}

/// Merges the sorted `positives` with a Bernoulli(`p_y`) draw over the
/// remaining IDs in `0..pool`.
pub fn sample_candidates<R: Rng + ?Sized>(
    positives: &[usize],
    pool: usize,
    p_y: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<bool>) {
    let expected = positives.len() + ((pool - positives.len()) as f64 * p_y) as usize + 1;
    let mut candidates = Vec::with_capacity(expected);
    let mut labels = Vec::with_capacity(expected);
    let mut next_pos = positives.iter().peekable();
    for id in 0..pool {
        if next_pos.peek() == Some(&&id) {
            next_pos.next();
            candidates.push(id);
            labels.push(true);
            continue;
        }
        let keep = if p_y >= 1.0 {
            true
        } else if p_y <= 0.0 {
            false
        } else {
            rng.random_bool(p_y)
        };
        if keep {
            candidates.push(id);
            labels.push(false);
        }
    }
    (candidates, labels)
}

/// Inverted dropout mask: each entry is 0 with probability `p_d`, otherwise
/// `1 / (1 - p_d)`.
pub fn dropout_mask<R: Rng + ?Sized>(
    k: usize,
    p_d: f64,
    rng: &mut R,
) -> Result<Vec<f64>, ConfigError> {
    if !(0.0..1.0).contains(&p_d) {
        return Err(ConfigError(format!(
            "dropout must lie in [0, 1), got {p_d}"
        )));
    }
    if p_d == 0.0 {
        return Ok(vec![1.0; k]);
    }
    let keep = 1.0 / (1.0 - p_d);
    Ok((0..k)
        .map(|_| if rng.random::<f64>() < p_d { 0.0 } else { keep })
        .collect())
}
