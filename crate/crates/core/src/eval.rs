//! Raw and filtered ranking metrics.
//!
//! Entity prediction asks two queries per held-out triple (head replaced and
//! tail replaced) and ranks every entity; relation prediction asks one query
//! and ranks every relation. Filtered ranks skip competitors that form a true
//! triple anywhere in train, valid, or test.
//!
//! Ties are broken by ID: an equal-scoring competitor with a lower ID ranks
//! ahead of the target.

use std::fmt;

use thiserror::Error;

use crate::kg::{KnowledgeGraph, Split, Triple};
use crate::model::{Direction, ModelParams, Query, Task, Variant};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("split `{0}` has no triples to evaluate")]
    EmptySplit(String),
    #[error(
        "vocabulary mismatch: model has {model_entities} entities / {model_relations} relations, \
         graph has {graph_entities} entities / {graph_relations} relations"
    )]
    ShapeMismatch {
        model_entities: usize,
        model_relations: usize,
        graph_entities: usize,
        graph_relations: usize,
    },
    #[error("HITS cutoff must be at least 1")]
    BadHitsK,
}

/// Rank (1-based) of `target` among the unmasked entries of `scores`.
///
/// `filter[j] == true` removes competitor `j`. Panics if the target itself
/// is filtered.
pub fn rank_of_target(scores: &[f64], target: usize, filter: Option<&[bool]>) -> usize {
    if let Some(f) = filter {
        assert_eq!(f.len(), scores.len(), "filter mask length mismatch");
        assert!(!f[target], "target {target} is masked out");
    }
    let s = scores[target];
    let mut rank = 1;
    for (j, &other) in scores.iter().enumerate() {
        if j == target || filter.is_some_and(|f| f[j]) {
            continue;
        }
        if other > s || (other == s && j < target) {
            rank += 1;
        }
    }
    rank
}

/// Raw and filtered rank of one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryRank {
    pub raw: usize,
    pub filtered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub split: String,
    pub mean_rank_raw: f64,
    pub mean_rank_filtered: f64,
    pub hits_raw: f64,
    pub hits_filtered: f64,
    pub hits_k: usize,
    pub n_queries: usize,
}

pub const CSV_HEADER: &str = "task,split,mr_raw,mr_filtered,hits_raw,hits_filtered,k,n_queries";

impl EvalReport {
    pub fn from_ranks(task: Task, split: &str, ranks: &[QueryRank], hits_k: usize) -> Self {
        let n = ranks.len();
        let nf = n.max(1) as f64;
        let sum_raw: u64 = ranks.iter().map(|r| r.raw as u64).sum();
        let sum_filtered: u64 = ranks.iter().map(|r| r.filtered as u64).sum();
        let hits_raw = ranks.iter().filter(|r| r.raw <= hits_k).count();
        let hits_filtered = ranks.iter().filter(|r| r.filtered <= hits_k).count();
        Self {
            task,
            split: split.to_owned(),
            mean_rank_raw: sum_raw as f64 / nf,
            mean_rank_filtered: sum_filtered as f64 / nf,
            hits_raw: hits_raw as f64 / nf,
            hits_filtered: hits_filtered as f64 / nf,
            hits_k,
            n_queries: n,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.task,
            self.split,
            self.mean_rank_raw,
            self.mean_rank_filtered,
            self.hits_raw,
            self.hits_filtered,
            self.hits_k,
            self.n_queries
        )
    }

    /// Aligned text table: Raw/Filtered by MeanRank/HITS@k.
    pub fn table(&self) -> String {
        let hits = format!("HITS@{} (%)", self.hits_k);
        format!(
            "{task} prediction on {split} ({n} queries)\n\
             {blank:>10} {mr:>12} {hits:>12}\n\
             {raw:>10} {mrr:>12.3} {hr:>12.2}\n\
             {filt:>10} {mrf:>12.3} {hf:>12.2}\n",
            task = self.task,
            split = self.split,
            n = self.n_queries,
            blank = "",
            mr = "MeanRank",
            hits = hits,
            raw = "Raw",
            mrr = self.mean_rank_raw,
            hr = 100.0 * self.hits_raw,
            filt = "Filtered",
            mrf = self.mean_rank_filtered,
            hf = 100.0 * self.hits_filtered,
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

/// Directions evaluated for each held-out triple.
pub fn query_directions(task: Task) -> &'static [Direction] {
    match task {
        Task::EntityPrediction => &[Direction::HeadMissing, Direction::TailMissing],
        Task::RelationPrediction => &[Direction::RelationMissing],
    }
}

/// Every true answer of `query` across train, valid, and test.
pub fn true_answers<'g>(graph: &'g KnowledgeGraph, query: &Query) -> &'g [usize] {
    let index = graph.filter_index();
    match *query {
        Query::Tail { head, relation } => index.tails_of(head, relation),
        Query::Head { relation, tail } => index.heads_of(relation, tail),
        Query::Relation { head, tail } => index.rels_of(head, tail),
    }
}

/// Raw and filtered rank of `target` for `query`, ranking by logits.
///
/// Logits order candidates identically to the sigmoid and softmax scores
/// but never saturate into spurious ties.
pub fn rank_query(
    graph: &KnowledgeGraph,
    params: &ModelParams,
    query: &Query,
    target: usize,
) -> QueryRank {
    let logits = params.logits_all(query);
    let s = logits[target];
    let beats = |j: usize| {
        let other = logits[j];
        j != target && (other > s || (other == s && j < target))
    };
    let raw = 1 + (0..logits.len()).filter(|&j| beats(j)).count();
    let filtered_out = true_answers(graph, query)
        .iter()
        .filter(|&&j| beats(j))
        .count();
    QueryRank {
        raw,
        filtered: raw - filtered_out,
    }
}

fn check_shapes(graph: &KnowledgeGraph, params: &ModelParams) -> Result<(), EvalError> {
    if graph.n_entities() != params.n_entities() || graph.n_relations() != params.n_relations() {
        return Err(EvalError::ShapeMismatch {
            model_entities: params.n_entities(),
            model_relations: params.n_relations(),
            graph_entities: graph.n_entities(),
            graph_relations: graph.n_relations(),
        });
    }
    Ok(())
}

/// Ranks of every query from `triples`, in triple order (head query before
/// tail query for entity prediction).
pub fn rank_triples(
    graph: &KnowledgeGraph,
    params: &ModelParams,
    task: Task,
    triples: &[Triple],
) -> Vec<QueryRank> {
    let dirs = query_directions(task);
    let rank_one = |t: &Triple| -> Vec<QueryRank> {
        dirs.iter()
            .map(|&d| {
                rank_query(
                    graph,
                    params,
                    &Query::from_triple(t, d),
                    Query::answer_in(d, t),
                )
            })
            .collect()
    };
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(triples.len().div_ceil(64).max(1));
    if workers <= 1 {
        return triples.iter().flat_map(rank_one).collect();
    }
    let chunk = triples.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = triples
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().flat_map(rank_one).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    })
}

/// Metrics over an arbitrary list of held-out triples.
pub fn evaluate_triples(
    graph: &KnowledgeGraph,
    params: &ModelParams,
    task: Task,
    triples: &[Triple],
    label: &str,
    hits_k: usize,
) -> Result<EvalReport, EvalError> {
    check_shapes(graph, params)?;
    if hits_k == 0 {
        return Err(EvalError::BadHitsK);
    }
    if triples.is_empty() {
        return Err(EvalError::EmptySplit(label.to_owned()));
    }
    let ranks = rank_triples(graph, params, task, triples);
    Ok(EvalReport::from_ranks(task, label, &ranks, hits_k))
}

/// Metrics over a stored split.
pub fn evaluate(
    graph: &KnowledgeGraph,
    params: &ModelParams,
    task: Task,
    split: Split,
    hits_k: usize,
) -> Result<EvalReport, EvalError> {
    evaluate_triples(
        graph,
        params,
        task,
        graph.split(split),
        split.as_str(),
        hits_k,
    )
}

/// Top-`n` candidates for `query` by deployed score, optionally skipping
/// known true answers.
pub fn top_candidates(
    graph: &KnowledgeGraph,
    params: &ModelParams,
    variant: Variant,
    query: &Query,
    n: usize,
    filter_known: bool,
) -> Vec<(usize, f64)> {
    let logits = params.logits_all(query);
    let scores = variant.activate(&logits);
    let known = if filter_known {
        true_answers(graph, query)
    } else {
        &[]
    };
    let mut order: Vec<usize> = (0..logits.len())
        .filter(|j| known.binary_search(j).is_err())
        .collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    order.truncate(n);
    order.into_iter().map(|j| (j, scores[j])).collect()
}
