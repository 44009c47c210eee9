//! Parameters and forward mathematics of the projection model.
//!
//! A query supplies two known vectors `a` and `b` (entity and relation, or
//! head and tail for relation prediction). The combination layer produces
//! `c = D_a * a + D_b * b + b_c` with diagonal weights, and every candidate
//! row `w_i` of the candidate table is projected onto `tanh(c)`:
//!
//! ```text
//! logit_i = w_i . tanh(c) + b_p
//! ```
//!
//! Pointwise models score with `sigmoid(logit_i)`, listwise models with a
//! softmax over the candidate list.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kg::Triple;

/// Log arguments are clamped to `[LOG_EPS, 1 - LOG_EPS]`.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Pointwise,
    Listwise,
    /// Listwise loss weighted by the instance's positive count.
    WListwise,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Pointwise, Variant::Listwise, Variant::WListwise];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Pointwise => "pointwise",
            Variant::Listwise => "listwise",
            Variant::WListwise => "wlistwise",
        }
    }

    /// Maps logits to deployed scores (sigmoid or softmax).
    pub fn activate(self, logits: &[f64]) -> Vec<f64> {
        match self {
            Variant::Pointwise => logits.iter().map(|&x| sigmoid(x)).collect(),
            Variant::Listwise | Variant::WListwise => softmax(logits),
        }
    }

    pub fn loss(self, scores: &[f64], labels: &[bool]) -> f64 {
        match self {
            Variant::Pointwise => loss_pointwise(scores, labels),
            Variant::Listwise => loss_listwise(scores, labels),
            Variant::WListwise => loss_wlistwise(scores, labels),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pointwise" => Ok(Variant::Pointwise),
            "listwise" => Ok(Variant::Listwise),
            "wlistwise" => Ok(Variant::WListwise),
            other => Err(ConfigError(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    EntityPrediction,
    RelationPrediction,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::EntityPrediction => "entity",
            Task::RelationPrediction => "relation",
        }
    }

    /// HITS cutoff reported for the task: 10 for entities, 1 for relations.
    pub fn default_hits_k(self) -> usize {
        match self {
            Task::EntityPrediction => 10,
            Task::RelationPrediction => 1,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entity" => Ok(Task::EntityPrediction),
            "relation" => Ok(Task::RelationPrediction),
            other => Err(ConfigError(format!("unknown task `{other}`"))),
        }
    }
}

/// Which element of a triple is being predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Head known; uses `D_eh`, `D_rh`.
    TailMissing,
    /// Tail known; uses `D_et`, `D_rt`.
    HeadMissing,
    /// Head and tail known; uses `D_eh` for the head and `D_et` for the tail.
    RelationMissing,
}

/// A prediction query: the known part of a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Query {
    Tail { head: usize, relation: usize },
    Head { relation: usize, tail: usize },
    Relation { head: usize, tail: usize },
}

impl Query {
    pub fn from_triple(t: &Triple, direction: Direction) -> Self {
        match direction {
            Direction::TailMissing => Query::Tail {
                head: t.head,
                relation: t.relation,
            },
            Direction::HeadMissing => Query::Head {
                relation: t.relation,
                tail: t.tail,
            },
            Direction::RelationMissing => Query::Relation {
                head: t.head,
                tail: t.tail,
            },
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Query::Tail { .. } => Direction::TailMissing,
            Query::Head { .. } => Direction::HeadMissing,
            Query::Relation { .. } => Direction::RelationMissing,
        }
    }

    /// The element of `t` this query asks for.
    pub fn answer_in(direction: Direction, t: &Triple) -> usize {
        match direction {
            Direction::TailMissing => t.tail,
            Direction::HeadMissing => t.head,
            Direction::RelationMissing => t.relation,
        }
    }
}

/// One training input: a query, its candidate list, and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub query: Query,
    pub candidates: Vec<usize>,
    pub labels: Vec<bool>,
}

impl TrainingInstance {
    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }
}

/// Row-major dense matrix of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * dim, "embedding buffer has wrong length");
        Self { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Every learnable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub entity: Embeddings,
    pub relation: Embeddings,
    pub d_eh: Vec<f64>,
    pub d_rh: Vec<f64>,
    pub d_et: Vec<f64>,
    pub d_rt: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_p: f64,
}

/// Names of the tensors in [`ModelParams::tensors`] order.
pub const TENSOR_NAMES: [&str; 8] = ["W_E", "W_R", "D_eh", "D_rh", "D_et", "D_rt", "b_c", "b_p"];

/// Intermediate values of the combination and projection layers.
#[derive(Debug, Clone)]
pub struct Hidden {
    /// Combination output after the dropout mask, before `tanh`.
    pub combined: Vec<f64>,
    /// `tanh(combined)`.
    pub activation: Vec<f64>,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ModelParams {
    pub fn zeros(n_entities: usize, n_relations: usize, k: usize) -> Self {
        Self {
            entity: Embeddings::zeros(n_entities, k),
            relation: Embeddings::zeros(n_relations, k),
            d_eh: vec![0.0; k],
            d_rh: vec![0.0; k],
            d_et: vec![0.0; k],
            d_rt: vec![0.0; k],
            b_c: vec![0.0; k],
            b_p: 0.0,
        }
    }

    pub fn k(&self) -> usize {
        self.b_c.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entity.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.relation.rows()
    }

    /// All tensors in checkpoint order, `b_p` last as a one-element slice.
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.entity.as_slice(),
            self.relation.as_slice(),
            &self.d_eh,
            &self.d_rh,
            &self.d_et,
            &self.d_rt,
            &self.b_c,
            std::slice::from_ref(&self.b_p),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.entity.as_mut_slice(),
            self.relation.as_mut_slice(),
            &mut self.d_eh,
            &mut self.d_rh,
            &mut self.d_et,
            &mut self.d_rt,
            &mut self.b_c,
            std::slice::from_mut(&mut self.b_p),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Diagonal weights for the two known inputs of `direction`.
    pub fn diagonals(&self, direction: Direction) -> (&[f64], &[f64]) {
        match direction {
            Direction::TailMissing => (&self.d_eh, &self.d_rh),
            Direction::HeadMissing => (&self.d_et, &self.d_rt),
            Direction::RelationMissing => (&self.d_eh, &self.d_et),
        }
    }

    /// The two known input vectors of `query`.
    pub fn inputs(&self, query: &Query) -> (&[f64], &[f64]) {
        match *query {
            Query::Tail { head, relation } => (self.entity.row(head), self.relation.row(relation)),
            Query::Head { relation, tail } => (self.entity.row(tail), self.relation.row(relation)),
            Query::Relation { head, tail } => (self.entity.row(head), self.entity.row(tail)),
        }
    }

    /// Table the candidates of `direction` are drawn from.
    pub fn candidate_table(&self, direction: Direction) -> &Embeddings {
        match direction {
            Direction::RelationMissing => &self.relation,
            _ => &self.entity,
        }
    }

    /// `D_a * a + D_b * b + b_c`, elementwise.
    pub fn combine(&self, a: &[f64], b: &[f64], direction: Direction) -> Vec<f64> {
        let k = self.k();
        assert!(
            a.len() == k && b.len() == k,
            "combine: input lengths ({}, {}) do not match k = {k}",
            a.len(),
            b.len()
        );
        let (da, db) = self.diagonals(direction);
        (0..k)
            .map(|i| da[i] * a[i] + db[i] * b[i] + self.b_c[i])
            .collect()
    }

    /// Combination layer followed by optional dropout mask and `tanh`.
    pub fn hidden(&self, query: &Query, mask: Option<&[f64]>) -> Hidden {
        let (a, b) = self.inputs(query);
        let mut combined = self.combine(a, b, query.direction());
        if let Some(mask) = mask {
            assert_eq!(mask.len(), combined.len(), "dropout mask length != k");
            for (c, m) in combined.iter_mut().zip(mask) {
                *c *= m;
            }
        }
        let activation = combined.iter().map(|c| c.tanh()).collect();
        Hidden {
            combined,
            activation,
        }
    }

    /// Projection logits `w_i . tanh(c) + b_p` for each candidate.
    pub fn logits(&self, query: &Query, candidates: &[usize], mask: Option<&[f64]>) -> Vec<f64> {
        let hidden = self.hidden(query, mask);
        self.project(query.direction(), &hidden.activation, candidates)
    }

    pub(crate) fn project(
        &self,
        direction: Direction,
        activation: &[f64],
        candidates: &[usize],
    ) -> Vec<f64> {
        let table = self.candidate_table(direction);
        candidates
            .iter()
            .map(|&c| dot(table.row(c), activation) + self.b_p)
            .collect()
    }

    /// Logits against every row of the candidate table.
    pub fn logits_all(&self, query: &Query) -> Vec<f64> {
        let hidden = self.hidden(query, None);
        let table = self.candidate_table(query.direction());
        (0..table.rows())
            .map(|c| dot(table.row(c), &hidden.activation) + self.b_p)
            .collect()
    }

    /// Sigmoid scores, one per candidate.
    pub fn score_pointwise(&self, instance: &TrainingInstance, mask: Option<&[f64]>) -> Vec<f64> {
        let logits = self.logits(&instance.query, &instance.candidates, mask);
        Variant::Pointwise.activate(&logits)
    }

    /// Softmax distribution over the candidate list.
    pub fn score_listwise(&self, instance: &TrainingInstance, mask: Option<&[f64]>) -> Vec<f64> {
        let logits = self.logits(&instance.query, &instance.candidates, mask);
        Variant::Listwise.activate(&logits)
    }

    pub fn score(
        &self,
        variant: Variant,
        instance: &TrainingInstance,
        mask: Option<&[f64]>,
    ) -> Vec<f64> {
        let logits = self.logits(&instance.query, &instance.candidates, mask);
        variant.activate(&logits)
    }
}

/// Number of learnable scalars, found by walking every tensor.
pub fn count_parameters(params: &ModelParams) -> usize {
    params.tensors().iter().map(|t| t.len()).sum()
}

/// `n_e*k + n_r*k + 5k + 1`.
pub fn expected_parameter_count(n_entities: usize, n_relations: usize, k: usize) -> usize {
    n_entities * k + n_relations * k + 5 * k + 1
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max-logit subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

#[inline]
fn clamped_ln(p: f64) -> f64 {
    p.clamp(LOG_EPS, 1.0 - LOG_EPS).ln()
}

fn check_aligned(scores: &[f64], labels: &[bool]) {
    assert_eq!(scores.len(), labels.len(), "scores and labels must align");
}

/// `-sum_pos ln s_i - sum_neg ln(1 - s_j)`, summed over the sampled negatives.
pub fn loss_pointwise(scores: &[f64], labels: &[bool]) -> f64 {
    check_aligned(scores, labels);
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            if y {
                -clamped_ln(s)
            } else {
                -clamped_ln(1.0 - s)
            }
        })
        .sum()
}

/// Cross-entropy against the uniform target `1 / n_pos` on positives.
pub fn loss_listwise(scores: &[f64], labels: &[bool]) -> f64 {
    check_aligned(scores, labels);
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 {
        return 0.0;
    }
    loss_wlistwise(scores, labels) / n_pos as f64
}

/// `-sum_pos ln s_i`: the listwise loss scaled by the positive count.
pub fn loss_wlistwise(scores: &[f64], labels: &[bool]) -> f64 {
    check_aligned(scores, labels);
    scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y)
        .map(|(&s, _)| -clamped_ln(s))
        .sum()
}

/// Hyperparameters of a model and its training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub task: Task,
    pub variant: Variant,
    pub k: usize,
    pub dropout: f64,
    pub l1_weight: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub sampling_p: f64,
}

impl ModelConfig {
    /// Published defaults: lr 0.01, batch 200, alpha 1e-5, dropout 0.5, with
    /// k = 200, p_y = 0.5 for entities and k = 100, p_y = 0.75 for relations.
    pub fn defaults(task: Task) -> Self {
        let (k, sampling_p) = match task {
            Task::EntityPrediction => (200, 0.5),
            Task::RelationPrediction => (100, 0.75),
        };
        Self {
            task,
            variant: Variant::WListwise,
            k,
            dropout: 0.5,
            l1_weight: 1e-5,
            learning_rate: 0.01,
            batch_size: 200,
            sampling_p,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError("k must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ConfigError("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ConfigError(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(0.0..=1.0).contains(&self.sampling_p) {
            return Err(ConfigError(format!(
                "sampling probability must lie in [0, 1], got {}",
                self.sampling_p
            )));
        }
        if !(self.l1_weight >= 0.0 && self.l1_weight.is_finite()) {
            return Err(ConfigError(format!(
                "L1 weight must be a finite non-negative number, got {}",
                self.l1_weight
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ConfigError(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "task={} variant={} k={} lr={} batch={} alpha={:e} dropout={} p_y={}",
            self.task,
            self.variant,
            self.k,
            self.learning_rate,
            self.batch_size,
            self.l1_weight,
            self.dropout,
            self.sampling_p
        )
    }
}
