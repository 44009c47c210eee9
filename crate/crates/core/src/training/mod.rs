//! Stochastic training loop.
//!
//! Each epoch rebuilds the instances (fresh corruption direction and fresh
//! negative sample per triple), shuffles them, and walks fixed-size batches.
//! A batch's gradient is the sum of its instances' gradients plus the L1
//! subgradient of the rows it touched; one lazy Adam step follows.

pub mod adam;
pub mod grad;
pub mod instances;

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::eval::{evaluate_triples, EvalError, EvalReport};
use crate::kg::{KnowledgeGraph, Split};
use crate::model::{ConfigError, ModelConfig, ModelParams};
use crate::rng::RngStreams;

pub use adam::{adam_step, AdamState};
pub use grad::{
    add_lazy_l1, backward, backward_into, l1_penalty_and_subgradient, logit_gradient, Gradients,
    SparseRows,
};
pub use instances::{build_instances, dropout_mask, sample_candidates};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("graph has no entities or no relations")]
    EmptyVocabulary,
    #[error("non-finite loss {loss} in epoch {epoch}, batch {batch}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("validation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("report sink: {0}")]
    Sink(#[from] io::Error),
}

/// Draws every scalar i.i.d. from `U[-6/sqrt(k), 6/sqrt(k)]`, walking the
/// tensors in checkpoint order.
pub fn init_params<R: Rng + ?Sized>(
    n_entities: usize,
    n_relations: usize,
    k: usize,
    rng: &mut R,
) -> Result<ModelParams, ConfigError> {
    if k == 0 {
        return Err(ConfigError("k must be at least 1".into()));
    }
    let bound = init_bound(k);
    let mut params = ModelParams::zeros(n_entities, n_relations, k);
    for tensor in params.tensors_mut() {
        for x in tensor.iter_mut() {
            *x = rng.random_range(-bound..=bound);
        }
    }
    Ok(params)
}

pub fn init_bound(k: usize) -> f64 {
    6.0 / (k as f64).sqrt()
}

/// Per-epoch validation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub split: Split,
    /// Evaluate only the first `limit` triples of the split.
    pub limit: Option<usize>,
    pub hits_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub seed: u64,
    pub validation: Option<Validation>,
}

impl TrainOptions {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            seed,
            validation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean data loss per instance (regularizer excluded).
    pub mean_loss: f64,
    pub eval: Option<EvalReport>,
}

/// Receives one record per finished epoch.
pub trait ReportSink {
    fn record(&mut self, metrics: &EpochMetrics) -> io::Result<()>;
}

/// Discards every record.
pub struct NullSink;

impl ReportSink for NullSink {
    fn record(&mut self, _: &EpochMetrics) -> io::Result<()> {
        Ok(())
    }
}

impl ReportSink for Vec<EpochMetrics> {
    fn record(&mut self, metrics: &EpochMetrics) -> io::Result<()> {
        self.push(metrics.clone());
        Ok(())
    }
}

/// Writes `epoch,mean_loss[,mr_raw,mr_filtered,hits_raw,hits_filtered]`.
pub struct CsvCurveSink<W: Write> {
    out: W,
    with_eval: bool,
    header_written: bool,
}

impl<W: Write> CsvCurveSink<W> {
    pub fn new(out: W, with_eval: bool) -> Self {
        Self {
            out,
            with_eval,
            header_written: false,
        }
    }

    pub fn header(with_eval: bool) -> &'static str {
        if with_eval {
            "epoch,mean_loss,mr_raw,mr_filtered,hits_raw,hits_filtered"
        } else {
            "epoch,mean_loss"
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> ReportSink for CsvCurveSink<W> {
    fn record(&mut self, m: &EpochMetrics) -> io::Result<()> {
        if !self.header_written {
            writeln!(self.out, "{}", Self::header(self.with_eval))?;
            self.header_written = true;
        }
        write!(self.out, "{},{}", m.epoch, m.mean_loss)?;
        if self.with_eval {
            match &m.eval {
                Some(r) => write!(
                    self.out,
                    ",{},{},{},{}",
                    r.mean_rank_raw, r.mean_rank_filtered, r.hits_raw, r.hits_filtered
                )?,
                None => write!(self.out, ",,,,")?,
            }
        }
        writeln!(self.out)?;
        self.out.flush()
    }
}

/// Training state that can be advanced one epoch at a time.
pub struct Trainer<'g> {
    graph: &'g KnowledgeGraph,
    config: ModelConfig,
    params: ModelParams,
    adam: AdamState,
    rngs: RngStreams,
    grads: Gradients,
    epoch: usize,
}

impl<'g> Trainer<'g> {
    pub fn new(
        graph: &'g KnowledgeGraph,
        config: &ModelConfig,
        seed: u64,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        let n_candidates = match config.task {
            crate::model::Task::EntityPrediction => graph.n_entities(),
            crate::model::Task::RelationPrediction => graph.n_relations(),
        };
        if graph.n_entities() == 0 || graph.n_relations() == 0 || n_candidates == 0 {
            return Err(TrainError::EmptyVocabulary);
        }
        let mut rngs = RngStreams::new(seed);
        let params = init_params(
            graph.n_entities(),
            graph.n_relations(),
            config.k,
            &mut rngs.init,
        )?;
        Ok(Self::resume(graph, config, params, rngs))
    }

    /// Continues from existing parameters with fresh optimizer moments.
    pub fn resume(
        graph: &'g KnowledgeGraph,
        config: &ModelConfig,
        params: ModelParams,
        rngs: RngStreams,
    ) -> Self {
        let adam = AdamState::new(&params);
        let grads = Gradients::zeros_like(&params);
        Self {
            graph,
            config: config.clone(),
            params,
            adam,
            rngs,
            grads,
            epoch: 0,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Runs one epoch and returns the mean per-instance data loss.
    pub fn run_epoch(&mut self) -> Result<f64, TrainError> {
        if self.graph.train().is_empty() {
            return Err(TrainError::EmptyTrain);
        }
        self.epoch += 1;
        let cfg = &self.config;
        let mut instances = build_instances(
            self.graph.train(),
            self.graph,
            cfg.sampling_p,
            cfg.task,
            &mut self.rngs,
        );
        instances.shuffle(&mut self.rngs.shuffle);

        let mut total = 0.0;
        for (batch_idx, batch) in instances.chunks(cfg.batch_size).enumerate() {
            self.grads.clear();
            let mut batch_loss = 0.0;
            for inst in batch {
                let mask = dropout_mask(cfg.k, cfg.dropout, &mut self.rngs.dropout)?;
                batch_loss += backward_into(
                    &self.params,
                    inst,
                    cfg.variant,
                    (cfg.dropout > 0.0).then_some(mask.as_slice()),
                    &mut self.grads,
                );
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch: self.epoch,
                    batch: batch_idx,
                    loss: batch_loss,
                });
            }
            add_lazy_l1(&self.params, cfg.l1_weight, &mut self.grads);
            adam_step(
                &mut self.params,
                &self.grads,
                &mut self.adam,
                cfg.learning_rate,
            );
            total += batch_loss;
        }
        Ok(total / instances.len() as f64)
    }

    /// Runs validation on the configured split.
    pub fn validate(&self, v: &Validation) -> Result<EvalReport, TrainError> {
        let triples = self.graph.split(v.split);
        let triples = match v.limit {
            Some(n) => &triples[..n.min(triples.len())],
            None => triples,
        };
        Ok(evaluate_triples(
            self.graph,
            &self.params,
            self.config.task,
            triples,
            v.split.as_str(),
            v.hits_k,
        )?)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochMetrics>,
}

/// Trains for `options.epochs` epochs, reporting each to `sink`.
pub fn train(
    graph: &KnowledgeGraph,
    config: &ModelConfig,
    options: &TrainOptions,
    sink: &mut dyn ReportSink,
) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(graph, config, options.seed)?;
    if options.epochs > 0 && graph.train().is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let mut history = Vec::with_capacity(options.epochs);
    for _ in 0..options.epochs {
        let mean_loss = trainer.run_epoch()?;
        let eval = match &options.validation {
            Some(v) => Some(trainer.validate(v)?),
            None => None,
        };
        let metrics = EpochMetrics {
            epoch: trainer.epochs_done(),
            mean_loss,
            eval,
        };
        sink.record(&metrics)?;
        history.push(metrics);
    }
    Ok(TrainOutcome {
        params: trainer.into_params(),
        history,
    })
}
