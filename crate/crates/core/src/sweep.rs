//! Sampling-rate sweep: one training run per candidate-sampling rate.

use std::io::{self, Write};

use crate::eval::{evaluate, EvalReport};
use crate::kg::{KnowledgeGraph, Split};
use crate::model::ModelConfig;
use crate::training::{train, NullSink, TrainError, TrainOptions};

/// Default grid of negative-sampling rates.
pub const SWEEP_RATES: [f64; 5] = [0.05, 0.25, 0.50, 0.75, 0.95];

pub const SWEEP_CSV_HEADER: &str = "p_y,mr_raw,mr_filtered,hits_raw,hits_filtered";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p_y: f64,
    pub report: EvalReport,
}

impl SweepRow {
    pub fn csv_row(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{}",
            self.p_y, r.mean_rank_raw, r.mean_rank_filtered, r.hits_raw, r.hits_filtered
        )
    }
}

fn run_one(
    graph: &KnowledgeGraph,
    config: &ModelConfig,
    options: &TrainOptions,
    p_y: f64,
    split: Split,
    hits_k: usize,
) -> Result<SweepRow, TrainError> {
    let cfg = ModelConfig {
        sampling_p: p_y,
        ..config.clone()
    };
    let outcome = train(graph, &cfg, options, &mut NullSink)?;
    let report = evaluate(graph, &outcome.params, cfg.task, split, hits_k)?;
    Ok(SweepRow { p_y, report })
}

/// Trains and evaluates one model per rate with a shared seed and config.
/// With `parallel` the runs execute on scoped threads; results keep the
/// order of `rates` either way.
pub fn run_sweep(
    graph: &KnowledgeGraph,
    config: &ModelConfig,
    options: &TrainOptions,
    rates: &[f64],
    split: Split,
    hits_k: usize,
    parallel: bool,
) -> Result<Vec<SweepRow>, TrainError> {
    if !parallel {
        return rates
            .iter()
            .map(|&p| run_one(graph, config, options, p, split, hits_k))
            .collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = rates
            .iter()
            .map(|&p| scope.spawn(move || run_one(graph, config, options, p, split, hits_k)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    Ok(())
}
