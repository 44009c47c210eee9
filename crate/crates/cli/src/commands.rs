use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use proje_core::eval::{evaluate, top_candidates, EvalReport, CSV_HEADER};
use proje_core::kg::{
    load_vocab_dump, save_triples, save_vocab_dump, Interner, TokenKind, Vocabulary,
};
use proje_core::sweep::{run_sweep, write_sweep_csv, SWEEP_RATES};
use proje_core::synthetic::BlockGraphSpec;
use proje_core::training::{CsvCurveSink, Validation};
use proje_core::{
    load_checkpoint, save_checkpoint, train, CheckpointMeta, DataError, EpochMetrics,
    KnowledgeGraph, ModelConfig, Query, ReportSink, TrainError, TrainOptions,
};

use crate::args::{
    Command, DataArgs, EvalCmd, HyperArgs, PredictCmd, SweepCmd, SynthCmd, TrainCmd,
};

/// A bad flag value or combination; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(c) => cmd_train(c),
        Command::Eval(c) => cmd_eval(c),
        Command::Predict(c) => cmd_predict(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Synth(c) => cmd_synth(c),
    }
}

fn load_graph(data: &DataArgs) -> Result<KnowledgeGraph> {
    let graph = match (&data.entities, &data.relations) {
        (Some(e), Some(r)) => {
            let vocab = Vocabulary {
                entities: load_vocab_dump(e)?,
                relations: load_vocab_dump(r)?,
            };
            KnowledgeGraph::load_fixed(
                vocab,
                &data.train,
                data.valid.as_deref(),
                data.test.as_deref(),
            )?
        }
        _ => KnowledgeGraph::load(&data.train, data.valid.as_deref(), data.test.as_deref())?,
    };
    eprintln!(
        "data: {} entities, {} relations, {} train / {} valid / {} test triples",
        graph.n_entities(),
        graph.n_relations(),
        graph.train().len(),
        graph.valid().len(),
        graph.test().len()
    );
    Ok(graph)
}

fn model_config(h: &HyperArgs) -> Result<ModelConfig> {
    let d = ModelConfig::defaults(h.task);
    let cfg = ModelConfig {
        task: h.task,
        variant: h.variant,
        k: h.k.unwrap_or(d.k),
        dropout: h.dropout.unwrap_or(d.dropout),
        l1_weight: h.alpha.unwrap_or(d.l1_weight),
        learning_rate: h.lr.unwrap_or(d.learning_rate),
        batch_size: h.batch.unwrap_or(d.batch_size),
        sampling_p: h.py.unwrap_or(d.sampling_p),
    };
    cfg.validate().map_err(|e| usage(e.0))?;
    Ok(cfg)
}

fn train_error(e: TrainError) -> anyhow::Error {
    match e {
        TrainError::Config(c) => usage(c.0),
        other => other.into(),
    }
}

struct Progress {
    epochs: usize,
    curve: Option<CsvCurveSink<BufWriter<File>>>,
}

impl ReportSink for Progress {
    fn record(&mut self, m: &EpochMetrics) -> io::Result<()> {
        match &m.eval {
            Some(r) => eprintln!(
                "epoch {}/{} mean_loss={:.6} mr_filtered={:.3} hits_filtered={:.4}",
                m.epoch, self.epochs, m.mean_loss, r.mean_rank_filtered, r.hits_filtered
            ),
            None => eprintln!(
                "epoch {}/{} mean_loss={:.6}",
                m.epoch, self.epochs, m.mean_loss
            ),
        }
        match &mut self.curve {
            Some(c) => c.record(m),
            None => Ok(()),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn cmd_train(c: TrainCmd) -> Result<()> {
    let cfg = model_config(&c.hyper)?;
    let validation = c.validate.map(|split| Validation {
        split,
        limit: c.validate_limit,
        hits_k: cfg.task.default_hits_k(),
    });
    eprintln!(
        "config: {cfg} epochs={} seed={}",
        c.hyper.epochs, c.hyper.seed
    );
    let graph = load_graph(&c.data)?;
    if let Some(v) = &validation {
        if graph.split(v.split).is_empty() {
            return Err(usage(format!(
                "--validate {} needs a non-empty --{} file",
                v.split, v.split
            )));
        }
    }
    if let Some(dir) = &c.vocab_out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        save_vocab_dump(dir.join("entities.tsv"), &graph.vocab().entities)?;
        save_vocab_dump(dir.join("relations.tsv"), &graph.vocab().relations)?;
    }
    let curve = match &c.curve {
        Some(p) => Some(CsvCurveSink::new(create(p)?, validation.is_some())),
        None => None,
    };
    let mut progress = Progress {
        epochs: c.hyper.epochs,
        curve,
    };
    let options = TrainOptions {
        validation,
        ..TrainOptions::new(c.hyper.epochs, c.hyper.seed)
    };
    let outcome = train(&graph, &cfg, &options, &mut progress).map_err(train_error)?;
    if let Some(path) = &c.out {
        let meta = CheckpointMeta {
            task: cfg.task,
            variant: cfg.variant,
        };
        save_checkpoint(path, &outcome.params, meta)
            .with_context(|| format!("cannot write checkpoint {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn print_report(report: &EvalReport, csv: Option<&Path>) -> Result<()> {
    eprint!("{}", report.table());
    println!("{CSV_HEADER}");
    println!("{}", report.csv_row());
    if let Some(path) = csv {
        let mut out = create(path)?;
        writeln!(out, "{CSV_HEADER}")?;
        writeln!(out, "{}", report.csv_row())?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_eval(c: EvalCmd) -> Result<()> {
    let (params, meta) = load_checkpoint(&c.checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", c.checkpoint.display()))?;
    let hits_k = c.hits_k.unwrap_or(meta.task.default_hits_k());
    if hits_k == 0 {
        return Err(usage("--hits-k must be at least 1"));
    }
    eprintln!(
        "config: checkpoint={} task={} variant={} k={} split={} hits_k={hits_k}",
        c.checkpoint.display(),
        meta.task,
        meta.variant,
        params.k(),
        c.split
    );
    let graph = load_graph(&c.data)?;
    let report = evaluate(&graph, &params, meta.task, c.split, hits_k)?;
    print_report(&report, c.csv.as_deref())
}

/// Names sharing the longest available prefix with `token`, at most five.
fn prefix_matches<'a>(interner: &'a Interner, token: &'a str) -> Vec<&'a str> {
    let mut cut = token.len();
    while cut > 0 {
        if token.is_char_boundary(cut) {
            let mut found: Vec<&str> = interner.with_prefix(&token[..cut]).collect();
            if !found.is_empty() {
                found.sort_unstable();
                found.truncate(5);
                return found;
            }
        }
        cut -= 1;
    }
    Vec::new()
}

fn resolve(vocab: &Vocabulary, kind: TokenKind, name: &str) -> Result<usize> {
    let (interner, found) = match kind {
        TokenKind::Entity => (&vocab.entities, vocab.entity_id(name)),
        TokenKind::Relation => (&vocab.relations, vocab.relation_id(name)),
    };
    match found {
        Ok(id) => Ok(id),
        Err(e @ DataError::UnknownToken { .. }) => {
            let near = prefix_matches(interner, name);
            if near.is_empty() {
                bail!("{e}; no {kind} shares a prefix with it");
            }
            bail!("{e}; nearest by prefix: {}", near.join(", "))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_predict(c: PredictCmd) -> Result<()> {
    let (params, meta) = load_checkpoint(&c.checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", c.checkpoint.display()))?;
    eprintln!(
        "config: checkpoint={} task={} variant={} k={} top={} filter={}",
        c.checkpoint.display(),
        meta.task,
        meta.variant,
        params.k(),
        c.top,
        c.filter
    );
    let graph = load_graph(&c.data)?;
    if graph.n_entities() != params.n_entities() || graph.n_relations() != params.n_relations() {
        bail!(
            "vocabulary mismatch: model has {} entities / {} relations, graph has {} entities / {} relations",
            params.n_entities(),
            params.n_relations(),
            graph.n_entities(),
            graph.n_relations()
        );
    }
    let vocab = graph.vocab();
    let entity = |n: &str| resolve(vocab, TokenKind::Entity, n);
    let relation = |n: &str| resolve(vocab, TokenKind::Relation, n);
    let query = match (&c.head, &c.relation, &c.tail) {
        (Some(h), Some(r), None) => Query::Tail {
            head: entity(h)?,
            relation: relation(r)?,
        },
        (None, Some(r), Some(t)) => Query::Head {
            relation: relation(r)?,
            tail: entity(t)?,
        },
        (Some(h), None, Some(t)) => Query::Relation {
            head: entity(h)?,
            tail: entity(t)?,
        },
        _ => {
            return Err(usage(
                "give exactly two of --head, --relation, --tail (the missing one is predicted)",
            ))
        }
    };
    let top = top_candidates(&graph, &params, meta.variant, &query, c.top, c.filter);
    let names = match query {
        Query::Relation { .. } => &vocab.relations,
        _ => &vocab.entities,
    };
    let mut out = io::stdout().lock();
    for (rank, (id, score)) in top.into_iter().enumerate() {
        writeln!(
            out,
            "{}\t{}\t{score:.6}",
            rank + 1,
            names.name(id).unwrap_or("?")
        )?;
    }
    Ok(())
}

fn cmd_sweep(c: SweepCmd) -> Result<()> {
    let cfg = model_config(&c.hyper)?;
    let rates = c.rates.clone().unwrap_or_else(|| SWEEP_RATES.to_vec());
    for &p in &rates {
        ModelConfig {
            sampling_p: p,
            ..cfg.clone()
        }
        .validate()
        .map_err(|e| usage(e.0))?;
    }
    let hits_k = c.hits_k.unwrap_or(cfg.task.default_hits_k());
    if hits_k == 0 {
        return Err(usage("--hits-k must be at least 1"));
    }
    let rate_list: Vec<String> = rates.iter().map(f64::to_string).collect();
    eprintln!(
        "config: {cfg} epochs={} seed={} rates={} split={} hits_k={hits_k} parallel={}",
        c.hyper.epochs,
        c.hyper.seed,
        rate_list.join(","),
        c.split,
        c.parallel
    );
    let graph = load_graph(&c.data)?;
    if graph.split(c.split).is_empty() {
        return Err(usage(format!(
            "--split {} needs a non-empty --{} file",
            c.split, c.split
        )));
    }
    let options = TrainOptions::new(c.hyper.epochs, c.hyper.seed);
    let rows = run_sweep(&graph, &cfg, &options, &rates, c.split, hits_k, c.parallel)
        .map_err(train_error)?;
    for row in &rows {
        eprintln!(
            "p_y={} mr_filtered={:.3} hits_filtered={:.4}",
            row.p_y, row.report.mean_rank_filtered, row.report.hits_filtered
        );
    }
    match &c.out {
        Some(path) => {
            let mut out = create(path)?;
            write_sweep_csv(&mut out, &rows)?;
            out.flush()?;
        }
        None => write_sweep_csv(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn cmd_synth(c: SynthCmd) -> Result<()> {
    let spec = BlockGraphSpec {
        seed: c.seed,
        ..BlockGraphSpec::default()
    };
    eprintln!(
        "config: entities={} relations={} block_size={} test_fraction={} seed={}",
        spec.n_entities, spec.n_relations, spec.block_size, spec.test_fraction, spec.seed
    );
    let graph = spec.build();
    fs::create_dir_all(&c.out_dir)
        .with_context(|| format!("cannot create {}", c.out_dir.display()))?;
    save_triples(c.out_dir.join("train.tsv"), graph.train(), graph.vocab())?;
    save_triples(c.out_dir.join("test.tsv"), graph.test(), graph.vocab())?;
    eprintln!(
        "wrote {} train and {} test triples to {}",
        graph.train().len(),
        graph.test().len(),
        c.out_dir.display()
    );
    Ok(())
}
