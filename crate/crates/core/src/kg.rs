//! Triple ingestion, vocabularies, and the true-triple index.
//!
//! Triple files are UTF-8 TSV, one `head<TAB>relation<TAB>tail` per line.
//! Blank lines are skipped. IDs are assigned densely in order of first
//! appearance, so loading the same training file twice yields the same
//! vocabulary.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

/// Errors raised while reading triples or vocabulary dumps.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    Parse { line: usize, found: usize },
    #[error("line {line}: malformed vocabulary entry: {reason}")]
    VocabFormat { line: usize, reason: String },
    #[error("unknown {kind} `{token}`")]
    UnknownToken { kind: TokenKind, token: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Entity,
    Relation,
}

impl std::fmt::Display for TokenKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TokenKind::Entity => "entity",
            TokenKind::Relation => "relation",
        })
    }
}

/// One `<h, r, t>` edge as dense IDs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// A dense bijection between names and IDs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Returns the existing ID for `name`, assigning the next dense ID if new.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    /// Names starting with `prefix`, in ID order.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.names
            .iter()
            .map(String::as_str)
            .filter(move |n| n.starts_with(prefix))
    }
}

impl<S: AsRef<str>> FromIterator<S> for Interner {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut interner = Interner::default();
        for name in iter {
            interner.intern(name.as_ref());
        }
        interner
    }
}

/// Entity and relation vocabularies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub entities: Interner,
    pub relations: Interner,
}

impl Vocabulary {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, name: &str) -> Result<usize, DataError> {
        self.entities
            .id(name)
            .ok_or_else(|| DataError::UnknownToken {
                kind: TokenKind::Entity,
                token: name.to_owned(),
            })
    }

    pub fn relation_id(&self, name: &str) -> Result<usize, DataError> {
        self.relations
            .id(name)
            .ok_or_else(|| DataError::UnknownToken {
                kind: TokenKind::Relation,
                token: name.to_owned(),
            })
    }

    pub fn entity_name(&self, id: usize) -> &str {
        self.entities.name(id).expect("entity id out of range")
    }

    pub fn relation_name(&self, id: usize) -> &str {
        self.relations.name(id).expect("relation id out of range")
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Splits one TSV line into its three fields, or reports the field count.
fn split_fields(line: &str) -> Result<[&str; 3], usize> {
    let fields: Vec<&str> = line.split('\t').collect();
    match fields.as_slice() {
        [h, r, t] => Ok([*h, *r, *t]),
        other => Err(other.len()),
    }
}

/// Parses triples from a reader.
///
/// With `vocab = None` a fresh vocabulary is built in first-appearance order.
/// With a fixed vocabulary any unseen name is an error; held-out splits must
/// never extend the vocabulary built from the training split.
pub fn parse_triples<R: BufRead>(
    reader: R,
    vocab: Option<&Vocabulary>,
) -> Result<(Vec<Triple>, Vocabulary), DataError> {
    let mut fresh = Vocabulary::default();
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: "<reader>".into(),
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let [h, r, t] = split_fields(line).map_err(|found| DataError::Parse {
            line: idx + 1,
            found,
        })?;
        let triple = match vocab {
            Some(v) => Triple::new(v.entity_id(h)?, v.relation_id(r)?, v.entity_id(t)?),
            None => {
                let head = fresh.entities.intern(h);
                let relation = fresh.relations.intern(r);
                let tail = fresh.entities.intern(t);
                Triple::new(head, relation, tail)
            }
        };
        triples.push(triple);
    }
    let vocab = match vocab {
        Some(v) => v.clone(),
        None => fresh,
    };
    Ok((triples, vocab))
}

pub fn load_triples(
    path: impl AsRef<Path>,
    vocab: Option<&Vocabulary>,
) -> Result<(Vec<Triple>, Vocabulary), DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_triples(BufReader::new(file), vocab)
}

pub fn write_triples<W: Write>(
    mut out: W,
    triples: &[Triple],
    vocab: &Vocabulary,
) -> io::Result<()> {
    for t in triples {
        writeln!(
            out,
            "{}\t{}\t{}",
            vocab.entity_name(t.head),
            vocab.relation_name(t.relation),
            vocab.entity_name(t.tail)
        )?;
    }
    Ok(())
}

pub fn save_triples(
    path: impl AsRef<Path>,
    triples: &[Triple],
    vocab: &Vocabulary,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_triples(&mut out, triples, vocab).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

/// Writes a `name<TAB>id` dump, one mapping per line in ID order.
pub fn write_vocab_dump<W: Write>(mut out: W, interner: &Interner) -> io::Result<()> {
    for (id, name) in interner.names().iter().enumerate() {
        writeln!(out, "{name}\t{id}")?;
    }
    Ok(())
}

/// Reads a `name<TAB>id` dump. IDs must be dense and each name unique.
pub fn read_vocab_dump<R: BufRead>(reader: R) -> Result<Interner, DataError> {
    let mut pairs: Vec<(usize, String)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: "<reader>".into(),
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| DataError::VocabFormat {
            line: idx + 1,
            reason: reason.to_owned(),
        };
        let (name, id) = line.rsplit_once('\t').ok_or_else(|| bad("missing tab"))?;
        let id: usize = id.trim().parse().map_err(|_| bad("id is not an integer"))?;
        pairs.push((id, name.to_owned()));
    }
    pairs.sort_by_key(|(id, _)| *id);
    let mut interner = Interner::default();
    for (expected, (id, name)) in pairs.into_iter().enumerate() {
        if id != expected {
            return Err(DataError::Invalid(format!(
                "vocabulary ids are not dense: expected {expected}, found {id}"
            )));
        }
        if interner.intern(&name) != id {
            return Err(DataError::Invalid(format!(
                "duplicate vocabulary name `{name}`"
            )));
        }
    }
    Ok(interner)
}

pub fn load_vocab_dump(path: impl AsRef<Path>) -> Result<Interner, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_vocab_dump(BufReader::new(file))
}

pub fn save_vocab_dump(path: impl AsRef<Path>, interner: &Interner) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_vocab_dump(&mut out, interner).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

/// The three lookup maps over a set of true triples. Each value list is
/// sorted and free of duplicates.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails_of: HashMap<(usize, usize), Vec<usize>>,
    heads_of: HashMap<(usize, usize), Vec<usize>>,
    rels_of: HashMap<(usize, usize), Vec<usize>>,
}

fn push_sorted(set: &mut Vec<usize>, value: usize) {
    if let Err(pos) = set.binary_search(&value) {
        set.insert(pos, value);
    }
}

impl FilterIndex {
    pub fn build<'a, I>(triples: I) -> Self
    where
        I: IntoIterator<Item = &'a Triple>,
    {
        let mut index = FilterIndex::default();
        for t in triples {
            index.insert(*t);
        }
        index
    }

    pub fn insert(&mut self, t: Triple) {
        push_sorted(
            self.tails_of.entry((t.head, t.relation)).or_default(),
            t.tail,
        );
        push_sorted(
            self.heads_of.entry((t.relation, t.tail)).or_default(),
            t.head,
        );
        push_sorted(
            self.rels_of.entry((t.head, t.tail)).or_default(),
            t.relation,
        );
    }

    /// Tails `t'` with `(head, relation, t')` true.
    pub fn tails_of(&self, head: usize, relation: usize) -> &[usize] {
        self.tails_of
            .get(&(head, relation))
            .map_or(&[], Vec::as_slice)
    }

    /// Heads `h'` with `(h', relation, tail)` true.
    pub fn heads_of(&self, relation: usize, tail: usize) -> &[usize] {
        self.heads_of
            .get(&(relation, tail))
            .map_or(&[], Vec::as_slice)
    }

    /// Relations `r'` with `(head, r', tail)` true.
    pub fn rels_of(&self, head: usize, tail: usize) -> &[usize] {
        self.rels_of.get(&(head, tail)).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.tails_of(t.head, t.relation)
            .binary_search(&t.tail)
            .is_ok()
    }
}

/// Returns the three maps of `FilterIndex` for `triples`.
pub fn build_filter_index(triples: &[Triple]) -> FilterIndex {
    FilterIndex::build(triples)
}

/// Which stored split to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!(
                "unknown split `{other}` (expected train|valid|test)"
            )),
        }
    }
}

/// Vocabulary, triple splits, and the two true-triple indexes.
///
/// `train_index` covers the training split only and supplies positive
/// candidates during training. `filter_index` covers train, valid, and test
/// and drives the filtered metrics. Immutable once built.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    vocab: Vocabulary,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    train_index: FilterIndex,
    filter_index: FilterIndex,
}

impl KnowledgeGraph {
    /// Builds a graph, checking every ID against the vocabulary.
    pub fn new(
        vocab: Vocabulary,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self, DataError> {
        let (n_e, n_r) = (vocab.n_entities(), vocab.n_relations());
        for t in train.iter().chain(&valid).chain(&test) {
            if t.head >= n_e || t.tail >= n_e || t.relation >= n_r {
                return Err(DataError::Invalid(format!(
                    "triple ({}, {}, {}) out of range for n_e={n_e}, n_r={n_r}",
                    t.head, t.relation, t.tail
                )));
            }
        }
        let train_index = FilterIndex::build(&train);
        let filter_index = FilterIndex::build(train.iter().chain(&valid).chain(&test));
        Ok(Self {
            vocab,
            train,
            valid,
            test,
            train_index,
            filter_index,
        })
    }

    /// Loads train (building the vocabulary) and optional valid/test files
    /// against that fixed vocabulary.
    pub fn load(
        train: impl AsRef<Path>,
        valid: Option<&Path>,
        test: Option<&Path>,
    ) -> Result<Self, DataError> {
        let (train, vocab) = load_triples(train, None)?;
        Self::load_with_vocab(vocab, train, valid, test)
    }

    /// Like [`KnowledgeGraph::load`] but with a pre-built vocabulary that
    /// every split, including train, must conform to.
    pub fn load_fixed(
        vocab: Vocabulary,
        train: impl AsRef<Path>,
        valid: Option<&Path>,
        test: Option<&Path>,
    ) -> Result<Self, DataError> {
        let (train, vocab) = load_triples(train, Some(&vocab))?;
        Self::load_with_vocab(vocab, train, valid, test)
    }

    fn load_with_vocab(
        vocab: Vocabulary,
        train: Vec<Triple>,
        valid: Option<&Path>,
        test: Option<&Path>,
    ) -> Result<Self, DataError> {
        let read = |p: Option<&Path>| -> Result<Vec<Triple>, DataError> {
            match p {
                Some(p) => Ok(load_triples(p, Some(&vocab))?.0),
                None => Ok(Vec::new()),
            }
        };
        let valid = read(valid)?;
        let test = read(test)?;
        Self::new(vocab, train, valid, test)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_entities(&self) -> usize {
        self.vocab.n_entities()
    }

    pub fn n_relations(&self) -> usize {
        self.vocab.n_relations()
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train_index(&self) -> &FilterIndex {
        &self.train_index
    }

    pub fn filter_index(&self) -> &FilterIndex {
        &self.filter_index
    }
}
