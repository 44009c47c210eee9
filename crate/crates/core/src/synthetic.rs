//! Block-structured synthetic graphs with a deterministic completion rule.
//!
//! Entities are split into equal blocks. Relation `r` links every entity of
//! block `b` to every entity of block `b XOR (r + 1)`, so each relation is an
//! involution on blocks and every query has `block_size` true answers. A
//! seeded shuffle holds out a fraction of the triples as test.
//!
//! The XOR map keeps the rule inside what diagonal combination weights can
//! express: with blocks coded in sign patterns, flipping bits is a
//! coordinate-wise sign change.

use rand::seq::SliceRandom;

use crate::kg::{KnowledgeGraph, Triple, Vocabulary};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGraphSpec {
    pub n_entities: usize,
    pub n_relations: usize,
    pub block_size: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for BlockGraphSpec {
    /// 200 entities in 40 blocks of 5, 5 relations, 10% held out.
    fn default() -> Self {
        Self {
            n_entities: 200,
            n_relations: 5,
            block_size: 5,
            test_fraction: 0.1,
            seed: 2017,
        }
    }
}

impl BlockGraphSpec {
    pub fn n_blocks(&self) -> usize {
        self.n_entities / self.block_size
    }

    pub fn target_block(&self, relation: usize, block: usize) -> usize {
        block ^ (relation + 1)
    }

    fn check(&self) {
        assert!(self.block_size >= 1, "block size must be positive");
        assert_eq!(
            self.n_entities % self.block_size,
            0,
            "entity count must be a multiple of the block size"
        );
        let span = (self.n_relations + 1).next_power_of_two();
        assert_eq!(
            self.n_blocks() % span,
            0,
            "block count must be a multiple of {span} so XOR stays in range"
        );
        assert!((0.0..1.0).contains(&self.test_fraction));
    }

    /// Every true triple, ordered by (relation, head, tail).
    pub fn all_triples(&self) -> Vec<Triple> {
        self.check();
        let bs = self.block_size;
        let mut out = Vec::with_capacity(self.n_relations * self.n_entities * bs);
        for r in 0..self.n_relations {
            for h in 0..self.n_entities {
                let target = self.target_block(r, h / bs);
                for t in target * bs..(target + 1) * bs {
                    out.push(Triple::new(h, r, t));
                }
            }
        }
        out
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let width = self.n_entities.saturating_sub(1).to_string().len();
        Vocabulary {
            entities: (0..self.n_entities)
                .map(|i| format!("e{i:0width$}"))
                .collect(),
            relations: (0..self.n_relations).map(|i| format!("r{i}")).collect(),
        }
    }

    /// Builds the graph with train and test splits (valid left empty).
    /// Held-out triples whose entities or relation would be absent from train
    /// are moved back to train.
    pub fn build(&self) -> KnowledgeGraph {
        let mut triples = self.all_triples();
        triples.shuffle(&mut stream(self.seed, Stream::Synthetic));
        let n_test = (triples.len() as f64 * self.test_fraction).round() as usize;
        let mut test = triples.split_off(triples.len() - n_test);
        let mut train = triples;

        let mut seen = vec![false; self.n_entities];
        let mut rel_seen = vec![false; self.n_relations];
        for t in &train {
            seen[t.head] = true;
            seen[t.tail] = true;
            rel_seen[t.relation] = true;
        }
        test.retain(|t| {
            let covered = seen[t.head] && seen[t.tail] && rel_seen[t.relation];
            if !covered {
                seen[t.head] = true;
                seen[t.tail] = true;
                rel_seen[t.relation] = true;
                train.push(*t);
            }
            covered
        });
        KnowledgeGraph::new(self.vocabulary(), train, Vec::new(), test)
            .expect("synthetic triples are in range")
    }
}
