//! Independent scalar-loop reference implementations used as test oracles.
//! Nothing here calls the crate's forward, loss, or ranking code.
#![allow(dead_code, clippy::needless_range_loop)]

use proje_core::kg::{KnowledgeGraph, Triple, Vocabulary};
use proje_core::model::{ModelParams, Query, TrainingInstance, Variant, TENSOR_NAMES};
use proje_core::training::{backward, Gradients, SparseRows};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entity(p: &ModelParams, i: usize, j: usize) -> f64 {
    p.entity.as_slice()[i * p.k() + j]
}

fn relation(p: &ModelParams, i: usize, j: usize) -> f64 {
    p.relation.as_slice()[i * p.k() + j]
}

/// Straight-line logits for a query against the given candidate IDs.
pub fn oracle_logits(
    p: &ModelParams,
    query: &Query,
    candidates: &[usize],
    mask: Option<&[f64]>,
) -> Vec<f64> {
    let k = p.k();
    let mut z = vec![0.0; k];
    for j in 0..k {
        let c = match *query {
            Query::Tail { head, relation: r } => {
                p.d_eh[j] * entity(p, head, j) + p.d_rh[j] * relation(p, r, j) + p.b_c[j]
            }
            Query::Head { relation: r, tail } => {
                p.d_et[j] * entity(p, tail, j) + p.d_rt[j] * relation(p, r, j) + p.b_c[j]
            }
            Query::Relation { head, tail } => {
                p.d_eh[j] * entity(p, head, j) + p.d_et[j] * entity(p, tail, j) + p.b_c[j]
            }
        };
        let m = mask.map_or(1.0, |m| m[j]);
        z[j] = (c * m).tanh();
    }
    let mut out = Vec::new();
    for &cand in candidates {
        let mut s = p.b_p;
        for j in 0..k {
            let w = match query {
                Query::Relation { .. } => relation(p, cand, j),
                _ => entity(p, cand, j),
            };
            s += w * z[j];
        }
        out.push(s);
    }
    out
}

pub fn oracle_scores(variant: Variant, logits: &[f64]) -> Vec<f64> {
    match variant {
        Variant::Pointwise => logits.iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect(),
        _ => {
            let mut m = f64::NEG_INFINITY;
            for &x in logits {
                if x > m {
                    m = x;
                }
            }
            let mut total = 0.0;
            for &x in logits {
                total += (x - m).exp();
            }
            logits.iter().map(|&x| (x - m).exp() / total).collect()
        }
    }
}

pub fn oracle_loss(variant: Variant, scores: &[f64], labels: &[bool]) -> f64 {
    let clamp = |s: f64| s.clamp(1e-12, 1.0 - 1e-12);
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let mut loss = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        match (variant, labels[i]) {
            (Variant::Pointwise, true) => loss -= clamp(s).ln(),
            (Variant::Pointwise, false) => loss -= (1.0 - clamp(s)).ln(),
            (Variant::Listwise, true) => loss -= clamp(s).ln() / n_pos,
            (Variant::WListwise, true) => loss -= clamp(s).ln(),
            _ => {}
        }
    }
    loss
}

pub fn oracle_instance_loss(
    p: &ModelParams,
    inst: &TrainingInstance,
    variant: Variant,
    mask: Option<&[f64]>,
) -> f64 {
    let logits = oracle_logits(p, &inst.query, &inst.candidates, mask);
    oracle_loss(variant, &oracle_scores(variant, &logits), &inst.labels)
}

pub fn random_params<R: Rng>(
    rng: &mut R,
    n_e: usize,
    n_r: usize,
    k: usize,
    scale: f64,
) -> ModelParams {
    let mut p = ModelParams::zeros(n_e, n_r, k);
    for t in p.tensors_mut() {
        for x in t.iter_mut() {
            *x = rng.random_range(-scale..scale);
        }
    }
    p
}

/// Random query with a duplicate-free candidate list and at least one positive.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    n_e: usize,
    n_r: usize,
    kind: usize,
) -> TrainingInstance {
    let (query, pool) = match kind % 3 {
        0 => (
            Query::Tail {
                head: rng.random_range(0..n_e),
                relation: rng.random_range(0..n_r),
            },
            n_e,
        ),
        1 => (
            Query::Head {
                relation: rng.random_range(0..n_r),
                tail: rng.random_range(0..n_e),
            },
            n_e,
        ),
        _ => (
            Query::Relation {
                head: rng.random_range(0..n_e),
                tail: rng.random_range(0..n_e),
            },
            n_r,
        ),
    };
    let mut candidates: Vec<usize> = (0..pool).filter(|_| rng.random_bool(0.7)).collect();
    if candidates.is_empty() {
        candidates.push(rng.random_range(0..pool));
    }
    let mut labels: Vec<bool> = candidates.iter().map(|_| rng.random_bool(0.4)).collect();
    let pick = rng.random_range(0..labels.len());
    labels[pick] = true;
    TrainingInstance {
        query,
        candidates,
        labels,
    }
}

/// Exhaustive rank: sort all candidates by score (desc, then id) and scan.
pub fn oracle_rank(scores: &[f64], target: usize, ignored: &[usize]) -> usize {
    let mut order: Vec<usize> = (0..scores.len())
        .filter(|j| *j == target || !ignored.contains(j))
        .collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order.iter().position(|&j| j == target).unwrap() + 1
}

/// Mean rank and HITS@k (raw, filtered) by exhaustive enumeration.
/// `truth` is the full set of true triples; `entity_task` selects two
/// queries per triple (head then tail) or one relation query.
pub fn oracle_metrics(
    p: &ModelParams,
    variant: Variant,
    truth: &[Triple],
    held_out: &[Triple],
    entity_task: bool,
    hits_k: usize,
) -> (f64, f64, f64, f64, usize) {
    let n_e = p.n_entities();
    let n_r = p.n_relations();
    let mut raw = Vec::new();
    let mut filt = Vec::new();
    for t in held_out {
        let mut queries = Vec::new();
        if entity_task {
            let ignored: Vec<usize> = (0..n_e)
                .filter(|&h| h != t.head && truth.contains(&Triple::new(h, t.relation, t.tail)))
                .collect();
            queries.push((
                Query::Head {
                    relation: t.relation,
                    tail: t.tail,
                },
                t.head,
                n_e,
                ignored,
            ));
            let ignored: Vec<usize> = (0..n_e)
                .filter(|&x| x != t.tail && truth.contains(&Triple::new(t.head, t.relation, x)))
                .collect();
            queries.push((
                Query::Tail {
                    head: t.head,
                    relation: t.relation,
                },
                t.tail,
                n_e,
                ignored,
            ));
        } else {
            let ignored: Vec<usize> = (0..n_r)
                .filter(|&r| r != t.relation && truth.contains(&Triple::new(t.head, r, t.tail)))
                .collect();
            queries.push((
                Query::Relation {
                    head: t.head,
                    tail: t.tail,
                },
                t.relation,
                n_r,
                ignored,
            ));
        }
        for (q, target, pool, ignored) in queries {
            let all: Vec<usize> = (0..pool).collect();
            let scores = oracle_scores(variant, &oracle_logits(p, &q, &all, None));
            raw.push(oracle_rank(&scores, target, &[]));
            filt.push(oracle_rank(&scores, target, &ignored));
        }
    }
    let n = raw.len() as f64;
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / n;
    let hits = |v: &[usize]| v.iter().filter(|&&r| r <= hits_k).count() as f64 / n;
    (mean(&raw), mean(&filt), hits(&raw), hits(&filt), raw.len())
}

/// Central finite difference of `f` with respect to scalar `index` of
/// tensor `tensor` (in `ModelParams::tensors` order).
pub fn central_difference<F>(p: &ModelParams, tensor: usize, index: usize, step: f64, f: F) -> f64
where
    F: Fn(&ModelParams) -> f64,
{
    let mut plus = p.clone();
    plus.tensors_mut()[tensor][index] += step;
    let mut minus = p.clone();
    minus.tensors_mut()[tensor][index] -= step;
    (f(&plus) - f(&minus)) / (2.0 * step)
}

/// Relative error with a 1e-4 magnitude floor so vanishing gradients are
/// compared absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Dense view of a gradient tensor, in `ModelParams::tensors` order.
fn dense(g: &Gradients, p: &ModelParams, tensor: usize) -> Vec<f64> {
    let k = p.k();
    let sparse = |rows: &SparseRows, n: usize| {
        let mut out = vec![0.0; n * k];
        for (r, v) in rows.iter() {
            out[r * k..(r + 1) * k].copy_from_slice(v);
        }
        out
    };
    match tensor {
        0 => sparse(&g.entity, p.n_entities()),
        1 => sparse(&g.relation, p.n_relations()),
        2 => g.d_eh.clone(),
        3 => g.d_rh.clone(),
        4 => g.d_et.clone(),
        5 => g.d_rt.clone(),
        6 => g.b_c.clone(),
        _ => vec![g.b_p],
    }
}

/// Worst relative error between analytic and central-difference gradients
/// over every scalar of every tensor for one random instance at k <= 8.
pub fn worst_gradient_error(variant: Variant, seed: u64, with_mask: bool) -> (f64, String) {
    let mut rng = rng(seed);
    let k = 1 + (seed as usize % 8);
    let (n_e, n_r) = (5, 3);
    let p = random_params(&mut rng, n_e, n_r, k, 0.8);
    let inst = random_instance(&mut rng, n_e, n_r, seed as usize);
    let mask: Option<Vec<f64>> = with_mask.then(|| {
        (0..k)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { 2.0 })
            .collect()
    });
    let (_, grads) = backward(&p, &inst, variant, mask.as_deref());
    let mut worst = (0.0, String::new());
    for tensor in 0..8 {
        let analytic = dense(&grads, &p, tensor);
        for (i, &a) in analytic.iter().enumerate() {
            let n = central_difference(&p, tensor, i, 1e-5, |q| {
                oracle_instance_loss(q, &inst, variant, mask.as_deref())
            });
            let e = relative_error(a, n);
            if e > worst.0 {
                worst = (
                    e,
                    format!(
                        "{}[{i}] analytic {a:.3e} numeric {n:.3e}",
                        TENSOR_NAMES[tensor]
                    ),
                );
            }
        }
    }
    worst
}

pub fn vocab(n_e: usize, n_r: usize) -> Vocabulary {
    Vocabulary {
        entities: (0..n_e).map(|i| format!("e{i}")).collect(),
        relations: (0..n_r).map(|i| format!("r{i}")).collect(),
    }
}

/// Random KG with distinct triples split roughly 60/20/20; valid and test
/// each get at least one triple.
pub fn random_graph<R: Rng>(r: &mut R) -> KnowledgeGraph {
    let n_e = r.random_range(2..=10);
    let n_r = r.random_range(1..=4);
    let mut all = Vec::new();
    for h in 0..n_e {
        for rel in 0..n_r {
            for t in 0..n_e {
                all.push(Triple::new(h, rel, t));
            }
        }
    }
    all.shuffle(r);
    let n = r.random_range(3..=all.len().min(40));
    all.truncate(n);
    let n_test = (n / 5).max(1);
    let n_valid = (n / 5).max(1);
    let test = all.split_off(n - n_test);
    let valid = all.split_off(all.len() - n_valid);
    KnowledgeGraph::new(vocab(n_e, n_r), all, valid, test).unwrap()
}
