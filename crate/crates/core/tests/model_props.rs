mod common;

use common::*;
use proje_core::model::{
    count_parameters, expected_parameter_count, loss_listwise, loss_pointwise, loss_wlistwise,
    ModelParams, Query, TrainingInstance, Variant,
};
use proptest::prelude::*;

fn instance_strategy() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 0usize..3)
}

fn setup(seed: u64, kind: usize) -> (ModelParams, TrainingInstance) {
    let mut r = rng(seed);
    let k = 1 + (seed % 4) as usize;
    let p = random_params(&mut r, 5, 3, k, 1.5);
    let mut inst = random_instance(&mut r, 5, 3, kind);
    inst.candidates.truncate(5);
    inst.labels.truncate(5);
    if !inst.labels.contains(&true) {
        inst.labels[0] = true;
    }
    (p, inst)
}

proptest! {
    #[test]
    fn listwise_scores_sum_to_one((seed, kind) in instance_strategy()) {
        let (p, inst) = setup(seed, kind);
        let total: f64 = p.score_listwise(&inst, None).iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pointwise_scores_lie_strictly_inside_unit_interval((seed, kind) in instance_strategy()) {
        let (p, inst) = setup(seed, kind);
        for s in p.score_pointwise(&inst, None) {
            prop_assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn scores_and_losses_match_scalar_oracle((seed, kind) in instance_strategy()) {
        let (p, inst) = setup(seed, kind);
        let logits = oracle_logits(&p, &inst.query, &inst.candidates, None);
        for variant in Variant::ALL {
            let want = oracle_scores(variant, &logits);
            let got = p.score(variant, &inst, None);
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
            let l = variant.loss(&got, &inst.labels);
            prop_assert!((l - oracle_loss(variant, &want, &inst.labels)).abs() <= 1e-10);
        }
    }

    #[test]
    fn direction_separation(seed in any::<u64>()) {
        let (p, tail_inst) = setup(seed, 0);
        let (_, head_inst) = setup(seed ^ 0xABCD, 1);
        let mut q = p.clone();
        for x in q.d_et.iter_mut().chain(q.d_rt.iter_mut()) {
            *x += 0.7;
        }
        prop_assert_eq!(p.score_listwise(&tail_inst, None), q.score_listwise(&tail_inst, None));
        let mut q = p.clone();
        for x in q.d_eh.iter_mut().chain(q.d_rh.iter_mut()) {
            *x -= 0.4;
        }
        prop_assert_eq!(p.score_pointwise(&head_inst, None), q.score_pointwise(&head_inst, None));
    }

    #[test]
    fn permutation_equivariance((seed, kind) in instance_strategy(), rot in 0usize..5) {
        let (p, inst) = setup(seed, kind);
        let n = inst.candidates.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let permuted = TrainingInstance {
            query: inst.query,
            candidates: perm.iter().map(|&i| inst.candidates[i]).collect(),
            labels: perm.iter().map(|&i| inst.labels[i]).collect(),
        };
        for variant in Variant::ALL {
            let a = p.score(variant, &inst, None);
            let b = p.score(variant, &permuted, None);
            for (j, &i) in perm.iter().enumerate() {
                prop_assert!((b[j] - a[i]).abs() <= 1e-12);
            }
            let la = variant.loss(&a, &inst.labels);
            let lb = variant.loss(&b, &permuted.labels);
            prop_assert!((la - lb).abs() <= 1e-10);
        }
    }

    #[test]
    fn softmax_ignores_projection_bias_shift((seed, kind) in instance_strategy(), c in -50.0f64..50.0) {
        let (p, inst) = setup(seed, kind);
        let mut q = p.clone();
        q.b_p += c;
        for (a, b) in p.score_listwise(&inst, None).iter().zip(q.score_listwise(&inst, None)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn walked_count_matches_formula(n_e in 1usize..300, n_r in 1usize..40, k in 1usize..64) {
        let p = ModelParams::zeros(n_e, n_r, k);
        prop_assert_eq!(count_parameters(&p), expected_parameter_count(n_e, n_r, k));
        prop_assert_eq!(count_parameters(&p), n_e * k + n_r * k + 5 * k + 1);
    }

    #[test]
    fn pointwise_loss_monotone_in_positive_score(s in 0.01f64..0.98, bump in 0.001f64..0.01, neg in 0.0f64..1.0) {
        let labels = [true, false];
        prop_assert!(loss_pointwise(&[s + bump, neg], &labels) < loss_pointwise(&[s, neg], &labels));
    }

    #[test]
    fn weighted_to_plain_listwise_ratio_is_positive_count(seed in any::<u64>()) {
        let (p, inst) = setup(seed, 0);
        let scores = p.score_listwise(&inst, None);
        let ratio = loss_wlistwise(&scores, &inst.labels) / loss_listwise(&scores, &inst.labels);
        prop_assert!((ratio - inst.n_positive() as f64).abs() < 1e-9);
    }
}

#[test]
fn identical_rows_score_identically() {
    let mut r = rng(3);
    let mut p = random_params(&mut r, 4, 2, 3, 1.0);
    let row = p.entity.row(1).to_vec();
    p.entity.row_mut(3).copy_from_slice(&row);
    let inst = TrainingInstance {
        query: Query::Head {
            relation: 1,
            tail: 0,
        },
        candidates: vec![1, 2, 3],
        labels: vec![true, false, false],
    };
    let s = p.score_pointwise(&inst, None);
    assert_eq!(s[0], s[2]);
}

#[test]
fn pointwise_matches_oracle_on_k4_three_candidates() {
    let mut r = rng(44);
    let p = random_params(&mut r, 6, 2, 4, 1.0);
    let inst = TrainingInstance {
        query: Query::Tail {
            head: 2,
            relation: 1,
        },
        candidates: vec![0, 3, 5],
        labels: vec![false, true, false],
    };
    let want = oracle_scores(
        Variant::Pointwise,
        &oracle_logits(&p, &inst.query, &inst.candidates, None),
    );
    for (a, b) in p.score_pointwise(&inst, None).iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}
