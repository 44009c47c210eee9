mod common;

use common::*;
use proje_core::model::Variant;
use proje_core::training::backward;

#[test]
fn analytic_gradients_match_finite_differences() {
    for variant in Variant::ALL {
        for seed in 0..24 {
            for with_mask in [false, true] {
                let (err, at) = worst_gradient_error(variant, seed, with_mask);
                assert!(
                    err < 1e-5,
                    "{variant} seed {seed} mask {with_mask}: {err:e} at {at}"
                );
            }
        }
    }
}

#[test]
fn weighted_listwise_gradient_scales_with_positive_count() {
    let mut rng = rng(99);
    let p = random_params(&mut rng, 6, 2, 4, 0.5);
    let mut inst = random_instance(&mut rng, 6, 2, 0);
    while inst.n_positive() < 2 {
        let i = inst.labels.iter().position(|&y| !y).unwrap();
        inst.labels[i] = true;
    }
    let n_pos = inst.n_positive() as f64;
    let (lw, gw) = backward(&p, &inst, Variant::WListwise, None);
    let (ll, gl) = backward(&p, &inst, Variant::Listwise, None);
    assert!((lw / ll - n_pos).abs() < 1e-12);
    assert!((gw.b_p - n_pos * gl.b_p).abs() < 1e-12);
    for (a, b) in gw.b_c.iter().zip(&gl.b_c) {
        assert!((a - n_pos * b).abs() < 1e-12);
    }
}

#[test]
fn backward_loss_matches_oracle_forward() {
    for seed in 0..20 {
        let mut rng = rng(1000 + seed);
        let p = random_params(&mut rng, 5, 4, 4, 1.0);
        let inst = random_instance(&mut rng, 5, 4, seed as usize);
        for variant in Variant::ALL {
            let (loss, _) = backward(&p, &inst, variant, None);
            let want = oracle_instance_loss(&p, &inst, variant, None);
            assert!((loss - want).abs() < 1e-10, "{variant}: {loss} vs {want}");
        }
    }
}
