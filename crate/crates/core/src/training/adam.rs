//! Adam with lazy updates for embedding rows.

use crate::model::ModelParams;
use crate::training::grad::Gradients;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moments, shaped exactly like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = ModelParams::zeros(params.n_entities(), params.n_relations(), params.k());
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
        }
    }
}

struct Step {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    bias1: f64,
    bias2: f64,
}

impl Step {
    #[inline]
    fn apply(&self, w: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]) {
        for i in 0..g.len() {
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = m[i] / self.bias1;
            let v_hat = v[i] / self.bias2;
            w[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// One bias-corrected Adam step.
///
/// Dense tensors (diagonals and biases) are updated every call. Embedding
/// rows are updated only when present in `grads`; moments of absent rows are
/// left as they are.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let t = state.t as i32;
    let step = Step {
        beta1: state.beta1,
        beta2: state.beta2,
        eps: state.eps,
        lr,
        bias1: 1.0 - state.beta1.powi(t),
        bias2: 1.0 - state.beta2.powi(t),
    };

    for (row, g) in grads.entity.iter() {
        step.apply(
            params.entity.row_mut(row),
            state.m.entity.row_mut(row),
            state.v.entity.row_mut(row),
            g,
        );
    }
    for (row, g) in grads.relation.iter() {
        step.apply(
            params.relation.row_mut(row),
            state.m.relation.row_mut(row),
            state.v.relation.row_mut(row),
            g,
        );
    }
    let dense_grads = [
        &grads.d_eh,
        &grads.d_rh,
        &grads.d_et,
        &grads.d_rt,
        &grads.b_c,
    ];
    let [_, _, pw0, pw1, pw2, pw3, pw4, pbp] = params.tensors_mut();
    let [_, _, mw0, mw1, mw2, mw3, mw4, mbp] = state.m.tensors_mut();
    let [_, _, vw0, vw1, vw2, vw3, vw4, vbp] = state.v.tensors_mut();
    let dense = [
        (pw0, mw0, vw0),
        (pw1, mw1, vw1),
        (pw2, mw2, vw2),
        (pw3, mw3, vw3),
        (pw4, mw4, vw4),
    ];
    for ((w, m, v), g) in dense.into_iter().zip(dense_grads) {
        step.apply(w, m, v, g);
    }
    step.apply(pbp, mbp, vbp, std::slice::from_ref(&grads.b_p));
}
