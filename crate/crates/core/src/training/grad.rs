//! Closed-form gradients of the three losses and the L1 penalty.
//!
//! With `u = mask * c`, `z = tanh(u)` and `logit_i = w_i . z + b_p`, every
//! loss enters the backward pass through `delta_i = dL/dlogit_i`:
//!
//! * pointwise: `s_i - y_i`
//! * listwise: `s_i - y_i / P`
//! * weighted listwise: `P * s_i - y_i`
//!
//! where `P` is the positive count. The rest is the chain rule through the
//! projection, `tanh`, the mask, and the diagonal combination.

use crate::model::{ConfigError, Direction, ModelParams, Query, TrainingInstance, Variant};

const EMPTY: u32 = u32::MAX;

/// Row-sparse gradient for an embedding table.
///
/// Rows are stored contiguously in first-touch order; `slot` maps a row ID to
/// its position. Clearing costs O(touched rows).
#[derive(Debug, Clone)]
pub struct SparseRows {
    dim: usize,
    slot: Vec<u32>,
    rows: Vec<usize>,
    data: Vec<f64>,
}

impl SparseRows {
    pub fn new(n_rows: usize, dim: usize) -> Self {
        Self {
            dim,
            slot: vec![EMPTY; n_rows],
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of touched rows.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<&[f64]> {
        match self.slot[row] {
            EMPTY => None,
            s => {
                let s = s as usize;
                Some(&self.data[s * self.dim..(s + 1) * self.dim])
            }
        }
    }

    /// Mutable access to `row`, inserting a zero row on first touch.
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        let s = match self.slot[row] {
            EMPTY => {
                let s = self.rows.len();
                self.slot[row] = s as u32;
                self.rows.push(row);
                self.data.resize(self.data.len() + self.dim, 0.0);
                s
            }
            s => s as usize,
        };
        &mut self.data[s * self.dim..(s + 1) * self.dim]
    }

    /// Touched rows in first-touch order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.rows
            .iter()
            .copied()
            .zip(self.data.chunks_exact(self.dim.max(1)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (usize, &mut [f64])> + '_ {
        self.rows
            .iter()
            .copied()
            .zip(self.data.chunks_exact_mut(self.dim.max(1)))
    }

    pub fn clear(&mut self) {
        for &r in &self.rows {
            self.slot[r] = EMPTY;
        }
        self.rows.clear();
        self.data.clear();
    }
}

/// Gradient of a loss with respect to every tensor of [`ModelParams`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub entity: SparseRows,
    pub relation: SparseRows,
    pub d_eh: Vec<f64>,
    pub d_rh: Vec<f64>,
    pub d_et: Vec<f64>,
    pub d_rt: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_p: f64,
}

fn axpy(out: &mut [f64], alpha: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let k = params.k();
        Self {
            entity: SparseRows::new(params.n_entities(), k),
            relation: SparseRows::new(params.n_relations(), k),
            d_eh: vec![0.0; k],
            d_rh: vec![0.0; k],
            d_et: vec![0.0; k],
            d_rt: vec![0.0; k],
            b_c: vec![0.0; k],
            b_p: 0.0,
        }
    }

    pub fn clear(&mut self) {
        self.entity.clear();
        self.relation.clear();
        for t in [
            &mut self.d_eh,
            &mut self.d_rh,
            &mut self.d_et,
            &mut self.d_rt,
            &mut self.b_c,
        ] {
            t.fill(0.0);
        }
        self.b_p = 0.0;
    }

    /// Dense gradients of the four diagonals in `ModelParams` order.
    pub fn diagonals_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.d_eh,
            &mut self.d_rh,
            &mut self.d_et,
            &mut self.d_rt,
        ]
    }

    fn diagonal_pair_mut(&mut self, direction: Direction) -> (&mut [f64], &mut [f64]) {
        match direction {
            Direction::TailMissing => (&mut self.d_eh, &mut self.d_rh),
            Direction::HeadMissing => (&mut self.d_et, &mut self.d_rt),
            Direction::RelationMissing => (&mut self.d_eh, &mut self.d_et),
        }
    }

    fn table_mut(&mut self, direction: Direction) -> &mut SparseRows {
        match direction {
            Direction::RelationMissing => &mut self.relation,
            _ => &mut self.entity,
        }
    }
}

/// `dL/dlogit` for each candidate.
pub fn logit_gradient(variant: Variant, scores: &[f64], labels: &[bool]) -> Vec<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let y = |l: bool| if l { 1.0 } else { 0.0 };
    match variant {
        Variant::Pointwise => scores.iter().zip(labels).map(|(s, &l)| s - y(l)).collect(),
        _ if n_pos == 0.0 => vec![0.0; scores.len()],
        Variant::Listwise => scores
            .iter()
            .zip(labels)
            .map(|(s, &l)| s - y(l) / n_pos)
            .collect(),
        Variant::WListwise => scores
            .iter()
            .zip(labels)
            .map(|(s, &l)| n_pos * s - y(l))
            .collect(),
    }
}

/// Adds the gradient of one instance's loss into `grads` and returns the loss.
pub fn backward_into(
    params: &ModelParams,
    instance: &TrainingInstance,
    variant: Variant,
    mask: Option<&[f64]>,
    grads: &mut Gradients,
) -> f64 {
    let query = instance.query;
    let direction = query.direction();
    let hidden = params.hidden(&query, mask);
    let z = &hidden.activation;
    let logits = params.project(direction, z, &instance.candidates);
    let scores = variant.activate(&logits);
    let loss = variant.loss(&scores, &instance.labels);
    let delta = logit_gradient(variant, &scores, &instance.labels);

    let k = params.k();
    let table = params.candidate_table(direction);
    let mut dz = vec![0.0; k];
    {
        let table_grad = grads.table_mut(direction);
        for (&cand, &d) in instance.candidates.iter().zip(&delta) {
            if d == 0.0 {
                continue;
            }
            axpy(table_grad.row_mut(cand), d, z);
            axpy(&mut dz, d, table.row(cand));
        }
    }
    grads.b_p += delta.iter().sum::<f64>();

    // through tanh and the mask
    let mut dc: Vec<f64> = dz
        .iter()
        .zip(z)
        .map(|(g, zi)| g * (1.0 - zi * zi))
        .collect();
    if let Some(mask) = mask {
        for (g, m) in dc.iter_mut().zip(mask) {
            *g *= m;
        }
    }

    axpy(&mut grads.b_c, 1.0, &dc);
    let (a, b) = params.inputs(&query);
    let (da, db) = params.diagonals(direction);
    {
        let (ga, gb) = grads.diagonal_pair_mut(direction);
        for i in 0..k {
            ga[i] += dc[i] * a[i];
            gb[i] += dc[i] * b[i];
        }
    }
    let input_a: Vec<f64> = dc.iter().zip(da).map(|(g, d)| g * d).collect();
    let input_b: Vec<f64> = dc.iter().zip(db).map(|(g, d)| g * d).collect();
    match query {
        Query::Tail { head, relation } => {
            axpy(grads.entity.row_mut(head), 1.0, &input_a);
            axpy(grads.relation.row_mut(relation), 1.0, &input_b);
        }
        Query::Head { relation, tail } => {
            axpy(grads.entity.row_mut(tail), 1.0, &input_a);
            axpy(grads.relation.row_mut(relation), 1.0, &input_b);
        }
        Query::Relation { head, tail } => {
            axpy(grads.entity.row_mut(head), 1.0, &input_a);
            axpy(grads.entity.row_mut(tail), 1.0, &input_b);
        }
    }
    loss
}

/// Loss and gradient of a single instance.
pub fn backward(
    params: &ModelParams,
    instance: &TrainingInstance,
    variant: Variant,
    mask: Option<&[f64]>,
) -> (f64, Gradients) {
    let mut grads = Gradients::zeros_like(params);
    let loss = backward_into(params, instance, variant, mask, &mut grads);
    (loss, grads)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn l1(values: &[f64]) -> f64 {
    values.iter().map(|x| x.abs()).sum()
}

fn check_alpha(alpha: f64) -> Result<(), ConfigError> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(ConfigError(format!(
            "L1 weight must be non-negative, got {alpha}"
        )))
    }
}

/// `alpha * sum |w|` over both embedding tables and the four diagonals
/// (biases excluded), with the subgradient `alpha * sign(w)` over every row.
pub fn l1_penalty_and_subgradient(
    params: &ModelParams,
    alpha: f64,
) -> Result<(f64, Gradients), ConfigError> {
    check_alpha(alpha)?;
    let mut grads = Gradients::zeros_like(params);
    let mut penalty = 0.0;
    if alpha == 0.0 {
        return Ok((0.0, grads));
    }
    for r in 0..params.n_entities() {
        let row = params.entity.row(r);
        penalty += l1(row);
        for (g, w) in grads.entity.row_mut(r).iter_mut().zip(row) {
            *g = alpha * sign(*w);
        }
    }
    for r in 0..params.n_relations() {
        let row = params.relation.row(r);
        penalty += l1(row);
        for (g, w) in grads.relation.row_mut(r).iter_mut().zip(row) {
            *g = alpha * sign(*w);
        }
    }
    penalty += add_diagonal_l1(params, alpha, &mut grads);
    Ok((alpha * penalty, grads))
}

fn add_diagonal_l1(params: &ModelParams, alpha: f64, grads: &mut Gradients) -> f64 {
    let diags = [&params.d_eh, &params.d_rh, &params.d_et, &params.d_rt];
    let mut sum = 0.0;
    for (g, d) in grads.diagonals_mut().into_iter().zip(diags) {
        sum += l1(d);
        for (gi, w) in g.iter_mut().zip(d) {
            *gi += alpha * sign(*w);
        }
    }
    sum
}

/// Adds the L1 subgradient for the rows already present in `grads` and for
/// the diagonals. Returns the penalty over those same parameters.
pub fn add_lazy_l1(params: &ModelParams, alpha: f64, grads: &mut Gradients) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (r, g) in grads.entity.iter_mut() {
        let row = params.entity.row(r);
        sum += l1(row);
        for (gi, w) in g.iter_mut().zip(row) {
            *gi += alpha * sign(*w);
        }
    }
    for (r, g) in grads.relation.iter_mut() {
        let row = params.relation.row(r);
        sum += l1(row);
        for (gi, w) in g.iter_mut().zip(row) {
            *gi += alpha * sign(*w);
        }
    }
    sum += add_diagonal_l1(params, alpha, grads);
    alpha * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_rows_touch_and_clear() {
        let mut s = SparseRows::new(5, 2);
        s.row_mut(3)[0] = 1.0;
        s.row_mut(1)[1] = 2.0;
        s.row_mut(3)[1] = 4.0;
        assert_eq!(s.len(), 2);
        assert_eq!(s.get(3), Some(&[1.0, 4.0][..]));
        assert_eq!(s.get(0), None);
        let order: Vec<usize> = s.iter().map(|(r, _)| r).collect();
        assert_eq!(order, [3, 1]);
        s.clear();
        assert!(s.is_empty());
        assert_eq!(s.get(3), None);
        assert_eq!(s.row_mut(3), &[0.0, 0.0]);
    }

    #[test]
    fn listwise_targets_met_give_zero_logit_gradient() {
        let scores = [0.5, 0.5];
        let labels = [true, true];
        assert_eq!(
            logit_gradient(Variant::Listwise, &scores, &labels),
            vec![0.0, 0.0]
        );
        assert_eq!(
            logit_gradient(Variant::WListwise, &scores, &labels),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn l1_hand_example() {
        let mut p = ModelParams::zeros(1, 1, 3);
        p.d_eh = vec![1.0, -2.0, 0.0];
        let (pen, g) = l1_penalty_and_subgradient(&p, 0.1).unwrap();
        assert!((pen - 0.3).abs() < 1e-15);
        assert_eq!(g.d_eh, vec![0.1, -0.1, 0.0]);
        assert_eq!(g.entity.get(0), Some(&[0.0, 0.0, 0.0][..]));
    }

    #[test]
    fn l1_zero_alpha_and_negative_alpha() {
        let mut p = ModelParams::zeros(2, 1, 2);
        p.entity.row_mut(0)[0] = 5.0;
        let (pen, g) = l1_penalty_and_subgradient(&p, 0.0).unwrap();
        assert_eq!(pen, 0.0);
        assert!(g.entity.is_empty() && g.d_eh.iter().all(|&x| x == 0.0));
        assert!(l1_penalty_and_subgradient(&p, -1.0).is_err());
    }

    #[test]
    fn l1_penalty_ignores_sign_flips_and_biases() {
        let mut p = ModelParams::zeros(2, 2, 2);
        p.entity.row_mut(1).copy_from_slice(&[0.5, -0.25]);
        p.relation.row_mut(0).copy_from_slice(&[1.0, 2.0]);
        p.d_rt = vec![-3.0, 0.0];
        p.b_c = vec![100.0, 100.0];
        p.b_p = -50.0;
        let (a, _) = l1_penalty_and_subgradient(&p, 0.5).unwrap();
        assert!((a - 0.5 * 6.75).abs() < 1e-12);
        for x in p.entity.as_mut_slice() {
            *x = -*x;
        }
        p.d_rt[0] = 3.0;
        let (b, _) = l1_penalty_and_subgradient(&p, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lazy_l1_only_touches_present_rows() {
        let mut p = ModelParams::zeros(3, 1, 1);
        p.entity.as_mut_slice().copy_from_slice(&[1.0, -1.0, 1.0]);
        let mut g = Gradients::zeros_like(&p);
        g.entity.row_mut(1);
        let pen = add_lazy_l1(&p, 0.5, &mut g);
        assert_eq!(pen, 0.5);
        assert_eq!(g.entity.len(), 1);
        assert_eq!(g.entity.get(1), Some(&[-0.5][..]));
    }
}
