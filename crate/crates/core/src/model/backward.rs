//! Hand-derived gradients of the supervised loss.
//!
//! Per hop, with `u = Mᵀ_rq q + Mᵀ_rs s`, `z = R u`, `g = softmax(z)`,
//! `r̂ = Rᵀ g`, `q' = q − M_rq r̂`, `s' = s + M_rs r̂`, `e = M_se s'`,
//! `o = softmax(E e)`, gradients flow backwards from the last hop. The
//! recurrent terms matter: `r̂` feeds both updates, and `g` depends on the
//! incoming `q` and `s`.

use super::forward::{gate_input, HopRecord, ModelInput, ReasoningTrace, Supervision, TrainMode};
use super::{Gradients, ModelParams};
use crate::error::{IrnError, Result};
use crate::numerics::{axpy, dot, LOG_EPS};

/// `∂/∂z` of `−ln(softmax(z)[gold] + ε)`, scaled by `weight`, written into
/// `out` (added).
fn ce_softmax_grad(probs: &[f64], gold: usize, weight: f64, out: &mut [f64]) {
    let p = probs[gold];
    if weight == 0.0 || p + LOG_EPS > 1.0 {
        // the clamped loss is flat here
        return;
    }
    let c = weight * p / (p + LOG_EPS);
    for (o, &pk) in out.iter_mut().zip(probs) {
        *o += c * pk;
    }
    out[gold] -= c;
}

fn loss_weights(
    supervision: &Supervision,
    mode: TrainMode,
    lambda: f64,
    hop: usize,
) -> (Option<(usize, f64)>, Option<(usize, f64)>) {
    let hops = supervision.hops();
    match (mode, supervision) {
        (TrainMode::Irn, Supervision::Full(t)) => {
            let rel = Some((t.relations[hop], 1.0));
            let ent = (hop < hops).then(|| (t.entities[hop], lambda));
            (rel, ent)
        }
        (TrainMode::IrnWeak, s) => (None, (hop + 1 == hops).then(|| (s.answer(), lambda))),
        (TrainMode::Irn, Supervision::AnswerOnly { .. }) => (None, None),
    }
}

/// Adds `scale · ∂L/∂θ` for every parameter tensor into `grads`.
pub fn backward_into(
    params: &ModelParams,
    input: &ModelInput,
    trace: &ReasoningTrace,
    supervision: &Supervision,
    lambda: f64,
    mode: TrainMode,
    scale: f64,
    grads: &mut Gradients,
) -> Result<()> {
    let hops = supervision.hops();
    if trace.hops.len() != hops + 1 {
        return Err(IrnError::Invalid(format!(
            "trace has {} hops, targets expect {}",
            trace.hops.len(),
            hops + 1
        )));
    }
    if mode == TrainMode::Irn && !matches!(supervision, Supervision::Full(_)) {
        return Err(IrnError::Invalid("IRN mode needs full targets".into()));
    }
    let d = params.dim();
    let mut dq = vec![0.0; d];
    let mut ds = vec![0.0; d];
    for (h, rec) in trace.hops.iter().enumerate().rev() {
        let (rel_target, ent_target) = loss_weights(supervision, mode, lambda, h);
        if let (Some((gold, w)), Some(es)) = (ent_target, &rec.entity) {
            let mut dy = vec![0.0; es.probs.len()];
            ce_softmax_grad(&es.probs, gold, w * scale, &mut dy);
            grads.ent_emb.add_outer(&dy, &es.projection, 1.0);
            let de = params.ent_emb.matvec_t(&dy);
            grads.m_se.add_outer(&de, &rec.s, 1.0);
            axpy(&mut ds, 1.0, &params.m_se.matvec_t(&de));
        }
        backward_hop(params, rec, rel_target, scale, &mut dq, &mut ds, grads);
    }
    for &t in &input.tokens {
        axpy(grads.word_emb.row_mut(t), 1.0, &dq);
    }
    axpy(grads.ent_emb.row_mut(input.subject), 1.0, &ds);
    Ok(())
}

/// Propagates `dq`, `ds` (gradients w.r.t. this hop's outputs) to the
/// hop's inputs, in place.
fn backward_hop(
    params: &ModelParams,
    rec: &HopRecord,
    rel_target: Option<(usize, f64)>,
    scale: f64,
    dq: &mut Vec<f64>,
    ds: &mut Vec<f64>,
    grads: &mut Gradients,
) {
    // q' = q − M_rq r̂ ; s' = s + M_rs r̂
    let mut dr = params.m_rs.matvec_t(ds);
    axpy(&mut dr, -1.0, &params.m_rq.matvec_t(dq));
    grads.m_rq.add_outer(dq, &rec.soft_relation, -1.0);
    grads.m_rs.add_outer(ds, &rec.soft_relation, 1.0);

    let g = &rec.relation_probs;
    let mut dz = vec![0.0; g.len()];
    if rec.forced {
        axpy(grads.rel_emb.row_mut(rec.relation), 1.0, &dr);
    } else {
        // r̂ = Rᵀ g
        grads.rel_emb.add_outer(g, &dr, 1.0);
        let dg = params.rel_emb.matvec(&dr);
        let mean = dot(g, &dg);
        for ((z, &gk), &dgk) in dz.iter_mut().zip(g).zip(&dg) {
            *z = gk * (dgk - mean);
        }
    }
    if let Some((gold, w)) = rel_target {
        ce_softmax_grad(g, gold, w * scale, &mut dz);
    }
    // z = R u ; u = Mᵀ_rq q + Mᵀ_rs s
    let u = gate_input(params, &rec.q_prev, &rec.s_prev);
    grads.rel_emb.add_outer(&dz, &u, 1.0);
    let du = params.rel_emb.matvec_t(&dz);
    grads.m_rq.add_outer(&rec.q_prev, &du, 1.0);
    grads.m_rs.add_outer(&rec.s_prev, &du, 1.0);
    axpy(dq, 1.0, &params.m_rq.matvec(&du));
    axpy(ds, 1.0, &params.m_rs.matvec(&du));
}

/// Fresh gradient tensors for a single instance.
pub fn backward(
    params: &ModelParams,
    input: &ModelInput,
    trace: &ReasoningTrace,
    supervision: &Supervision,
    lambda: f64,
    mode: TrainMode,
) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(params);
    backward_into(
        params,
        input,
        trace,
        supervision,
        lambda,
        mode,
        1.0,
        &mut grads,
    )?;
    Ok(grads)
}
