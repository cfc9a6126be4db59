use super::*;
use crate::numerics::{dot, softmax, Prng, Tensor2};
use proptest::prelude::*;
use rand::Rng;

fn small_params(seed: u64) -> ModelParams {
    let mut p = ModelParams::init(4, 6, 5, 3, seed);
    p.rel_emb.scale(5.0);
    p.ent_emb.scale(5.0);
    p.word_emb.scale(5.0);
    p
}

fn vec_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn encode_single_and_permuted() {
    let p = small_params(1);
    assert_eq!(encode_question(&p, &[3]).unwrap(), p.word_emb.row(3));
    let a = encode_question(&p, &[1, 2, 5]).unwrap();
    let b = encode_question(&p, &[5, 1, 2]).unwrap();
    assert!(vec_close(&a, &b, 1e-15));
    let oracle: Vec<f64> = (0..4)
        .map(|k| p.word_emb.get(1, k) + p.word_emb.get(2, k) + p.word_emb.get(5, k))
        .collect();
    assert!(vec_close(&a, &oracle, 1e-15));
    assert!(encode_question(&p, &[]).is_err());
    assert!(encode_question(&p, &[6]).is_err());
}

#[test]
fn zero_relations_give_uniform_gate() {
    let mut p = small_params(2);
    p.rel_emb.fill(0.0);
    let q = vec![0.3, -1.0, 2.0, 0.1];
    let s = vec![1.0, 0.5, -0.2, 0.0];
    let out = reason_step(&p, &q, &s).unwrap();
    assert!(out.g.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    assert!(out.r_hat.iter().all(|&x| x == 0.0));
    assert_eq!(out.q_next, q);
    assert_eq!(out.s_next, s);
}

#[test]
fn sharp_gate_selects_row() {
    let mut p = small_params(3);
    let q = vec![1.0, 1.0, 1.0, 1.0];
    let s = vec![0.5, 0.5, 0.5, 0.5];
    let u = p.m_rq.matvec_t(&q);
    let mut u2 = u.clone();
    crate::numerics::axpy(&mut u2, 1.0, &p.m_rs.matvec_t(&s));
    // put row 1 along u, the rest orthogonal-ish and small
    let norm = dot(&u2, &u2).sqrt();
    for j in 0..p.rel_emb.rows() {
        for k in 0..4 {
            let v = if j == 1 { 200.0 * u2[k] / norm } else { 0.0 };
            p.rel_emb.set(j, k, v);
        }
    }
    let out = reason_step(&p, &q, &s).unwrap();
    assert!(out.g[1] > 1.0 - 1e-12);
    assert!(vec_close(&out.r_hat, p.rel_emb.row(1), 1e-9));
}

#[test]
fn reason_step_matches_scripted_oracle() {
    let p = small_params(4);
    let q = vec![0.2, -0.4, 0.9, 1.1];
    let s = vec![-0.3, 0.8, 0.05, 0.6];
    let out = reason_step(&p, &q, &s).unwrap();
    // explicit loops over indices, written independently of the matvec helpers
    let n = p.rel_emb.rows();
    let mut logits = vec![0.0; n];
    for j in 0..n {
        for a in 0..4 {
            let mut mrq_r = 0.0;
            let mut mrs_r = 0.0;
            for b in 0..4 {
                mrq_r += p.m_rq.get(a, b) * p.rel_emb.get(j, b);
                mrs_r += p.m_rs.get(a, b) * p.rel_emb.get(j, b);
            }
            logits[j] += mrq_r * q[a] + mrs_r * s[a];
        }
    }
    let mx = logits.iter().cloned().fold(f64::MIN, f64::max);
    let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
    let g: Vec<f64> = logits.iter().map(|l| (l - mx).exp() / z).collect();
    let mut r = [0.0; 4];
    for j in 0..n {
        for b in 0..4 {
            r[b] += g[j] * p.rel_emb.get(j, b);
        }
    }
    let mut qn = q.clone();
    let mut sn = s.clone();
    for a in 0..4 {
        for b in 0..4 {
            qn[a] -= p.m_rq.get(a, b) * r[b];
            sn[a] += p.m_rs.get(a, b) * r[b];
        }
    }
    assert!(vec_close(&out.g, &g, 1e-12));
    assert!(vec_close(&out.r_hat, &r, 1e-12));
    assert!(vec_close(&out.q_next, &qn, 1e-12));
    assert!(vec_close(&out.s_next, &sn, 1e-12));
}

#[test]
fn predict_entity_dominant_row() {
    let mut p = small_params(5);
    p.m_se = Tensor2::identity(4);
    p.ent_emb = Tensor2::from_rows(&[
        vec![0.0, 0.5, 0.0, 0.0],
        vec![0.0, 0.0, 0.5, 0.0],
        vec![2.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.5],
        vec![0.0, 0.3, 0.3, 0.0],
    ])
    .unwrap();
    let s = p.ent_emb.row(2).to_vec();
    let es = predict_entity(&p, &s).unwrap();
    assert_eq!(es.entity, 2);
    assert!((es.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn predict_entity_matches_oracle() {
    let p = small_params(6);
    let s = vec![0.7, -0.1, 0.4, 0.2];
    let es = predict_entity(&p, &s).unwrap();
    let mut e = [0.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            e[a] += p.m_se.get(a, b) * s[b];
        }
    }
    let scores: Vec<f64> = (0..5)
        .map(|j| (0..4).map(|k| p.ent_emb.get(j, k) * e[k]).sum())
        .collect();
    let o = softmax(&scores).unwrap();
    assert!(vec_close(&es.projection, &e, 1e-12));
    assert!(vec_close(&es.probs, &o, 1e-12));
}

fn two_hop_targets(p: &ModelParams) -> Supervision {
    Supervision::Full(GoldTargets {
        relations: vec![0, 2, p.terminal()],
        entities: vec![1, 4],
    })
}

#[test]
fn two_hop_trace_shape() {
    let p = small_params(7);
    let input = ModelInput {
        tokens: vec![1, 2, 3],
        subject: 0,
    };
    let (trace, _) = forward(&p, &input, &two_hop_targets(&p), 1.0, TrainMode::Irn, 5).unwrap();
    assert_eq!(trace.hops.len(), 3);
    assert_eq!(trace.hops.iter().filter(|h| h.entity.is_some()).count(), 2);
    assert!(trace.hops[2].entity.is_none());
    assert_eq!(trace.s0, p.ent_emb.row(0));
}

#[test]
fn lambda_zero_is_relation_loss_only() {
    let p = small_params(8);
    let input = ModelInput {
        tokens: vec![4, 5],
        subject: 3,
    };
    let sup = two_hop_targets(&p);
    let (trace, loss) = forward(&p, &input, &sup, 0.0, TrainMode::Irn, 5).unwrap();
    let Supervision::Full(t) = &sup else {
        unreachable!()
    };
    let expect: f64 = trace
        .hops
        .iter()
        .zip(&t.relations)
        .map(|(h, &r)| -(h.relation_probs[r] + 1e-12).ln())
        .sum();
    assert!((loss - expect).abs() < 1e-12);
    let grads = backward(&p, &input, &trace, &sup, 0.0, TrainMode::Irn).unwrap();
    assert!(grads.m_se.as_slice().iter().all(|&x| x == 0.0));
}

#[test]
fn tiny_model_loss_matches_scripted_recomputation() {
    // d=3, 2 relations (+Terminal), 3 entities, 2 words
    let p = ModelParams {
        word_emb: Tensor2::from_rows(&[vec![0.1, 0.2, -0.3], vec![0.5, -0.4, 0.2]]).unwrap(),
        ent_emb: Tensor2::from_rows(&[
            vec![1.0, 0.0, 0.5],
            vec![-0.2, 0.7, 0.1],
            vec![0.3, 0.3, -0.6],
        ])
        .unwrap(),
        rel_emb: Tensor2::from_rows(&[
            vec![0.4, -0.1, 0.2],
            vec![-0.3, 0.6, 0.5],
            vec![0.1, 0.1, 0.1],
        ])
        .unwrap(),
        m_rq: Tensor2::from_rows(&[
            vec![0.9, 0.1, 0.0],
            vec![-0.2, 1.1, 0.3],
            vec![0.0, 0.2, 0.8],
        ])
        .unwrap(),
        m_rs: Tensor2::from_rows(&[
            vec![1.0, -0.3, 0.2],
            vec![0.1, 0.7, 0.0],
            vec![0.4, 0.0, 1.2],
        ])
        .unwrap(),
        m_se: Tensor2::from_rows(&[
            vec![0.6, 0.2, -0.1],
            vec![0.0, 0.9, 0.4],
            vec![-0.5, 0.1, 1.0],
        ])
        .unwrap(),
    };
    let input = ModelInput {
        tokens: vec![0, 1, 1],
        subject: 2,
    };
    let sup = Supervision::Full(GoldTargets {
        relations: vec![1, 0, 2],
        entities: vec![0, 1],
    });
    let lambda = 0.7;
    let (_, loss) = forward(&p, &input, &sup, lambda, TrainMode::Irn, 5).unwrap();

    // scripted recomputation with plain arrays
    type M = [[f64; 3]; 3];
    let m = |t: &Tensor2| -> M {
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = t.get(i, j);
            }
        }
        a
    };
    let (mrq, mrs, mse, r, e) = (
        m(&p.m_rq),
        m(&p.m_rs),
        m(&p.m_se),
        m(&p.rel_emb),
        m(&p.ent_emb),
    );
    let mv = |a: &M, x: [f64; 3]| -> [f64; 3] {
        [0, 1, 2].map(|i| a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2])
    };
    let sm = |z: [f64; 3]| -> [f64; 3] {
        let mx = z[0].max(z[1]).max(z[2]);
        let ex = z.map(|v| (v - mx).exp());
        let t = ex[0] + ex[1] + ex[2];
        ex.map(|v| v / t)
    };
    let d3 = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let w0 = [0.1, 0.2, -0.3];
    let w1 = [0.5, -0.4, 0.2];
    let mut q = [0, 1, 2].map(|k| w0[k] + 2.0 * w1[k]);
    let mut s = e[2];
    let rel_t = [1usize, 0, 2];
    let ent_t = [0usize, 1];
    let mut total = 0.0;
    for h in 0..3 {
        let z = [0, 1, 2].map(|j| d3(mv(&mrq, r[j]), q) + d3(mv(&mrs, r[j]), s));
        let g = sm(z);
        total += -(g[rel_t[h]] + 1e-12).ln();
        let rh = [0, 1, 2].map(|k| g[0] * r[0][k] + g[1] * r[1][k] + g[2] * r[2][k]);
        let a = mv(&mrq, rh);
        let b = mv(&mrs, rh);
        q = [0, 1, 2].map(|k| q[k] - a[k]);
        s = [0, 1, 2].map(|k| s[k] + b[k]);
        if h < 2 {
            let ep = mv(&mse, s);
            let o = sm([0, 1, 2].map(|j| d3(e[j], ep)));
            total += lambda * -(o[ent_t[h]] + 1e-12).ln();
        }
    }
    assert!((loss - total).abs() < 1e-12, "{loss} vs {total}");
}

#[test]
fn absent_words_get_zero_gradient() {
    let p = small_params(9);
    let input = ModelInput {
        tokens: vec![1, 3],
        subject: 2,
    };
    let sup = two_hop_targets(&p);
    let (trace, _) = forward(&p, &input, &sup, 1.0, TrainMode::Irn, 5).unwrap();
    let g = backward(&p, &input, &trace, &sup, 1.0, TrainMode::Irn).unwrap();
    for w in [0, 2, 4, 5] {
        assert!(g.word_emb.row(w).iter().all(|&x| x == 0.0));
    }
    assert!(g.word_emb.row(1).iter().any(|&x| x != 0.0));
}

#[test]
fn weak_mode_ignores_relation_targets() {
    let p = small_params(10);
    let input = ModelInput {
        tokens: vec![1],
        subject: 0,
    };
    let weak = Supervision::AnswerOnly { hops: 2, answer: 4 };
    let (trace, loss) = forward(&p, &input, &weak, 1.0, TrainMode::IrnWeak, 5).unwrap();
    let o = &trace.hops[1].entity.as_ref().unwrap().probs;
    assert!((loss + (o[4] + 1e-12).ln()).abs() < 1e-12);
    assert!(forward(&p, &input, &weak, 1.0, TrainMode::Irn, 5).is_err());
}

#[test]
fn forward_rejects_bad_targets() {
    let p = small_params(11);
    let input = ModelInput {
        tokens: vec![1],
        subject: 0,
    };
    let no_terminal = Supervision::Full(GoldTargets {
        relations: vec![0, 1, 2],
        entities: vec![1, 2],
    });
    assert!(forward(&p, &input, &no_terminal, 1.0, TrainMode::Irn, 5).is_err());
    assert!(forward(&p, &input, &two_hop_targets(&p), 1.0, TrainMode::Irn, 2).is_err());
    let (trace, _) = forward(&p, &input, &two_hop_targets(&p), 1.0, TrainMode::Irn, 5).unwrap();
    let short = Supervision::Full(GoldTargets {
        relations: vec![0, p.terminal()],
        entities: vec![1],
    });
    assert!(backward(&p, &input, &trace, &short, 1.0, TrainMode::Irn).is_err());
}

#[test]
fn gradients_match_finite_differences() {
    for (i, outcome) in gradcheck_suite(100, 12).unwrap().iter().enumerate() {
        assert!(
            outcome.passed(GRADCHECK_TOL),
            "case {i}: {} at {} [{}]",
            outcome.max_rel_error,
            outcome.worst_tensor,
            outcome.worst_index
        );
    }
}

#[test]
fn forward_is_deterministic() {
    let p = small_params(12);
    let input = ModelInput {
        tokens: vec![2, 4, 1],
        subject: 1,
    };
    let a = forward(&p, &input, &two_hop_targets(&p), 1.0, TrainMode::Irn, 5).unwrap();
    let b = forward(&p, &input, &two_hop_targets(&p), 1.0, TrainMode::Irn, 5).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.to_bits(), b.1.to_bits());
}

proptest! {
    #[test]
    fn telescoping_and_distributions(seed in 0u64..10_000, hops in 1usize..=3) {
        let p = small_params(seed);
        let mut rng = Prng::new(seed);
        let input = ModelInput {
            tokens: (0..3).map(|_| rng.random_range(0..6)).collect(),
            subject: rng.random_range(0..5),
        };
        let mut rels: Vec<usize> = (0..hops).map(|_| rng.random_range(0..3)).collect();
        rels.push(p.terminal());
        let sup = Supervision::Full(GoldTargets {
            relations: rels,
            entities: (0..hops).map(|_| rng.random_range(0..5)).collect(),
        });
        let (trace, _) = forward(&p, &input, &sup, 1.0, TrainMode::Irn, 5).unwrap();
        let mut s_sum = trace.s0.clone();
        let mut q_sum = trace.q0.clone();
        for h in &trace.hops {
            prop_assert!((h.relation_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            if let Some(e) = &h.entity {
                prop_assert!((e.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            let r = p.rel_emb.matvec_t(&h.relation_probs);
            prop_assert!(vec_close(&r, &h.soft_relation, 1e-12));
            crate::numerics::axpy(&mut s_sum, 1.0, &p.m_rs.matvec(&h.soft_relation));
            crate::numerics::axpy(&mut q_sum, -1.0, &p.m_rq.matvec(&h.soft_relation));
        }
        let last = trace.hops.last().unwrap();
        prop_assert!(vec_close(&last.s, &s_sum, 1e-9));
        prop_assert!(vec_close(&last.q, &q_sum, 1e-9));
    }
}
