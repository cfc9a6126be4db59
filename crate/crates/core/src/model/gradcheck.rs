//! Finite-difference verification of the analytic gradients.

use rand::Rng;

use super::forward::{forward, ModelInput, Supervision, TrainMode};
use super::{backward, GoldTargets, ModelParams, TENSOR_NAMES};
use crate::error::Result;
use crate::numerics::{finite_diff_grad_5pt, relative_error, Prng};

/// A random instance with random (not necessarily KB-consistent) targets.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub params: ModelParams,
    pub input: ModelInput,
    pub supervision: Supervision,
    pub mode: TrainMode,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOutcome {
    pub max_rel_error: f64,
    pub worst_tensor: &'static str,
    pub worst_index: usize,
    pub entries: usize,
}

impl GradCheckOutcome {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

pub const GRADCHECK_STEP: f64 = 1e-3;
pub const GRADCHECK_FLOOR: f64 = 1e-7;
pub const GRADCHECK_TOL: f64 = 1e-4;

impl GradCheckCase {
    /// Embedding rows are drawn wider than at training init so relation and
    /// entity distributions are far from uniform.
    pub fn random(
        seed: u64,
        dim: usize,
        n_entities: usize,
        n_relations: usize,
        mode: TrainMode,
    ) -> Self {
        let vocab = 12;
        let mut params = ModelParams::init(dim, vocab, n_entities, n_relations, seed);
        for t in [
            &mut params.word_emb,
            &mut params.ent_emb,
            &mut params.rel_emb,
        ] {
            t.scale(6.0);
        }
        let mut rng = Prng::stream(seed, "gradcheck");
        let hops = rng.random_range(1..=3usize);
        let len = rng.random_range(1..=7usize);
        let tokens = (0..len).map(|_| rng.random_range(1..vocab)).collect();
        let subject = rng.random_range(0..n_entities);
        let relations = (0..hops)
            .map(|_| rng.random_range(0..n_relations))
            .collect::<Vec<_>>();
        let entities = (0..hops)
            .map(|_| rng.random_range(0..n_entities))
            .collect::<Vec<_>>();
        let supervision = match mode {
            TrainMode::Irn => {
                let mut rels = relations;
                rels.push(params.terminal());
                Supervision::Full(GoldTargets {
                    relations: rels,
                    entities,
                })
            }
            TrainMode::IrnWeak => Supervision::AnswerOnly {
                hops,
                answer: entities[hops - 1],
            },
        };
        GradCheckCase {
            params,
            input: ModelInput { tokens, subject },
            supervision,
            mode,
            lambda: rng.random_range(0.25..2.0),
        }
    }

    pub fn loss(&self, params: &ModelParams) -> Result<f64> {
        let cap = self.supervision.hops() + 1;
        forward(
            params,
            &self.input,
            &self.supervision,
            self.lambda,
            self.mode,
            cap,
        )
        .map(|(_, l)| l)
    }

    /// Compares every analytic gradient entry against fourth-order central
    /// differences.
    pub fn check(&self, step: f64, floor: f64) -> Result<GradCheckOutcome> {
        let cap = self.supervision.hops() + 1;
        let (trace, _) = forward(
            &self.params,
            &self.input,
            &self.supervision,
            self.lambda,
            self.mode,
            cap,
        )?;
        let grads = backward(
            &self.params,
            &self.input,
            &trace,
            &self.supervision,
            self.lambda,
            self.mode,
        )?;
        let mut outcome = GradCheckOutcome {
            max_rel_error: 0.0,
            worst_tensor: TENSOR_NAMES[0],
            worst_index: 0,
            entries: 0,
        };
        for (k, name) in TENSOR_NAMES.iter().enumerate() {
            let x = self.params.tensors()[k].as_slice().to_vec();
            let mut probe = self.params.clone();
            let numeric = finite_diff_grad_5pt(
                |v| {
                    probe.tensors_mut()[k].as_mut_slice().copy_from_slice(v);
                    self.loss(&probe).unwrap_or(f64::NAN)
                },
                &x,
                step,
            );
            let analytic = grads.tensors()[k].as_slice();
            for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
                let err = relative_error(a, n, floor);
                let err = if err.is_nan() { f64::INFINITY } else { err };
                if err > outcome.max_rel_error {
                    outcome.max_rel_error = err;
                    outcome.worst_tensor = name;
                    outcome.worst_index = i;
                }
            }
            outcome.entries += x.len();
        }
        Ok(outcome)
    }
}

/// Runs `count` seeded cases at d=8, 5 entities, 4 relations, alternating
/// training modes.
pub fn gradcheck_suite(seed: u64, count: usize) -> Result<Vec<GradCheckOutcome>> {
    (0..count)
        .map(|i| {
            let mode = if i % 4 == 3 {
                TrainMode::IrnWeak
            } else {
                TrainMode::Irn
            };
            let case = GradCheckCase::random(seed.wrapping_add(i as u64), 8, 5, 4, mode);
            case.check(GRADCHECK_STEP, GRADCHECK_FLOOR)
        })
        .collect()
}
