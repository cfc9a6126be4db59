use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::dataset::GoldPath;
use crate::error::{IrnError, Result};
use crate::kb::{EntityId, RelationId};
use crate::numerics::{argmax, axpy, cross_entropy_at, softmax};

/// Which terms of the loss are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Relation and entity supervision at every hop.
    #[default]
    Irn,
    /// Final-answer supervision only.
    IrnWeak,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Irn => "irn",
            TrainMode::IrnWeak => "irn-weak",
        })
    }
}

impl FromStr for TrainMode {
    type Err = IrnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "irn" => Ok(TrainMode::Irn),
            "irn-weak" => Ok(TrainMode::IrnWeak),
            _ => Err(IrnError::Invalid(format!(
                "unknown mode `{s}` (irn | irn-weak)"
            ))),
        }
    }
}

/// Encoded question plus its topic entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInput {
    pub tokens: Vec<usize>,
    pub subject: EntityId,
}

/// One-hot targets for a path of `H` hops: `H + 1` relations (the last is
/// `Terminal`) and `H` entities (the last is the answer).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldTargets {
    pub relations: Vec<RelationId>,
    pub entities: Vec<EntityId>,
}

impl GoldTargets {
    pub fn from_path(path: &GoldPath, terminal: RelationId) -> Self {
        let mut relations = path.relations.clone();
        relations.push(terminal);
        GoldTargets {
            relations,
            entities: path.entities.clone(),
        }
    }

    pub fn hops(&self) -> usize {
        self.entities.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Supervision {
    Full(GoldTargets),
    AnswerOnly { hops: usize, answer: EntityId },
}

impl Supervision {
    pub fn hops(&self) -> usize {
        match self {
            Supervision::Full(t) => t.hops(),
            Supervision::AnswerOnly { hops, .. } => *hops,
        }
    }

    pub fn answer(&self) -> EntityId {
        match self {
            Supervision::Full(t) => *t.entities.last().expect("non-empty targets"),
            Supervision::AnswerOnly { answer, .. } => *answer,
        }
    }
}

/// Entity read-out at one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityStep {
    /// `M_se · s`
    pub projection: Vec<f64>,
    /// softmax over `e_jᵀ · projection`
    pub probs: Vec<f64>,
    pub entity: EntityId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopRecord {
    pub q_prev: Vec<f64>,
    pub s_prev: Vec<f64>,
    /// Relation distribution `g`.
    pub relation_probs: Vec<f64>,
    /// `Σ_j g_j r_j`, or the forced relation's row when overridden.
    pub soft_relation: Vec<f64>,
    /// Argmax of `relation_probs`, or the forced relation.
    pub relation: RelationId,
    pub forced: bool,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub entity: Option<EntityStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Terminal,
    HopCap,
    /// A fixed number of hops was requested (answer-only models, and
    /// supervised passes whose length comes from the gold path).
    FixedHops,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningTrace {
    pub q0: Vec<f64>,
    pub s0: Vec<f64>,
    pub hops: Vec<HopRecord>,
    pub stop: StopReason,
}

/// Output of one reasoning hop before any entity read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub g: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub q_next: Vec<f64>,
    pub s_next: Vec<f64>,
}

/// `q⁰ = Σ_i x_i`
pub fn encode_question(params: &ModelParams, tokens: &[usize]) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(IrnError::Invalid("empty question".into()));
    }
    let mut q = vec![0.0; params.dim()];
    for &t in tokens {
        if t >= params.vocab_size() {
            return Err(IrnError::OutOfBounds {
                what: "word",
                id: t,
                size: params.vocab_size(),
            });
        }
        axpy(&mut q, 1.0, params.word_emb.row(t));
    }
    Ok(q)
}

/// `Mᵀ_rq q + Mᵀ_rs s`, so that relation `j` scores `r_jᵀ · u`.
pub(crate) fn gate_input(params: &ModelParams, q: &[f64], s: &[f64]) -> Vec<f64> {
    let mut u = params.m_rq.matvec_t(q);
    axpy(&mut u, 1.0, &params.m_rs.matvec_t(s));
    u
}

/// Relation logits `(M_rq r_j)ᵀ q + (M_rs r_j)ᵀ s` for every relation.
pub fn relation_logits(params: &ModelParams, q_prev: &[f64], s_prev: &[f64]) -> Vec<f64> {
    params.rel_emb.matvec(&gate_input(params, q_prev, s_prev))
}

/// Applies a chosen (soft or hard) relation vector to the question and
/// state: `q' = q − M_rq r`, `s' = s + M_rs r`.
pub fn apply_relation(
    params: &ModelParams,
    q_prev: &[f64],
    s_prev: &[f64],
    r: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut q = q_prev.to_vec();
    axpy(&mut q, -1.0, &params.m_rq.matvec(r));
    let mut s = s_prev.to_vec();
    axpy(&mut s, 1.0, &params.m_rs.matvec(r));
    (q, s)
}

/// One hop: relation distribution from the pre-update vectors, then the
/// question/state updates with the soft relation.
pub fn reason_step(params: &ModelParams, q_prev: &[f64], s_prev: &[f64]) -> Result<StepOutput> {
    let g = softmax(&relation_logits(params, q_prev, s_prev))?;
    let r_hat = params.rel_emb.matvec_t(&g);
    let (q_next, s_next) = apply_relation(params, q_prev, s_prev, &r_hat);
    if q_next.iter().chain(&s_next).any(|x| !x.is_finite()) {
        return Err(IrnError::NonFinite("reasoning state"));
    }
    Ok(StepOutput {
        g,
        r_hat,
        q_next,
        s_next,
    })
}

/// `e = M_se s`, `o = softmax(E e)`.
pub fn predict_entity(params: &ModelParams, s: &[f64]) -> Result<EntityStep> {
    let projection = params.m_se.matvec(s);
    let probs = softmax(&params.ent_emb.matvec(&projection))?;
    let entity = argmax(&probs);
    Ok(EntityStep {
        projection,
        probs,
        entity,
    })
}

pub fn initial_vectors(params: &ModelParams, input: &ModelInput) -> Result<(Vec<f64>, Vec<f64>)> {
    if input.subject >= params.num_entities() {
        return Err(IrnError::OutOfBounds {
            what: "entity",
            id: input.subject,
            size: params.num_entities(),
        });
    }
    let q0 = encode_question(params, &input.tokens)?;
    let s0 = params.ent_emb.row(input.subject).to_vec();
    Ok((q0, s0))
}

/// Supervised pass of `H + 1` hops with entity read-outs after hops
/// `1..=H`. Returns the trace and the loss
/// `Σ C_r(h) + λ Σ C_a(h)` (IRN) or `λ C_a(H)` (IRN-weak).
pub fn forward(
    params: &ModelParams,
    input: &ModelInput,
    supervision: &Supervision,
    lambda: f64,
    mode: TrainMode,
    hop_cap: usize,
) -> Result<(ReasoningTrace, f64)> {
    let hops = supervision.hops();
    if hops == 0 {
        return Err(IrnError::Invalid("gold path has no hops".into()));
    }
    if hops + 1 > hop_cap {
        return Err(IrnError::Invalid(format!(
            "hop cap {hop_cap} below gold hops + 1 = {}",
            hops + 1
        )));
    }
    if mode == TrainMode::Irn && !matches!(supervision, Supervision::Full(_)) {
        return Err(IrnError::Invalid(
            "IRN mode needs per-hop relation and entity targets".into(),
        ));
    }
    if let Supervision::Full(t) = supervision {
        if t.relations.len() != hops + 1 || t.relations[hops] != params.terminal() {
            return Err(IrnError::Invalid(
                "relation targets must be H gold relations followed by Terminal".into(),
            ));
        }
        if let Some(&bad) = t.relations.iter().find(|&&r| r > params.terminal()) {
            return Err(IrnError::OutOfBounds {
                what: "relation",
                id: bad,
                size: params.num_relations_with_terminal(),
            });
        }
        if let Some(&bad) = t.entities.iter().find(|&&e| e >= params.num_entities()) {
            return Err(IrnError::OutOfBounds {
                what: "entity",
                id: bad,
                size: params.num_entities(),
            });
        }
    }
    let answer = supervision.answer();
    if answer >= params.num_entities() {
        return Err(IrnError::OutOfBounds {
            what: "entity",
            id: answer,
            size: params.num_entities(),
        });
    }

    let (q0, s0) = initial_vectors(params, input)?;
    let mut q = q0.clone();
    let mut s = s0.clone();
    let mut records = Vec::with_capacity(hops + 1);
    let mut loss = 0.0;
    for h in 0..=hops {
        let step = reason_step(params, &q, &s)?;
        let entity = if h < hops {
            Some(predict_entity(params, &step.s_next)?)
        } else {
            None
        };
        match (mode, supervision) {
            (TrainMode::Irn, Supervision::Full(t)) => {
                loss += cross_entropy_at(t.relations[h], &step.g);
                if let Some(es) = &entity {
                    loss += lambda * cross_entropy_at(t.entities[h], &es.probs);
                }
            }
            (TrainMode::IrnWeak, _) => {
                if h + 1 == hops {
                    let es = entity.as_ref().expect("entity read-out at hop H");
                    loss += lambda * cross_entropy_at(answer, &es.probs);
                }
            }
            (TrainMode::Irn, Supervision::AnswerOnly { .. }) => unreachable!("checked above"),
        }
        records.push(HopRecord {
            relation: argmax(&step.g),
            forced: false,
            q_prev: std::mem::replace(&mut q, step.q_next.clone()),
            s_prev: std::mem::replace(&mut s, step.s_next.clone()),
            relation_probs: step.g,
            soft_relation: step.r_hat,
            q: step.q_next,
            s: step.s_next,
            entity,
        });
    }
    Ok((
        ReasoningTrace {
            q0,
            s0,
            hops: records,
            stop: StopReason::FixedHops,
        },
        loss,
    ))
}
