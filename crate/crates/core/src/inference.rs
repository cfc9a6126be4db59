//! Answering with inspectable reasoning paths.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Symbols, Vocab, UNK_ID};
use crate::error::{IrnError, Result};
use crate::kb::{EntityId, RelationId};
use crate::model::{
    apply_relation, initial_vectors, predict_entity, reason_step, EntityStep, HopRecord,
    ModelInput, ModelParams, ReasoningTrace, StopReason,
};
use crate::numerics::{argmax, dot};

pub const DEFAULT_HOP_CAP: usize = 5;

/// When to stop reasoning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Halting {
    /// Stop once `Terminal` is the argmax relation, or at `hop_cap`.
    Terminal { hop_cap: usize },
    /// Run exactly this many hops. Answer-only models never learn to emit
    /// `Terminal`, so they are decoded to the dataset's hop count.
    FixedHops(usize),
}

impl Default for Halting {
    fn default() -> Self {
        Halting::Terminal {
            hop_cap: DEFAULT_HOP_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub relation: RelationId,
    pub entity: EntityId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub answer: EntityId,
    /// Entity distribution the answer was read from.
    pub distribution: Vec<f64>,
    pub path: Vec<PathStep>,
    pub stop: StopReason,
    /// `Terminal` won at the very first hop; the answer comes from `s⁰`.
    pub degenerate: bool,
    pub trace: ReasoningTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjunctivePrediction {
    pub answer: EntityId,
    /// Element-wise sum of the branch distributions.
    pub summed: Vec<f64>,
    pub branches: Vec<Prediction>,
}

/// Forced relation per (0-based) hop index.
pub type Forcing = BTreeMap<usize, RelationId>;

fn decode(
    params: &ModelParams,
    input: &ModelInput,
    halting: Halting,
    forced: &Forcing,
) -> Result<Prediction> {
    let n_rel = params.num_relations_with_terminal();
    if let Some((_, &bad)) = forced.iter().find(|(_, &r)| r >= n_rel) {
        return Err(IrnError::OutOfBounds {
            what: "forced relation",
            id: bad,
            size: n_rel,
        });
    }
    let (max_hops, use_terminal) = match halting {
        Halting::Terminal { hop_cap } => (hop_cap, true),
        Halting::FixedHops(n) => (n, false),
    };
    if max_hops == 0 {
        return Err(IrnError::Invalid("hop limit must be at least 1".into()));
    }
    let terminal = params.terminal();
    let (q0, s0) = initial_vectors(params, input)?;
    let mut q = q0.clone();
    let mut s = s0.clone();
    let mut hops: Vec<HopRecord> = Vec::with_capacity(max_hops);
    let mut stop = if use_terminal {
        StopReason::HopCap
    } else {
        StopReason::FixedHops
    };
    for h in 0..max_hops {
        let step = reason_step(params, &q, &s)?;
        let (relation, forced_here, soft, q_next, s_next) = match forced.get(&h) {
            Some(&r) => {
                let row = params.rel_emb.row(r).to_vec();
                let (qn, sn) = apply_relation(params, &q, &s, &row);
                (r, true, row, qn, sn)
            }
            None => (argmax(&step.g), false, step.r_hat, step.q_next, step.s_next),
        };
        let halt = use_terminal && relation == terminal;
        let entity = if halt {
            None
        } else {
            Some(predict_entity(params, &s_next)?)
        };
        hops.push(HopRecord {
            q_prev: std::mem::replace(&mut q, q_next.clone()),
            s_prev: std::mem::replace(&mut s, s_next.clone()),
            relation_probs: step.g,
            soft_relation: soft,
            relation,
            forced: forced_here,
            q: q_next,
            s: s_next,
            entity,
        });
        if halt {
            stop = StopReason::Terminal;
            break;
        }
    }
    let path: Vec<PathStep> = hops
        .iter()
        .filter_map(|h| {
            h.entity.as_ref().map(|e| PathStep {
                relation: h.relation,
                entity: e.entity,
            })
        })
        .collect();
    let (degenerate, read_out): (bool, EntityStep) =
        match hops.iter().rev().find_map(|h| h.entity.as_ref()) {
            Some(e) => (false, e.clone()),
            None => (true, predict_entity(params, &s0)?),
        };
    Ok(Prediction {
        answer: read_out.entity,
        distribution: read_out.probs,
        path,
        stop,
        degenerate,
        trace: ReasoningTrace { q0, s0, hops, stop },
    })
}

/// Decodes a single-subject question.
pub fn answer_question(
    params: &ModelParams,
    input: &ModelInput,
    halting: Halting,
) -> Result<Prediction> {
    decode(params, input, halting, &Forcing::new())
}

/// Runs one branch per subject with shared parameters and sums the final
/// entity distributions.
pub fn answer_conjunctive(
    params: &ModelParams,
    tokens: &[usize],
    subjects: &[EntityId],
    halting: Halting,
) -> Result<ConjunctivePrediction> {
    if subjects.len() < 2 {
        return Err(IrnError::Invalid(format!(
            "conjunctive answering needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    let branches = subjects
        .iter()
        .map(|&subject| {
            let input = ModelInput {
                tokens: tokens.to_vec(),
                subject,
            };
            answer_question(params, &input, halting)
        })
        .collect::<Result<Vec<_>>>()?;
    let dists: Vec<&[f64]> = branches.iter().map(|b| b.distribution.as_slice()).collect();
    let summed = sum_distributions(&dists)?;
    Ok(ConjunctivePrediction {
        answer: argmax(&summed),
        summed,
        branches,
    })
}

/// Element-wise sum of equally sized distributions.
pub fn sum_distributions(dists: &[&[f64]]) -> Result<Vec<f64>> {
    let first = dists
        .first()
        .ok_or_else(|| IrnError::Invalid("no distributions to sum".into()))?;
    let mut out = vec![0.0; first.len()];
    for d in dists {
        if d.len() != out.len() {
            return Err(IrnError::Shape(format!(
                "distribution lengths {} and {}",
                out.len(),
                d.len()
            )));
        }
        for (o, &x) in out.iter_mut().zip(d.iter()) {
            *o += x;
        }
    }
    Ok(out)
}

/// Decodes with the listed hops using the forced relation's embedding row
/// in place of the soft relation. Other hops behave as in
/// [`answer_question`].
pub fn override_relations(
    params: &ModelParams,
    input: &ModelInput,
    forced: &Forcing,
    halting: Halting,
) -> Result<Prediction> {
    decode(params, input, halting, forced)
}

/// Forcing map for a gold relation sequence (content hops only).
pub fn forcing_for(relations: &[RelationId]) -> Forcing {
    relations.iter().copied().enumerate().collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Vocabulary words closest (cosine) to `M_rq · r` in question space.
pub fn relation_neighbors(
    params: &ModelParams,
    vocab: &Vocab,
    relation: RelationId,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    if relation >= params.num_relations_with_terminal() {
        return Err(IrnError::OutOfBounds {
            what: "relation",
            id: relation,
            size: params.num_relations_with_terminal(),
        });
    }
    if vocab.len() != params.vocab_size() {
        return Err(IrnError::Shape(format!(
            "vocab has {} words, embeddings {}",
            vocab.len(),
            params.vocab_size()
        )));
    }
    let rq = params.m_rq.matvec(params.rel_emb.row(relation));
    let mut scored: Vec<(usize, f64)> = (0..vocab.len())
        .filter(|&w| w != UNK_ID)
        .map(|w| (w, cosine(&rq, params.word_emb.row(w))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(w, c)| (vocab.word(w).to_string(), c))
        .collect())
}

/// Per-hop relation distributions as `hop,<relation names…>` CSV rows.
pub fn export_gate_heatmap(
    trace: &ReasoningTrace,
    relation_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["hop".to_string()];
    header.extend(relation_names.iter().cloned());
    w.write_record(&header)?;
    for (h, hop) in trace.hops.iter().enumerate() {
        if hop.relation_probs.len() != relation_names.len() {
            return Err(IrnError::Shape(format!(
                "{} relation names for {} probabilities",
                relation_names.len(),
                hop.relation_probs.len()
            )));
        }
        let mut row = vec![(h + 1).to_string()];
        row.extend(hop.relation_probs.iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| IrnError::io(path, e))
}

/// Reads a heatmap written by [`export_gate_heatmap`].
pub fn read_gate_heatmap(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let names: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>().map_err(|e| IrnError::Parse {
                    line: n + 2,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((names, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopReport {
    pub hop: usize,
    pub relation: String,
    pub relation_prob: f64,
    pub forced: bool,
    pub entity: Option<String>,
    pub entity_prob: Option<f64>,
    pub relation_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub relation: String,
    pub entity: String,
}

/// JSON view of a [`Prediction`] with names resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub answer: String,
    pub path: Vec<PathReport>,
    pub stop_reason: StopReason,
    pub degenerate: bool,
    pub per_hop: Vec<HopReport>,
}

impl PredictionReport {
    pub fn new(pred: &Prediction, syms: &impl Symbols) -> Self {
        PredictionReport {
            answer: syms.entity_name(pred.answer).to_string(),
            path: pred
                .path
                .iter()
                .map(|p| PathReport {
                    relation: syms.relation_name(p.relation).to_string(),
                    entity: syms.entity_name(p.entity).to_string(),
                })
                .collect(),
            stop_reason: pred.stop,
            degenerate: pred.degenerate,
            per_hop: pred
                .trace
                .hops
                .iter()
                .enumerate()
                .map(|(h, rec)| HopReport {
                    hop: h + 1,
                    relation: syms.relation_name(rec.relation).to_string(),
                    relation_prob: rec.relation_probs[rec.relation],
                    forced: rec.forced,
                    entity: rec
                        .entity
                        .as_ref()
                        .map(|e| syms.entity_name(e.entity).to_string()),
                    entity_prob: rec.entity.as_ref().map(|e| e.probs[e.entity]),
                    relation_probs: rec.relation_probs.clone(),
                })
                .collect(),
        }
    }
}
