//! Alternating KB-embedding and question-answering training.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{QaInstance, Vocab};
use crate::error::{IrnError, Result};
use crate::evaluator::{accuracy, predict_all};
use crate::kb::{KnowledgeBase, Triple};
use crate::model::{
    backward_into, forward, GoldTargets, Gradients, ModelInput, ModelParams, Supervision, TrainMode,
};
use crate::numerics::{adam_step, axpy, dot, AdamConfig, AdamState, Prng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub lambda: f64,
    pub lr: f64,
    pub batch: usize,
    /// Triples per KB-embedding minibatch.
    pub kb_batch: usize,
    pub kb_epochs_per_round: usize,
    pub margin: f64,
    pub negatives: usize,
    pub max_rounds: usize,
    pub patience: usize,
    pub hop_cap: usize,
    pub mode: TrainMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            lambda: 1.0,
            lr: 1e-3,
            batch: 50,
            kb_batch: 500,
            kb_epochs_per_round: 3,
            margin: 1.0,
            negatives: 1,
            max_rounds: 200,
            patience: 10,
            hop_cap: 5,
            mode: TrainMode::Irn,
            seed: 1,
        }
    }
}

pub const CONFIG_KEYS: [&str; 13] = [
    "dim",
    "lambda",
    "lr",
    "batch",
    "kb_batch",
    "kb_epochs_per_round",
    "margin",
    "negatives",
    "max_rounds",
    "patience",
    "hop_cap",
    "mode",
    "seed",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| IrnError::Invalid(format!("bad value `{value}` for `{key}`")))
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "dim" => self.dim = parse_value(key, v)?,
            "lambda" => self.lambda = parse_value(key, v)?,
            "lr" => self.lr = parse_value(key, v)?,
            "batch" => self.batch = parse_value(key, v)?,
            "kb_batch" => self.kb_batch = parse_value(key, v)?,
            "kb_epochs_per_round" => self.kb_epochs_per_round = parse_value(key, v)?,
            "margin" => self.margin = parse_value(key, v)?,
            "negatives" => self.negatives = parse_value(key, v)?,
            "max_rounds" => self.max_rounds = parse_value(key, v)?,
            "patience" => self.patience = parse_value(key, v)?,
            "hop_cap" => self.hop_cap = parse_value(key, v)?,
            "mode" => self.mode = v.parse()?,
            "seed" => self.seed = parse_value(key, v)?,
            other => return Err(IrnError::Invalid(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "dim" => self.dim.to_string(),
            "lambda" => self.lambda.to_string(),
            "lr" => self.lr.to_string(),
            "batch" => self.batch.to_string(),
            "kb_batch" => self.kb_batch.to_string(),
            "kb_epochs_per_round" => self.kb_epochs_per_round.to_string(),
            "margin" => self.margin.to_string(),
            "negatives" => self.negatives.to_string(),
            "max_rounds" => self.max_rounds.to_string(),
            "patience" => self.patience.to_string(),
            "hop_cap" => self.hop_cap.to_string(),
            "mode" => self.mode.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// Flat `key = value` lines; `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| IrnError::Parse {
                line: n + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(k, v).map_err(|e| IrnError::Parse {
                line: n + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| IrnError::io(path, e))?;
        Self::parse_kv(&text)
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for k in CONFIG_KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim as f64),
            ("lambda", self.lambda),
            ("lr", self.lr),
            ("batch", self.batch as f64),
            ("kb_batch", self.kb_batch as f64),
            ("margin", self.margin),
            ("negatives", self.negatives as f64),
            ("max_rounds", self.max_rounds as f64),
            ("patience", self.patience as f64),
            ("hop_cap", self.hop_cap as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(IrnError::Invalid(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.patience > self.max_rounds {
            return Err(IrnError::Invalid(format!(
                "patience {} exceeds max_rounds {}",
                self.patience, self.max_rounds
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// One training example: a single reasoning branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: ModelInput,
    pub supervision: Supervision,
}

/// One example per path instance and one per branch of a conjunctive
/// instance.
pub fn encode_examples(
    instances: &[QaInstance],
    vocab: &Vocab,
    mode: TrainMode,
    terminal: usize,
) -> Vec<Example> {
    let mut out = Vec::new();
    for inst in instances {
        let tokens = vocab.encode(&inst.tokens);
        for (&subject, path) in inst.subjects.iter().zip(&inst.paths) {
            let supervision = match mode {
                TrainMode::Irn => Supervision::Full(GoldTargets::from_path(path, terminal)),
                TrainMode::IrnWeak => Supervision::AnswerOnly {
                    hops: path.hops(),
                    answer: path.answer(),
                },
            };
            out.push(Example {
                input: ModelInput {
                    tokens: tokens.clone(),
                    subject,
                },
                supervision,
            });
        }
    }
    out
}

/// Adam moments for every parameter tensor.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub cfg: AdamConfig,
    states: Vec<AdamState>,
}

impl Optimizer {
    pub fn new(params: &ModelParams, cfg: AdamConfig) -> Self {
        Optimizer {
            cfg,
            states: params
                .tensors()
                .iter()
                .map(|t| AdamState::new(t.as_slice().len()))
                .collect(),
        }
    }

    /// Steps the tensors whose index is in `which` (see `TENSOR_NAMES`).
    fn step(&mut self, params: &mut ModelParams, grads: &Gradients, which: &[usize]) -> Result<()> {
        let grads = grads.tensors();
        for (k, p) in params.tensors_mut().into_iter().enumerate() {
            if which.contains(&k) {
                adam_step(
                    p.as_mut_slice(),
                    grads[k].as_slice(),
                    &mut self.states[k],
                    &self.cfg,
                )?;
            }
        }
        Ok(())
    }
}

const ALL_TENSORS: [usize; 6] = [0, 1, 2, 3, 4, 5];
/// ent_emb, rel_emb, m_se
const KB_TENSORS: [usize; 3] = [1, 2, 5];

/// Margin loss of one triple against one corrupted tail; accumulates
/// `scale · ∂/∂θ` into `grads` when the hinge is active.
pub fn kb_triple_loss(
    params: &ModelParams,
    t: Triple,
    negative: usize,
    margin: f64,
    scale: f64,
    grads: Option<&mut Gradients>,
) -> f64 {
    let Triple {
        subject: s,
        relation: r,
        object: o,
    } = t;
    let mut x = params.ent_emb.row(s).to_vec();
    axpy(&mut x, 1.0, params.rel_emb.row(r));
    let p = params.m_se.matvec(&x);
    let sq = |e: &[f64]| p.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let pos = sq(params.ent_emb.row(o));
    let neg = sq(params.ent_emb.row(negative));
    let loss = margin + pos - neg;
    if loss <= 0.0 {
        return 0.0;
    }
    if let Some(g) = grads {
        let e_o = params.ent_emb.row(o);
        let e_n = params.ent_emb.row(negative);
        // dL/dp = 2(p − e_o) − 2(p − e_n) = 2(e_n − e_o)
        let dp: Vec<f64> = e_n
            .iter()
            .zip(e_o)
            .map(|(n, o)| 2.0 * scale * (n - o))
            .collect();
        let d_o: Vec<f64> = p
            .iter()
            .zip(e_o)
            .map(|(p, o)| -2.0 * scale * (p - o))
            .collect();
        let d_n: Vec<f64> = p
            .iter()
            .zip(e_n)
            .map(|(p, n)| 2.0 * scale * (p - n))
            .collect();
        axpy(g.ent_emb.row_mut(o), 1.0, &d_o);
        axpy(g.ent_emb.row_mut(negative), 1.0, &d_n);
        g.m_se.add_outer(&dp, &x, 1.0);
        let dx = params.m_se.matvec_t(&dp);
        axpy(g.ent_emb.row_mut(s), 1.0, &dx);
        axpy(g.rel_emb.row_mut(r), 1.0, &dx);
    }
    loss
}

/// Scales entity rows with norm above 1 back onto the unit sphere.
pub fn renormalize_entities(params: &mut ModelParams) {
    for i in 0..params.ent_emb.rows() {
        let row = params.ent_emb.row_mut(i);
        let n = dot(row, row).sqrt();
        if n > 1.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// One shuffled pass over the triples. Returns the mean hinge loss per
/// (triple, negative) pair.
pub fn kb_embedding_epoch(
    params: &mut ModelParams,
    opt: &mut Optimizer,
    kb: &KnowledgeBase,
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<f64> {
    if kb.num_triples() == 0 {
        return Err(IrnError::EmptyKb);
    }
    let n_e = kb.num_entities();
    let mut order: Vec<Triple> = kb.triples().to_vec();
    order.shuffle(rng);
    let mut grads = Gradients::zeros_like(params);
    let mut total = 0.0;
    let mut pairs = 0usize;
    for chunk in order.chunks(cfg.kb_batch) {
        grads.fill(0.0);
        let scale = 1.0 / (chunk.len() * cfg.negatives) as f64;
        for &t in chunk {
            for _ in 0..cfg.negatives {
                let mut neg = rng.random_range(0..n_e);
                while neg == t.object && n_e > 1 {
                    neg = rng.random_range(0..n_e);
                }
                total += kb_triple_loss(params, t, neg, cfg.margin, scale, Some(&mut grads));
                pairs += 1;
            }
        }
        opt.step(params, &grads, &KB_TENSORS)?;
        renormalize_entities(params);
        if !params.is_finite() {
            return Err(IrnError::NonFinite("parameters after KB update"));
        }
    }
    Ok(total / pairs as f64)
}

/// One shuffled pass over the QA examples with mean-gradient Adam steps.
/// Returns the mean per-example loss.
pub fn qa_epoch(
    params: &mut ModelParams,
    opt: &mut Optimizer,
    examples: &[Example],
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(IrnError::Invalid("empty training set".into()));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    let mut grads = Gradients::zeros_like(params);
    let mut total = 0.0;
    for chunk in order.chunks(cfg.batch) {
        grads.fill(0.0);
        let scale = 1.0 / chunk.len() as f64;
        for &i in chunk {
            let ex = &examples[i];
            let (trace, loss) = forward(
                params,
                &ex.input,
                &ex.supervision,
                cfg.lambda,
                cfg.mode,
                cfg.hop_cap,
            )?;
            backward_into(
                params,
                &ex.input,
                &trace,
                &ex.supervision,
                cfg.lambda,
                cfg.mode,
                scale,
                &mut grads,
            )?;
            total += loss;
        }
        opt.step(params, &grads, &ALL_TENSORS)?;
        if !params.is_finite() {
            return Err(IrnError::NonFinite("parameters after QA update"));
        }
    }
    Ok(total / examples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub kb_loss: f64,
    pub qa_loss: f64,
    pub val_acc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub rounds: Vec<RoundStats>,
    /// Round (1-based) whose parameters were kept.
    pub best_round: usize,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,kb_loss,qa_loss,val_acc,seconds\n");
        for r in &self.rounds {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3}",
                r.round, r.kb_loss, r.qa_loss, r.val_acc, r.seconds
            );
        }
        out
    }

    pub fn best_val_acc(&self) -> f64 {
        self.rounds
            .iter()
            .find(|r| r.round == self.best_round)
            .map_or(0.0, |r| r.val_acc)
    }
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: TrainHistory,
}

/// Rounds of `kb_epochs_per_round` KB epochs followed by one QA epoch,
/// keeping the parameters with the best validation accuracy. When
/// `valid` is empty, training accuracy is used instead.
pub fn train(
    kb: &KnowledgeBase,
    train_set: &[QaInstance],
    valid: &[QaInstance],
    vocab: &Vocab,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(kb, train_set, valid, vocab, cfg, |_| {})
}

/// [`train`] with a callback after each round.
pub fn train_with<F: FnMut(&RoundStats)>(
    kb: &KnowledgeBase,
    train_set: &[QaInstance],
    valid: &[QaInstance],
    vocab: &Vocab,
    cfg: &TrainConfig,
    mut on_round: F,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(IrnError::Invalid("empty training set".into()));
    }
    let mut params = ModelParams::init(
        cfg.dim,
        vocab.len(),
        kb.num_entities(),
        kb.num_relations(),
        cfg.seed,
    );
    let terminal = params.terminal();
    let examples = encode_examples(train_set, vocab, cfg.mode, terminal);
    let monitor = if valid.is_empty() { train_set } else { valid };
    let mut qa_opt = Optimizer::new(&params, cfg.adam());
    let mut kb_opt = Optimizer::new(&params, cfg.adam());
    let mut kb_rng = Prng::stream(cfg.seed, "negatives");
    let mut qa_rng = Prng::stream(cfg.seed, "qa-shuffle");

    let mut history = TrainHistory::default();
    let mut best = (f64::NEG_INFINITY, params.clone());
    let mut stale = 0;
    for round in 1..=cfg.max_rounds {
        let started = Instant::now();
        let mut kb_loss = 0.0;
        for _ in 0..cfg.kb_epochs_per_round {
            kb_loss = kb_embedding_epoch(&mut params, &mut kb_opt, kb, cfg, &mut kb_rng)?;
        }
        let qa_loss = qa_epoch(&mut params, &mut qa_opt, &examples, cfg, &mut qa_rng)?;
        let preds = predict_all(&params, vocab, monitor, cfg.mode, cfg.hop_cap)?;
        let val_acc = accuracy(&preds, monitor)?;
        let stats = RoundStats {
            round,
            kb_loss,
            qa_loss,
            val_acc,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::debug!(
            "round {round}: kb {kb_loss:.4} qa {qa_loss:.4} val {val_acc:.4} ({:.1}s)",
            stats.seconds
        );
        on_round(&stats);
        history.rounds.push(stats);
        if val_acc > best.0 {
            best = (val_acc, params.clone());
            history.best_round = round;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best.1,
        history,
    })
}

/// Key/value provenance entries describing a config.
pub fn config_provenance(cfg: &TrainConfig) -> BTreeMap<String, String> {
    CONFIG_KEYS
        .iter()
        .map(|k| (format!("config.{k}"), cfg.get(k).expect("known key")))
        .collect()
}
