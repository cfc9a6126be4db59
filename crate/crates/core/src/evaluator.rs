//! Accuracy metrics and the experiment harness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::TrainedModel;
use crate::dataset::{
    compute_answer_set, make_unseen_split, split_dataset, InstanceRecord, QaInstance, QuestionKind,
    Symbols, Vocab, DEFAULT_HOLDOUT,
};
use crate::error::{IrnError, Result};
use crate::inference::{
    answer_conjunctive, answer_question, forcing_for, override_relations, sum_distributions,
    Halting, PathStep,
};
use crate::kb::{EntityId, KnowledgeBase};
use crate::model::{ModelInput, ModelParams, StopReason, TrainMode};
use crate::numerics::argmax;
use crate::trainer::{config_provenance, train, TrainConfig, TrainHistory};

/// What the model predicted for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub answer: EntityId,
    /// One decoded path per subject.
    pub paths: Vec<Vec<PathStep>>,
    pub stop: StopReason,
}

impl InstancePrediction {
    /// A prediction that replays the labelled paths exactly.
    pub fn from_gold(inst: &QaInstance) -> Self {
        InstancePrediction {
            answer: inst.gold_path().answer(),
            paths: inst
                .paths
                .iter()
                .map(|p| {
                    p.relations
                        .iter()
                        .zip(&p.entities)
                        .map(|(&relation, &entity)| PathStep { relation, entity })
                        .collect()
                })
                .collect(),
            stop: StopReason::Terminal,
        }
    }
}

/// Terminal-halted decoding for fully supervised models; answer-only
/// models run exactly the labelled number of hops.
pub fn halting_for(mode: TrainMode, hop_cap: usize, hops: usize) -> Halting {
    match mode {
        TrainMode::Irn => Halting::Terminal { hop_cap },
        TrainMode::IrnWeak => Halting::FixedHops(hops),
    }
}

pub fn predict_instance(
    params: &ModelParams,
    vocab: &Vocab,
    inst: &QaInstance,
    mode: TrainMode,
    hop_cap: usize,
) -> Result<InstancePrediction> {
    let tokens = vocab.encode(&inst.tokens);
    let halting = halting_for(mode, hop_cap, inst.gold_path().hops());
    if inst.subjects.len() >= 2 {
        let c = answer_conjunctive(params, &tokens, &inst.subjects, halting)?;
        let stop = c.branches[0].stop;
        Ok(InstancePrediction {
            answer: c.answer,
            paths: c.branches.into_iter().map(|b| b.path).collect(),
            stop,
        })
    } else {
        let input = ModelInput {
            tokens,
            subject: inst.subject(),
        };
        let p = answer_question(params, &input, halting)?;
        Ok(InstancePrediction {
            answer: p.answer,
            paths: vec![p.path],
            stop: p.stop,
        })
    }
}

pub fn predict_all(
    params: &ModelParams,
    vocab: &Vocab,
    instances: &[QaInstance],
    mode: TrainMode,
    hop_cap: usize,
) -> Result<Vec<InstancePrediction>> {
    instances
        .iter()
        .map(|inst| predict_instance(params, vocab, inst, mode, hop_cap))
        .collect()
}

/// Like [`predict_instance`], with every labelled relation forced at its
/// hop. Conjunctive branches are forced independently and summed.
pub fn predict_instance_forced(
    params: &ModelParams,
    vocab: &Vocab,
    inst: &QaInstance,
    mode: TrainMode,
    hop_cap: usize,
) -> Result<InstancePrediction> {
    let tokens = vocab.encode(&inst.tokens);
    let halting = halting_for(mode, hop_cap, inst.gold_path().hops());
    let mut branches = Vec::with_capacity(inst.subjects.len());
    for (&subject, path) in inst.subjects.iter().zip(&inst.paths) {
        let input = ModelInput {
            tokens: tokens.clone(),
            subject,
        };
        branches.push(override_relations(
            params,
            &input,
            &forcing_for(&path.relations),
            halting,
        )?);
    }
    let dists: Vec<&[f64]> = branches.iter().map(|b| b.distribution.as_slice()).collect();
    let answer = if branches.len() == 1 {
        branches[0].answer
    } else {
        argmax(&sum_distributions(&dists)?)
    };
    Ok(InstancePrediction {
        answer,
        stop: branches[0].stop,
        paths: branches.into_iter().map(|b| b.path).collect(),
    })
}

/// Accuracy without and with gold relations forced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverrideReport {
    pub count: usize,
    pub baseline: f64,
    pub forced: f64,
    pub uplift: f64,
}

pub fn override_evaluation(
    params: &ModelParams,
    vocab: &Vocab,
    instances: &[QaInstance],
    mode: TrainMode,
    hop_cap: usize,
) -> Result<OverrideReport> {
    let base = predict_all(params, vocab, instances, mode, hop_cap)?;
    let forced = instances
        .iter()
        .map(|i| predict_instance_forced(params, vocab, i, mode, hop_cap))
        .collect::<Result<Vec<_>>>()?;
    let baseline = accuracy(&base, instances)?;
    let forced = accuracy(&forced, instances)?;
    Ok(OverrideReport {
        count: instances.len(),
        baseline,
        forced,
        uplift: forced - baseline,
    })
}

fn check_lengths(preds: &[InstancePrediction], instances: &[QaInstance]) -> Result<()> {
    if preds.len() != instances.len() {
        return Err(IrnError::Shape(format!(
            "{} predictions for {} instances",
            preds.len(),
            instances.len()
        )));
    }
    if instances.is_empty() {
        return Err(IrnError::Invalid("no instances to score".into()));
    }
    Ok(())
}

/// Fraction of instances whose predicted answer is in the answer set.
pub fn accuracy(preds: &[InstancePrediction], instances: &[QaInstance]) -> Result<f64> {
    check_lengths(preds, instances)?;
    let hits = preds
        .iter()
        .zip(instances)
        .filter(|(p, i)| i.answers.contains(&p.answer))
        .count();
    Ok(hits as f64 / instances.len() as f64)
}

/// Entities at position `h` (0-based) of some walk along the gold
/// relations that ends in the answer set.
pub fn consistent_prefix_entities(
    kb: &KnowledgeBase,
    inst: &QaInstance,
    h: usize,
) -> BTreeSet<EntityId> {
    let rels = &inst.gold_path().relations;
    compute_answer_set(kb, inst.subject(), &rels[..=h])
        .into_iter()
        .filter(|&e| {
            compute_answer_set(kb, e, &rels[h + 1..])
                .iter()
                .any(|a| inst.answers.contains(a))
        })
        .collect()
}

/// Per-position accuracy along the answer path: `r₁, e₁, …, r_H, a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerHopTable {
    pub columns: Vec<String>,
    /// Intermediate entities must equal the labelled path entity.
    pub strict: Vec<f64>,
    /// Intermediate entities may lie on any walk consistent with the gold
    /// relations and answer set. Absent without a KB.
    pub branch_tolerant: Option<Vec<f64>>,
    pub count: usize,
}

/// Per-hop scores for path instances with exactly `hops` hops.
pub fn per_hop_accuracy(
    preds: &[InstancePrediction],
    instances: &[QaInstance],
    hops: usize,
    kb: Option<&KnowledgeBase>,
) -> Result<PerHopTable> {
    check_lengths(preds, instances)?;
    if hops == 0 {
        return Err(IrnError::Invalid("hop count must be positive".into()));
    }
    let mut columns = Vec::with_capacity(2 * hops);
    for h in 1..=hops {
        columns.push(format!("r{h}"));
        columns.push(if h == hops {
            "a".into()
        } else {
            format!("e{h}")
        });
    }
    let mut strict = vec![0usize; 2 * hops];
    let mut tolerant = vec![0usize; 2 * hops];
    let mut count = 0usize;
    for (p, inst) in preds.iter().zip(instances) {
        if inst.kind != (QuestionKind::Path { hops }) {
            continue;
        }
        count += 1;
        let gold = inst.gold_path();
        let path = p.paths.first().map(Vec::as_slice).unwrap_or(&[]);
        for h in 0..hops {
            let step = path.get(h);
            if step.is_some_and(|s| s.relation == gold.relations[h]) {
                strict[2 * h] += 1;
                tolerant[2 * h] += 1;
            }
            if h + 1 == hops {
                if inst.answers.contains(&p.answer) {
                    strict[2 * h + 1] += 1;
                    tolerant[2 * h + 1] += 1;
                }
            } else if let Some(s) = step {
                if s.entity == gold.entities[h] {
                    strict[2 * h + 1] += 1;
                }
                if let Some(kb) = kb {
                    if consistent_prefix_entities(kb, inst, h).contains(&s.entity) {
                        tolerant[2 * h + 1] += 1;
                    }
                }
            }
        }
    }
    let frac = |v: Vec<usize>| -> Vec<f64> {
        v.into_iter()
            .map(|c| {
                if count == 0 {
                    0.0
                } else {
                    c as f64 / count as f64
                }
            })
            .collect()
    };
    Ok(PerHopTable {
        columns,
        strict: frac(strict),
        branch_tolerant: kb.map(|_| frac(tolerant)),
        count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub count: usize,
    pub per_kind: BTreeMap<String, KindReport>,
    /// Keyed by question kind, e.g. `path-2H`.
    pub per_hop: BTreeMap<String, PerHopTable>,
    /// Named slices of the test set (e.g. questions with held-out relations).
    #[serde(default)]
    pub subsets: BTreeMap<String, KindReport>,
    /// Accuracies of repeated runs when more than one was made.
    #[serde(default)]
    pub repeats: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn build(
        preds: &[InstancePrediction],
        instances: &[QaInstance],
        with_per_hop: bool,
        kb: Option<&KnowledgeBase>,
    ) -> Result<Self> {
        let acc = accuracy(preds, instances)?;
        let mut groups: BTreeMap<QuestionKind, (Vec<InstancePrediction>, Vec<QaInstance>)> =
            BTreeMap::new();
        for (p, i) in preds.iter().zip(instances) {
            let g = groups.entry(i.kind).or_default();
            g.0.push(p.clone());
            g.1.push(i.clone());
        }
        let mut per_kind = BTreeMap::new();
        let mut per_hop = BTreeMap::new();
        for (kind, (p, i)) in &groups {
            per_kind.insert(
                kind.to_string(),
                KindReport {
                    count: i.len(),
                    accuracy: accuracy(p, i)?,
                },
            );
            if let (true, QuestionKind::Path { hops }) = (with_per_hop, kind) {
                per_hop.insert(kind.to_string(), per_hop_accuracy(p, i, *hops, kb)?);
            }
        }
        Ok(EvalReport {
            accuracy: acc,
            count: instances.len(),
            per_kind,
            per_hop,
            subsets: BTreeMap::new(),
            repeats: Vec::new(),
            metadata: BTreeMap::new(),
        })
    }

    /// Flat `section,key,value` summary.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,value\n");
        let _ = writeln!(out, "overall,accuracy,{}", self.accuracy);
        let _ = writeln!(out, "overall,count,{}", self.count);
        for (k, r) in &self.per_kind {
            let _ = writeln!(out, "kind,{k}.accuracy,{}", r.accuracy);
            let _ = writeln!(out, "kind,{k}.count,{}", r.count);
        }
        for (k, t) in &self.per_hop {
            for (c, v) in t.columns.iter().zip(&t.strict) {
                let _ = writeln!(out, "per_hop_strict,{k}.{c},{v}");
            }
            if let Some(bt) = &t.branch_tolerant {
                for (c, v) in t.columns.iter().zip(bt) {
                    let _ = writeln!(out, "per_hop_branch_tolerant,{k}.{c},{v}");
                }
            }
        }
        for (k, r) in &self.subsets {
            let _ = writeln!(out, "subset,{k}.accuracy,{}", r.accuracy);
            let _ = writeln!(out, "subset,{k}.count,{}", r.count);
        }
        for (i, a) in self.repeats.iter().enumerate() {
            let _ = writeln!(out, "repeat,{},{a}", i + 1);
        }
        out
    }
}

/// Mean of a non-empty list.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the instances' on-disk representation.
pub fn dataset_fingerprint(instances: &[QaInstance], syms: &impl Symbols) -> String {
    let mut h = Sha256::new();
    for inst in instances {
        let rec = InstanceRecord::from_instance(inst, syms);
        h.update(serde_json::to_vec(&rec).expect("records serialize"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn kb_fingerprint(kb: &KnowledgeBase) -> String {
    sha256_hex(kb.to_tsv().as_bytes())
}

pub fn config_fingerprint(cfg: &TrainConfig) -> String {
    sha256_hex(cfg.to_kv().as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Standard,
    Incomplete,
    Unseen,
}

impl std::str::FromStr for Experiment {
    type Err = IrnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Experiment::Standard),
            "incomplete" => Ok(Experiment::Incomplete),
            "unseen" => Ok(Experiment::Unseen),
            _ => Err(IrnError::Invalid(format!(
                "unknown experiment `{s}` (standard | incomplete | unseen)"
            ))),
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Experiment::Standard => "standard",
            Experiment::Incomplete => "incomplete",
            Experiment::Unseen => "unseen",
        })
    }
}

/// Fraction of triples removed in the incomplete-KB configuration.
pub const INCOMPLETE_DROP: f64 = 0.5;

/// Reproducibility record for one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub config_sha256: String,
    pub kb_sha256: String,
    /// Digest of the KB the model was trained against (differs from
    /// `kb_sha256` for the incomplete configuration).
    pub training_kb_sha256: String,
    pub dataset_sha256: String,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

pub struct ExperimentResult {
    pub model: TrainedModel,
    pub history: TrainHistory,
    pub report: EvalReport,
    pub manifest: Manifest,
    pub test: Vec<QaInstance>,
    pub predictions: Vec<InstancePrediction>,
}

/// Trains and evaluates one configuration on an 8:1:1 split of `instances`.
///
/// `incomplete` trains against a KB with half its triples removed (answer
/// labels still come from the full KB). `unseen` moves every question that
/// uses a held-out relation into the test set.
pub fn run_experiment(
    experiment: Experiment,
    kb: &KnowledgeBase,
    instances: &[QaInstance],
    cfg: &TrainConfig,
) -> Result<ExperimentResult> {
    run_experiment_with(experiment, kb, instances, cfg, &DEFAULT_HOLDOUT)
}

pub fn run_experiment_with(
    experiment: Experiment,
    kb: &KnowledgeBase,
    instances: &[QaInstance],
    cfg: &TrainConfig,
    holdout: &[&str],
) -> Result<ExperimentResult> {
    let (pool, moved) = match experiment {
        Experiment::Unseen => make_unseen_split(instances, holdout, kb)?,
        _ => (instances.to_vec(), Vec::new()),
    };
    let split = split_dataset(&pool, (0.8, 0.1, 0.1), cfg.seed)?;
    let mut test = split.test;
    let n_moved = moved.len();
    test.extend(moved);
    let train_kb = match experiment {
        Experiment::Incomplete => kb.drop_random_triples(INCOMPLETE_DROP, cfg.seed)?,
        _ => kb.clone(),
    };
    let vocab = Vocab::build(&split.train);
    let outcome = train(&train_kb, &split.train, &split.valid, &vocab, cfg)?;
    let preds = predict_all(&outcome.params, &vocab, &test, cfg.mode, cfg.hop_cap)?;
    let mut report = EvalReport::build(&preds, &test, true, Some(kb))?;
    if experiment == Experiment::Unseen {
        let seen = test.len() - n_moved;
        for (name, range) in [("seen", 0..seen), ("unseen", seen..test.len())] {
            if range.is_empty() {
                continue;
            }
            report.subsets.insert(
                name.to_string(),
                KindReport {
                    count: range.len(),
                    accuracy: accuracy(&preds[range.clone()], &test[range])?,
                },
            );
        }
    }
    let manifest = Manifest {
        experiment,
        seed: cfg.seed,
        config: config_provenance(cfg),
        config_sha256: config_fingerprint(cfg),
        kb_sha256: kb_fingerprint(kb),
        training_kb_sha256: kb_fingerprint(&train_kb),
        dataset_sha256: dataset_fingerprint(instances, kb),
        train: split.train.len(),
        valid: split.valid.len(),
        test: test.len(),
    };
    report.metadata = BTreeMap::from([
        ("experiment".to_string(), experiment.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("mode".to_string(), cfg.mode.to_string()),
        ("config_sha256".to_string(), manifest.config_sha256.clone()),
        (
            "dataset_sha256".to_string(),
            manifest.dataset_sha256.clone(),
        ),
        (
            "best_round".to_string(),
            outcome.history.best_round.to_string(),
        ),
    ]);
    let mut model = TrainedModel::for_kb(outcome.params, vocab, kb, cfg.mode)?;
    model.provenance = config_provenance(cfg);
    model
        .provenance
        .insert("experiment".into(), experiment.to_string());
    model
        .provenance
        .insert("kb_sha256".into(), manifest.kb_sha256.clone());
    model.provenance.insert(
        "training_kb_sha256".into(),
        manifest.training_kb_sha256.clone(),
    );
    model
        .provenance
        .insert("dataset_sha256".into(), manifest.dataset_sha256.clone());
    Ok(ExperimentResult {
        model,
        history: outcome.history,
        report,
        manifest,
        test,
        predictions: preds,
    })
}
