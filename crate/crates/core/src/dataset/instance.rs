use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{compute_answer_set, tokenize};
use crate::error::{IrnError, Result};
use crate::kb::{EntityId, KnowledgeBase, RelationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuestionKind {
    /// Chain of `hops` relations from a single subject.
    Path { hops: usize },
    /// Intersection of single-relation queries from several subjects.
    Conjunctive,
}

impl QuestionKind {
    pub const PATH_2H: QuestionKind = QuestionKind::Path { hops: 2 };
    pub const PATH_3H: QuestionKind = QuestionKind::Path { hops: 3 };
}

impl fmt::Display for QuestionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuestionKind::Path { hops } => write!(f, "path-{hops}H"),
            QuestionKind::Conjunctive => f.write_str("conjunctive"),
        }
    }
}

impl FromStr for QuestionKind {
    type Err = IrnError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "conjunctive" {
            return Ok(QuestionKind::Conjunctive);
        }
        s.strip_prefix("path-")
            .and_then(|r| r.strip_suffix('H'))
            .and_then(|h| h.parse().ok())
            .filter(|&h: &usize| h >= 1)
            .map(|hops| QuestionKind::Path { hops })
            .ok_or_else(|| IrnError::Invalid(format!("unknown question kind `{s}`")))
    }
}

/// One labelled answer path `r₁, e₁, …, r_H, a` (subject excluded).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoldPath {
    pub relations: Vec<RelationId>,
    /// Entity reached after each relation; the last one is the answer.
    pub entities: Vec<EntityId>,
}

impl GoldPath {
    pub fn hops(&self) -> usize {
        self.relations.len()
    }

    pub fn answer(&self) -> EntityId {
        *self.entities.last().expect("gold path is never empty")
    }

    /// Every consecutive triple exists in `kb`.
    pub fn is_realizable(&self, kb: &KnowledgeBase, subject: EntityId) -> bool {
        let mut cur = subject;
        for (&r, &e) in self.relations.iter().zip(&self.entities) {
            if !kb.has_triple(cur, r, e) {
                return false;
            }
            cur = e;
        }
        !self.relations.is_empty() && self.relations.len() == self.entities.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaInstance {
    pub question: String,
    pub tokens: Vec<String>,
    pub subjects: Vec<EntityId>,
    /// One path per subject (a single path for path questions).
    pub paths: Vec<GoldPath>,
    pub answers: BTreeSet<EntityId>,
    pub kind: QuestionKind,
}

impl QaInstance {
    pub fn subject(&self) -> EntityId {
        self.subjects[0]
    }

    pub fn gold_path(&self) -> &GoldPath {
        &self.paths[0]
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.paths.iter().flat_map(|p| p.relations.iter().copied())
    }

    /// Checks realizability, answer membership and answer-set exactness
    /// against `kb`.
    pub fn validate(&self, kb: &KnowledgeBase) -> Result<()> {
        let fail = |m: &str| Err(IrnError::Invalid(format!("{}: {m}", self.question)));
        if self.subjects.is_empty() || self.subjects.len() != self.paths.len() {
            return fail("subjects and paths disagree");
        }
        if self.answers.is_empty() {
            return fail("empty answer set");
        }
        match self.kind {
            QuestionKind::Path { hops } => {
                if self.subjects.len() != 1 || self.paths[0].hops() != hops {
                    return fail("hop count does not match kind");
                }
            }
            QuestionKind::Conjunctive => {
                if self.subjects.len() < 2 {
                    return fail("conjunctive question needs two subjects");
                }
            }
        }
        let mut expected: Option<BTreeSet<EntityId>> = None;
        for (&s, p) in self.subjects.iter().zip(&self.paths) {
            if !p.is_realizable(kb, s) {
                return fail("gold path not realizable in the KB");
            }
            if !self.answers.contains(&p.answer()) {
                return fail("final path entity missing from answer set");
            }
            let set = compute_answer_set(kb, s, &p.relations);
            expected = Some(match expected {
                None => set,
                Some(acc) => acc.intersection(&set).copied().collect(),
            });
        }
        if expected.as_ref() != Some(&self.answers) {
            return fail("answer set differs from KB traversal");
        }
        Ok(())
    }
}

/// Name ↔ ID lookups needed to (de)serialize instances.
pub trait Symbols {
    fn entity_id(&self, name: &str) -> Result<EntityId>;
    fn relation_id(&self, name: &str) -> Result<RelationId>;
    fn entity_name(&self, id: EntityId) -> &str;
    fn relation_name(&self, id: RelationId) -> &str;
}

impl Symbols for KnowledgeBase {
    fn entity_id(&self, name: &str) -> Result<EntityId> {
        KnowledgeBase::entity_id(self, name)
    }
    fn relation_id(&self, name: &str) -> Result<RelationId> {
        KnowledgeBase::relation_id(self, name)
    }
    fn entity_name(&self, id: EntityId) -> &str {
        KnowledgeBase::entity_name(self, id)
    }
    fn relation_name(&self, id: RelationId) -> &str {
        KnowledgeBase::relation_name(self, id)
    }
}

/// On-disk JSON Lines record. Everything is stored by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub question: String,
    pub subjects: Vec<String>,
    /// Per subject: `[r₁, e₁, r₂, …, a]`.
    pub path: Vec<Vec<String>>,
    pub answers: Vec<String>,
    pub kind: String,
}

impl InstanceRecord {
    pub fn from_instance(inst: &QaInstance, syms: &impl Symbols) -> Self {
        InstanceRecord {
            question: inst.question.clone(),
            subjects: inst
                .subjects
                .iter()
                .map(|&e| syms.entity_name(e).to_string())
                .collect(),
            path: inst
                .paths
                .iter()
                .map(|p| {
                    p.relations
                        .iter()
                        .zip(&p.entities)
                        .flat_map(|(&r, &e)| {
                            [
                                syms.relation_name(r).to_string(),
                                syms.entity_name(e).to_string(),
                            ]
                        })
                        .collect()
                })
                .collect(),
            answers: inst
                .answers
                .iter()
                .map(|&e| syms.entity_name(e).to_string())
                .collect(),
            kind: inst.kind.to_string(),
        }
    }

    pub fn to_instance(&self, syms: &impl Symbols) -> Result<QaInstance> {
        let subjects = self
            .subjects
            .iter()
            .map(|s| syms.entity_id(s))
            .collect::<Result<Vec<_>>>()?;
        let mut paths = Vec::with_capacity(self.path.len());
        for p in &self.path {
            if p.is_empty() || p.len() % 2 != 0 {
                return Err(IrnError::Invalid(format!(
                    "path must alternate relation/entity names, got {} items",
                    p.len()
                )));
            }
            let mut gp = GoldPath {
                relations: Vec::new(),
                entities: Vec::new(),
            };
            for pair in p.chunks(2) {
                gp.relations.push(syms.relation_id(&pair[0])?);
                gp.entities.push(syms.entity_id(&pair[1])?);
            }
            paths.push(gp);
        }
        if paths.len() != subjects.len() {
            return Err(IrnError::Invalid(format!(
                "{} subjects but {} paths",
                subjects.len(),
                paths.len()
            )));
        }
        let answers = self
            .answers
            .iter()
            .map(|a| syms.entity_id(a))
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(QaInstance {
            question: self.question.clone(),
            tokens: tokenize(&self.question),
            subjects,
            paths,
            answers,
            kind: self.kind.parse()?,
        })
    }
}

pub fn write_jsonl(
    path: impl AsRef<Path>,
    instances: &[QaInstance],
    syms: &impl Symbols,
) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for inst in instances {
        serde_json::to_writer(&mut buf, &InstanceRecord::from_instance(inst, syms))?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| IrnError::io(path, e))?;
    f.write_all(&buf).map_err(|e| IrnError::io(path, e))
}

pub fn read_jsonl(path: impl AsRef<Path>, syms: &impl Symbols) -> Result<Vec<QaInstance>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| IrnError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| IrnError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let wrap = |msg: String| IrnError::Parse { line: n + 1, msg };
        let rec: InstanceRecord = serde_json::from_str(&line).map_err(|e| wrap(e.to_string()))?;
        out.push(rec.to_instance(syms).map_err(|e| wrap(e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_round_trips_through_text() {
        for k in [
            QuestionKind::PATH_2H,
            QuestionKind::PATH_3H,
            QuestionKind::Path { hops: 1 },
            QuestionKind::Conjunctive,
        ] {
            assert_eq!(k.to_string().parse::<QuestionKind>().unwrap(), k);
        }
        assert!("path-0H".parse::<QuestionKind>().is_err());
        assert!("chain".parse::<QuestionKind>().is_err());
    }
}
