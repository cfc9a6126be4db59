use std::collections::BTreeSet;

use rand::Rng;

use super::templates::{FamilyShape, TemplateSet};
use super::{tokenize, GoldPath, QaInstance, QuestionKind};
use crate::error::{IrnError, Result};
use crate::kb::{EntityId, KnowledgeBase, RelationId};

/// A concrete walk `subject —r₁→ e₁ … —r_H→ a` through the KB.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KbPath {
    pub subject: EntityId,
    pub relations: Vec<RelationId>,
    pub entities: Vec<EntityId>,
}

impl KbPath {
    pub fn hops(&self) -> usize {
        self.relations.len()
    }

    pub fn answer(&self) -> EntityId {
        *self.entities.last().expect("non-empty path")
    }
}

/// `S₀ = {subject}`, `S_k = ⋃ neighbors(e, r_k)`; returns `S_H`.
pub fn compute_answer_set(
    kb: &KnowledgeBase,
    subject: EntityId,
    relations: &[RelationId],
) -> BTreeSet<EntityId> {
    let mut frontier = BTreeSet::from([subject]);
    for &r in relations {
        frontier = frontier.iter().flat_map(|&e| kb.objects(e, r)).collect();
        if frontier.is_empty() {
            break;
        }
    }
    frontier
}

/// Reservoir of at most `cap` items, uniform over everything offered.
struct Reservoir<T> {
    cap: usize,
    seen: u64,
    items: Vec<T>,
}

impl<T> Reservoir<T> {
    fn new(cap: usize) -> Self {
        Reservoir {
            cap,
            seen: 0,
            items: Vec::new(),
        }
    }

    fn offer<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) {
        self.seen += 1;
        if self.items.len() < self.cap {
            self.items.push(item);
        } else {
            let j = rng.random_range(0..self.seen);
            if (j as usize) < self.cap {
                self.items[j as usize] = item;
            }
        }
    }
}

/// All `hops`-hop walks whose answer differs from the subject, or a uniform
/// sample of `max_count` of them. Output is sorted.
pub fn extract_paths<R: Rng + ?Sized>(
    kb: &KnowledgeBase,
    hops: usize,
    rng: &mut R,
    max_count: usize,
) -> Result<Vec<KbPath>> {
    if !(2..=3).contains(&hops) {
        return Err(IrnError::Invalid(format!(
            "hops must be 2 or 3, got {hops}"
        )));
    }
    let mut res = Reservoir::new(max_count);
    for s in 0..kb.num_entities() {
        for &(r1, e1) in kb.outgoing(s) {
            for &(r2, e2) in kb.outgoing(e1) {
                if hops == 2 {
                    if e2 != s {
                        res.offer(
                            KbPath {
                                subject: s,
                                relations: vec![r1, r2],
                                entities: vec![e1, e2],
                            },
                            rng,
                        );
                    }
                    continue;
                }
                for &(r3, a) in kb.outgoing(e2) {
                    if a != s {
                        res.offer(
                            KbPath {
                                subject: s,
                                relations: vec![r1, r2, r3],
                                entities: vec![e1, e2, a],
                            },
                            rng,
                        );
                    }
                }
            }
        }
    }
    let mut paths = res.items;
    paths.sort_unstable();
    Ok(paths)
}

/// Turns a KB walk into a templated question with its full answer set.
pub fn generate_question<R: Rng + ?Sized>(
    kb: &KnowledgeBase,
    path: &KbPath,
    templates: &TemplateSet,
    rng: &mut R,
) -> Result<QaInstance> {
    let rel_names: Vec<&str> = path
        .relations
        .iter()
        .map(|&r| kb.relation_name(r))
        .collect();
    let question = templates.realize(
        FamilyShape::Path(path.hops()),
        &[kb.entity_name(path.subject)],
        &rel_names,
        rng,
    )?;
    Ok(QaInstance {
        tokens: tokenize(&question),
        question,
        subjects: vec![path.subject],
        paths: vec![GoldPath {
            relations: path.relations.clone(),
            entities: path.entities.clone(),
        }],
        answers: compute_answer_set(kb, path.subject, &path.relations),
        kind: QuestionKind::Path { hops: path.hops() },
    })
}

/// Extracts up to `max_count` walks and phrases each one `per_path` times.
pub fn generate_path_dataset<R: Rng + ?Sized>(
    kb: &KnowledgeBase,
    templates: &TemplateSet,
    hops: usize,
    max_count: usize,
    per_path: usize,
    rng: &mut R,
) -> Result<Vec<QaInstance>> {
    let per_path = per_path.max(1);
    let paths = extract_paths(kb, hops, rng, max_count.div_ceil(per_path))?;
    let mut out = Vec::with_capacity(paths.len() * per_path);
    for p in &paths {
        for _ in 0..per_path {
            if out.len() == max_count {
                return Ok(out);
            }
            out.push(generate_question(kb, p, templates, rng)?);
        }
    }
    Ok(out)
}

/// Two-subject questions whose answer is reached from both subjects through
/// inverse relations. Requires an inverse-closed KB.
pub fn generate_conjunctive<R: Rng + ?Sized>(
    kb: &KnowledgeBase,
    templates: &TemplateSet,
    rng: &mut R,
    max_count: usize,
) -> Result<Vec<QaInstance>> {
    if !kb.is_inverse_closed() {
        return Err(IrnError::NotInverseClosed);
    }
    // (answer, (source₁, rel₁), (source₂, rel₂)) with rel = inverse relation
    // leading from the source to the answer.
    let mut res = Reservoir::new(max_count);
    for a in 0..kb.num_entities() {
        let in_edges: Vec<(EntityId, RelationId)> = kb
            .outgoing(a)
            .iter()
            .filter_map(|&(r, src)| {
                let inv = kb.inverse_of(r)?;
                kb.is_inverse_relation(inv).then_some((src, inv))
            })
            .collect();
        for i in 0..in_edges.len() {
            for j in (i + 1)..in_edges.len() {
                let (x1, r1) = in_edges[i];
                let (x2, r2) = in_edges[j];
                if r1 != r2 && x1 != x2 {
                    res.offer((a, in_edges[i], in_edges[j]), rng);
                }
            }
        }
    }
    let mut picks = res.items;
    picks.sort_unstable();
    let mut out = Vec::with_capacity(picks.len());
    for (a, (x1, r1), (x2, r2)) in picks {
        let s1 = compute_answer_set(kb, x1, &[r1]);
        let s2 = compute_answer_set(kb, x2, &[r2]);
        let answers: BTreeSet<EntityId> = s1.intersection(&s2).copied().collect();
        if answers.is_empty() {
            continue;
        }
        let question = templates.realize(
            FamilyShape::Conjunctive,
            &[kb.entity_name(x1), kb.entity_name(x2)],
            &[kb.relation_name(r1), kb.relation_name(r2)],
            rng,
        )?;
        out.push(QaInstance {
            tokens: tokenize(&question),
            question,
            subjects: vec![x1, x2],
            paths: vec![
                GoldPath {
                    relations: vec![r1],
                    entities: vec![a],
                },
                GoldPath {
                    relations: vec![r2],
                    entities: vec![a],
                },
            ],
            answers,
            kind: QuestionKind::Conjunctive,
        });
    }
    Ok(out)
}
