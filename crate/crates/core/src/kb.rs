//! In-memory knowledge base of `(subject, relation, object)` triples.
//!
//! Entities and relations are interned in first-seen order, so the same
//! TSV file always produces the same IDs. Inverse relations are stored as
//! ordinary relations named `<name>^-1`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::debug;
use rand::seq::index;

use crate::error::{IrnError, Result};
use crate::numerics::Prng;

pub type EntityId = usize;
pub type RelationId = usize;

pub const INVERSE_SUFFIX: &str = "^-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    entities: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_ids: HashMap<String, RelationId>,
    inverse: Vec<Option<RelationId>>,
    triples: Vec<Triple>,
    out_index: HashMap<(EntityId, RelationId), BTreeSet<EntityId>>,
    /// Per-subject outgoing `(relation, object)` pairs, sorted.
    adjacency: Vec<Vec<(RelationId, EntityId)>>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a KB from name triples, dropping exact duplicates.
    pub fn from_named_triples<'a, I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut kb = KnowledgeBase::new();
        for (s, r, o) in triples {
            kb.insert_named(s, r, o);
        }
        if kb.triples.is_empty() {
            return Err(IrnError::EmptyKb);
        }
        kb.rebuild_index();
        Ok(kb)
    }

    /// Reads a UTF-8 `subject<TAB>relation<TAB>object` file.
    pub fn load_triples(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| IrnError::io(path, e))?;
        Self::parse_tsv(&text)
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut kb = KnowledgeBase::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields.iter().any(|f| f.trim().is_empty()) {
                return Err(IrnError::Parse {
                    line: n + 1,
                    msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            if !kb.insert_named(fields[0].trim(), fields[1].trim(), fields[2].trim()) {
                debug!("duplicate triple on line {} ignored", n + 1);
            }
        }
        if kb.triples.is_empty() {
            return Err(IrnError::EmptyKb);
        }
        kb.rebuild_index();
        Ok(kb)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                self.entities[t.subject], self.relations[t.relation], self.entities[t.object]
            );
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| IrnError::io(path, e))
    }

    fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entities.len();
        self.entities.push(name.to_string());
        self.entity_ids.insert(name.to_string(), id);
        id
    }

    fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relations.len();
        self.relations.push(name.to_string());
        self.relation_ids.insert(name.to_string(), id);
        self.inverse.push(None);
        id
    }

    /// Returns false when the triple was already present. Does not rebuild
    /// the index.
    fn insert_named(&mut self, s: &str, r: &str, o: &str) -> bool {
        let subject = self.intern_entity(s);
        let relation = self.intern_relation(r);
        let object = self.intern_entity(o);
        self.insert(Triple {
            subject,
            relation,
            object,
        })
    }

    fn insert(&mut self, t: Triple) -> bool {
        let objs = self.out_index.entry((t.subject, t.relation)).or_default();
        if objs.insert(t.object) {
            self.triples.push(t);
            true
        } else {
            false
        }
    }

    fn rebuild_index(&mut self) {
        self.out_index.clear();
        self.adjacency = vec![Vec::new(); self.entities.len()];
        for t in &self.triples {
            self.out_index
                .entry((t.subject, t.relation))
                .or_default()
                .insert(t.object);
            self.adjacency[t.subject].push((t.relation, t.object));
        }
        for adj in &mut self.adjacency {
            adj.sort_unstable();
        }
    }

    /// Materializes `r^-1` for every relation and `(o, r^-1, s)` for every
    /// `(s, r, o)`. Idempotent.
    pub fn add_inverse_relations(mut self) -> Result<Self> {
        let base_count = self.relations.len();
        for r in 0..base_count {
            if self.inverse[r].is_some() {
                continue;
            }
            let name = self.relations[r].clone();
            let inv_name = inverse_name(&name);
            let inv = match self.relation_ids.get(&inv_name) {
                Some(&existing) => {
                    // A pre-existing relation with the inverse name was not
                    // produced by closure.
                    return Err(IrnError::NameCollision(self.relations[existing].clone()));
                }
                None => self.intern_relation(&inv_name),
            };
            self.inverse[r] = Some(inv);
            self.inverse[inv] = Some(r);
        }
        let originals = self.triples.clone();
        for t in originals {
            let inv = self.inverse[t.relation].expect("closure assigned every inverse");
            self.insert(Triple {
                subject: t.object,
                relation: inv,
                object: t.subject,
            });
        }
        self.rebuild_index();
        Ok(self)
    }

    pub fn is_inverse_closed(&self) -> bool {
        self.inverse.iter().all(Option::is_some)
            && self.triples.iter().all(|t| {
                let inv = self.inverse[t.relation].unwrap();
                self.out_index
                    .get(&(t.object, inv))
                    .is_some_and(|set| set.contains(&t.subject))
            })
    }

    /// Exactly the objects `o` with `(entity, relation, o)` in the KB.
    pub fn neighbors(&self, entity: EntityId, relation: RelationId) -> Result<Vec<EntityId>> {
        self.check_entity(entity)?;
        self.check_relation(relation)?;
        Ok(self.objects(entity, relation).collect())
    }

    /// Unchecked variant of [`neighbors`](Self::neighbors) for hot loops.
    pub fn objects(
        &self,
        entity: EntityId,
        relation: RelationId,
    ) -> impl Iterator<Item = EntityId> + '_ {
        self.out_index
            .get(&(entity, relation))
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    pub fn has_triple(&self, s: EntityId, r: RelationId, o: EntityId) -> bool {
        self.out_index
            .get(&(s, r))
            .is_some_and(|set| set.contains(&o))
    }

    /// Outgoing `(relation, object)` pairs of `entity`, sorted.
    pub fn outgoing(&self, entity: EntityId) -> &[(RelationId, EntityId)] {
        self.adjacency.get(entity).map_or(&[], Vec::as_slice)
    }

    /// Removes `⌊fraction·|triples|⌋` triples chosen uniformly without
    /// replacement. Entity and relation tables are kept intact.
    pub fn drop_random_triples(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(IrnError::Invalid(format!(
                "drop fraction {fraction} outside [0,1]"
            )));
        }
        let n = self.triples.len();
        let k = (fraction * n as f64).floor() as usize;
        let mut rng = Prng::stream(seed, "ablation");
        let mut removed = vec![false; n];
        for i in index::sample(&mut rng, n, k) {
            removed[i] = true;
        }
        let mut out = self.clone();
        out.triples = self
            .triples
            .iter()
            .zip(&removed)
            .filter(|(_, &r)| !r)
            .map(|(t, _)| *t)
            .collect();
        out.rebuild_index();
        Ok(out)
    }

    fn check_entity(&self, id: EntityId) -> Result<()> {
        if id < self.entities.len() {
            Ok(())
        } else {
            Err(IrnError::OutOfBounds {
                what: "entity",
                id,
                size: self.entities.len(),
            })
        }
    }

    fn check_relation(&self, id: RelationId) -> Result<()> {
        if id < self.relations.len() {
            Ok(())
        } else {
            Err(IrnError::OutOfBounds {
                what: "relation",
                id,
                size: self.relations.len(),
            })
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id]
    }

    pub fn entity_id(&self, name: &str) -> Result<EntityId> {
        self.entity_ids
            .get(name)
            .copied()
            .ok_or_else(|| IrnError::UnknownEntity(name.to_string()))
    }

    pub fn relation_id(&self, name: &str) -> Result<RelationId> {
        self.relation_ids
            .get(name)
            .copied()
            .ok_or_else(|| IrnError::UnknownRelation(name.to_string()))
    }

    pub fn inverse_of(&self, relation: RelationId) -> Option<RelationId> {
        self.inverse.get(relation).copied().flatten()
    }

    pub fn is_inverse_relation(&self, relation: RelationId) -> bool {
        self.relations[relation].ends_with(INVERSE_SUFFIX)
    }

    /// Triple set as a hash set, for comparisons in tests and tools.
    pub fn triple_set(&self) -> HashSet<Triple> {
        self.triples.iter().copied().collect()
    }
}

pub fn inverse_name(name: &str) -> String {
    match name.strip_suffix(INVERSE_SUFFIX) {
        Some(base) => base.to_string(),
        None => format!("{name}{INVERSE_SUFFIX}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obama() -> KnowledgeBase {
        KnowledgeBase::from_named_triples([
            ("Barack_Obama", "Children", "Malia_Obama"),
            ("Barack_Obama", "Children", "Sasha_Obama"),
            ("Malia_Obama", "Age", "18"),
            ("Sasha_Obama", "Age", "14"),
        ])
        .unwrap()
    }

    #[test]
    fn dedups_and_assigns_first_seen_ids() {
        let kb = KnowledgeBase::parse_tsv("a\tr1\tb\nb\tr2\tc\na\tr1\tb\n").unwrap();
        assert_eq!(kb.num_entities(), 3);
        assert_eq!(kb.num_relations(), 2);
        assert_eq!(kb.num_triples(), 2);
        assert_eq!(kb.entity_id("a").unwrap(), 0);
        assert_eq!(kb.entity_id("c").unwrap(), 2);
    }

    #[test]
    fn arity_violation_reports_line() {
        match KnowledgeBase::parse_tsv("x\ty\n") {
            Err(IrnError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match KnowledgeBase::parse_tsv("a\tr\tb\n\na\tr\n") {
            Err(IrnError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_error() {
        assert!(matches!(
            KnowledgeBase::parse_tsv("\n\n"),
            Err(IrnError::EmptyKb)
        ));
    }

    #[test]
    fn neighbors_of_one_to_many_relation() {
        let kb = obama();
        let o = kb.entity_id("Barack_Obama").unwrap();
        let c = kb.relation_id("Children").unwrap();
        let names: Vec<&str> = kb
            .neighbors(o, c)
            .unwrap()
            .into_iter()
            .map(|e| kb.entity_name(e))
            .collect();
        assert_eq!(names, vec!["Malia_Obama", "Sasha_Obama"]);
        let age = kb.relation_id("Age").unwrap();
        assert!(kb.neighbors(o, age).unwrap().is_empty());
        assert!(kb.neighbors(99, c).is_err());
        assert!(kb.neighbors(o, 99).is_err());
    }

    #[test]
    fn inverse_closure_example() {
        let kb = KnowledgeBase::from_named_triples([("Marco_Reus", "plays_in_club", "BD")])
            .unwrap()
            .add_inverse_relations()
            .unwrap();
        let bd = kb.entity_id("BD").unwrap();
        let inv = kb.relation_id("plays_in_club^-1").unwrap();
        let reus = kb.entity_id("Marco_Reus").unwrap();
        assert_eq!(kb.neighbors(bd, inv).unwrap(), vec![reus]);
        assert!(kb.is_inverse_closed());
    }

    #[test]
    fn inverse_closure_counts_and_idempotence() {
        let kb = KnowledgeBase::from_named_triples([("a", "r", "b"), ("b", "q", "c")]).unwrap();
        let n_r = kb.num_relations();
        let closed = kb.add_inverse_relations().unwrap();
        assert_eq!(closed.num_triples(), 4);
        assert_eq!(closed.num_relations(), 2 * n_r);
        let again = closed.clone().add_inverse_relations().unwrap();
        assert_eq!(again.num_triples(), 4);
        assert_eq!(again.num_relations(), 2 * n_r);
    }

    #[test]
    fn inverse_name_collision_is_error() {
        let kb = KnowledgeBase::from_named_triples([("a", "r", "b"), ("b", "r^-1", "c")]).unwrap();
        assert!(matches!(
            kb.add_inverse_relations(),
            Err(IrnError::NameCollision(_))
        ));
    }

    #[test]
    fn drop_keeps_tables_and_is_deterministic() {
        let kb = obama();
        let same = kb.drop_random_triples(0.0, 3).unwrap();
        assert_eq!(same.triples(), kb.triples());
        let half = kb.drop_random_triples(0.5, 3).unwrap();
        assert_eq!(half.num_triples(), 2);
        assert_eq!(half.num_entities(), kb.num_entities());
        assert_eq!(half.num_relations(), kb.num_relations());
        let again = kb.drop_random_triples(0.5, 3).unwrap();
        assert_eq!(half.triples(), again.triples());
        assert!(kb.drop_random_triples(1.5, 3).is_err());
    }

    fn random_kb(raw: &[(u8, u8, u8)]) -> Option<KnowledgeBase> {
        let names: Vec<(String, String, String)> = raw
            .iter()
            .map(|(s, r, o)| (format!("e{s}"), format!("r{}", r % 6), format!("e{o}")))
            .collect();
        KnowledgeBase::from_named_triples(
            names
                .iter()
                .map(|(s, r, o)| (s.as_str(), r.as_str(), o.as_str())),
        )
        .ok()
    }

    proptest! {
        #[test]
        fn index_matches_linear_scan(raw in prop::collection::vec((0u8..40, 0u8..6, 0u8..40), 1..400)) {
            let kb = random_kb(&raw).unwrap();
            for s in 0..kb.num_entities() {
                for r in 0..kb.num_relations() {
                    let mut scan: Vec<EntityId> = kb
                        .triples()
                        .iter()
                        .filter(|t| t.subject == s && t.relation == r)
                        .map(|t| t.object)
                        .collect();
                    scan.sort_unstable();
                    prop_assert_eq!(kb.neighbors(s, r).unwrap(), scan);
                }
            }
            let unique: HashSet<_> = kb.triples().iter().collect();
            prop_assert_eq!(unique.len(), kb.num_triples());
        }

        #[test]
        fn closure_restricted_to_originals_recovers_input(raw in prop::collection::vec((0u8..30, 0u8..6, 0u8..30), 1..200)) {
            let kb = random_kb(&raw).unwrap();
            let n_r = kb.num_relations();
            let closed = kb.clone().add_inverse_relations().unwrap();
            prop_assert!(closed.is_inverse_closed());
            let restricted: HashSet<Triple> = closed
                .triples()
                .iter()
                .filter(|t| t.relation < n_r)
                .copied()
                .collect();
            prop_assert_eq!(restricted, kb.triple_set());
        }

        #[test]
        fn drop_never_touches_tables(raw in prop::collection::vec((0u8..30, 0u8..6, 0u8..30), 1..200), frac in 0.0f64..=1.0, seed in 0u64..1000) {
            let kb = random_kb(&raw).unwrap();
            let d = kb.drop_random_triples(frac, seed).unwrap();
            prop_assert_eq!(d.entity_names(), kb.entity_names());
            prop_assert_eq!(d.relation_names(), kb.relation_names());
            let removed = (frac * kb.num_triples() as f64).floor() as usize;
            prop_assert_eq!(d.num_triples(), kb.num_triples() - removed);
            prop_assert!(d.triple_set().is_subset(&kb.triple_set()));
        }
    }
}
