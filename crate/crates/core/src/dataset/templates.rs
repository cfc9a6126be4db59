//! Question templates and relation synonyms.
//!
//! The text format is described at the top of `data/templates.txt`, which is
//! also the built-in set returned by [`TemplateSet::builtin`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{IrnError, Result};
use crate::kb::INVERSE_SUFFIX;

const BUILTIN: &str = include_str!("../../data/templates.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    /// Relation slot (1-based) is one of the names.
    In(usize, BTreeSet<String>),
    /// Two relation slots carry the same relation.
    Same(usize, usize),
}

impl Condition {
    fn holds(&self, relations: &[&str]) -> bool {
        match self {
            Condition::In(k, names) => relations.get(k - 1).is_some_and(|r| names.contains(*r)),
            Condition::Same(a, b) => match (relations.get(a - 1), relations.get(b - 1)) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FamilyShape {
    Path(usize),
    Conjunctive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateFamily {
    pub shape: FamilyShape,
    pub name: String,
    pub conditions: Vec<Condition>,
    pub templates: Vec<String>,
}

impl TemplateFamily {
    pub fn matches(&self, relations: &[&str]) -> bool {
        self.conditions.iter().all(|c| c.holds(relations))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    synonyms: BTreeMap<String, Vec<String>>,
    families: Vec<TemplateFamily>,
}

/// Slot names referenced by a template, in order of appearance.
pub fn template_slots(template: &str) -> Vec<String> {
    let mut slots = Vec::new();
    let mut rest = template;
    while let Some(pos) = rest.find('$') {
        let tail = &rest[pos + 1..];
        let len = tail
            .find(|c: char| !c.is_ascii_alphanumeric())
            .unwrap_or(tail.len());
        slots.push(tail[..len].to_string());
        rest = &tail[len..];
    }
    slots
}

fn allowed_slots(shape: FamilyShape) -> Vec<String> {
    match shape {
        FamilyShape::Path(h) => std::iter::once("es".to_string())
            .chain((1..=h).map(|k| format!("r{k}")))
            .collect(),
        FamilyShape::Conjunctive => ["es1", "es2", "r1", "r2"].map(String::from).to_vec(),
    }
}

fn parse_slot_index(s: &str, line: usize) -> Result<usize> {
    s.strip_prefix('r')
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k >= 1)
        .ok_or_else(|| IrnError::Parse {
            line,
            msg: format!("expected a relation slot like r1, found `{s}`"),
        })
}

fn parse_condition(spec: &str, line: usize) -> Result<Condition> {
    let err = || IrnError::Parse {
        line,
        msg: format!("malformed condition `when {spec}`"),
    };
    if let Some((lhs, rhs)) = spec.split_once(" in ") {
        let k = parse_slot_index(lhs.trim(), line)?;
        let names: BTreeSet<String> = rhs
            .split(',')
            .map(|n| n.trim().to_string())
            .filter(|n| !n.is_empty())
            .collect();
        if names.is_empty() {
            return Err(err());
        }
        return Ok(Condition::In(k, names));
    }
    let (lhs, rhs) = spec.split_once('=').ok_or_else(err)?;
    let k = parse_slot_index(lhs.trim(), line)?;
    let rhs = rhs.trim();
    if rhs.is_empty() {
        return Err(err());
    }
    match parse_slot_index(rhs, line) {
        Ok(j) => Ok(Condition::Same(k, j)),
        Err(_) => Ok(Condition::In(k, BTreeSet::from([rhs.to_string()]))),
    }
}

fn parse_header(header: &str, line: usize) -> Result<Option<(FamilyShape, String)>> {
    let mut parts = header.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let name = parts.next().unwrap_or("default").to_string();
    if kind == "synonyms" {
        return Ok(None);
    }
    if kind == "conjunctive" {
        return Ok(Some((FamilyShape::Conjunctive, name)));
    }
    let hops = kind
        .strip_suffix('H')
        .and_then(|h| h.parse::<usize>().ok())
        .filter(|&h| h >= 1)
        .ok_or_else(|| IrnError::Parse {
            line,
            msg: format!("unknown section `[{header}]`"),
        })?;
    Ok(Some((FamilyShape::Path(hops), name)))
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in templates are valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| IrnError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut synonyms = BTreeMap::new();
        let mut families: Vec<TemplateFamily> = Vec::new();
        // None: synonyms section; Some(i): index into families.
        let mut current: Option<Option<usize>> = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(match parse_header(header.trim(), line_no)? {
                    None => None,
                    Some((shape, name)) => {
                        families.push(TemplateFamily {
                            shape,
                            name,
                            conditions: Vec::new(),
                            templates: Vec::new(),
                        });
                        Some(families.len() - 1)
                    }
                });
                continue;
            }
            match current {
                None => {
                    return Err(IrnError::Parse {
                        line: line_no,
                        msg: "content outside of a section".into(),
                    })
                }
                Some(None) => {
                    let (rel, list) = line.split_once(':').ok_or_else(|| IrnError::Parse {
                        line: line_no,
                        msg: "synonym lines look like `Relation: a | b`".into(),
                    })?;
                    let phrases: Vec<String> = list
                        .split('|')
                        .map(|p| p.trim().to_lowercase())
                        .filter(|p| !p.is_empty())
                        .collect();
                    synonyms.insert(rel.trim().to_string(), phrases);
                }
                Some(Some(i)) => {
                    let fam = &mut families[i];
                    if let Some(cond) = line.strip_prefix("when ") {
                        let c = parse_condition(cond.trim(), line_no)?;
                        fam.conditions.push(c);
                        continue;
                    }
                    let slots = template_slots(line);
                    let allowed = allowed_slots(fam.shape);
                    let mut seen = BTreeSet::new();
                    for s in &slots {
                        if !allowed.contains(s) {
                            return Err(IrnError::Parse {
                                line: line_no,
                                msg: format!("slot ${s} not valid in this section"),
                            });
                        }
                        if !seen.insert(s) {
                            return Err(IrnError::Parse {
                                line: line_no,
                                msg: format!("slot ${s} used more than once"),
                            });
                        }
                    }
                    fam.templates.push(line.to_string());
                }
            }
        }
        families.retain(|f| !f.templates.is_empty());
        Ok(TemplateSet { synonyms, families })
    }

    pub fn families(&self) -> &[TemplateFamily] {
        &self.families
    }

    /// Surface phrases for a relation; inverse relations use their base
    /// relation's phrases. A relation without an entry falls back to its own
    /// name with underscores turned into spaces.
    pub fn synonyms_for(&self, relation: &str) -> Vec<String> {
        let base = relation.strip_suffix(INVERSE_SUFFIX).unwrap_or(relation);
        match self.synonyms.get(base) {
            Some(list) if !list.is_empty() => list.clone(),
            _ => vec![base.replace('_', " ").to_lowercase()],
        }
    }

    /// Families usable for a path whose relations are `relations`: the
    /// matching families with the most conditions.
    pub fn matching_families(
        &self,
        shape: FamilyShape,
        relations: &[&str],
    ) -> Vec<&TemplateFamily> {
        let matching: Vec<&TemplateFamily> = self
            .families
            .iter()
            .filter(|f| f.shape == shape && f.matches(relations))
            .collect();
        let best = matching.iter().map(|f| f.conditions.len()).max();
        matching
            .into_iter()
            .filter(|f| Some(f.conditions.len()) == best)
            .collect()
    }

    /// Draws a template for the pattern and fills it. `subjects` holds one
    /// name for path shapes and two for conjunctive ones.
    pub fn realize<R: Rng + ?Sized>(
        &self,
        shape: FamilyShape,
        subjects: &[&str],
        relations: &[&str],
        rng: &mut R,
    ) -> Result<String> {
        let templates: Vec<&String> = self
            .matching_families(shape, relations)
            .into_iter()
            .flat_map(|f| f.templates.iter())
            .collect();
        let template = templates.choose(rng).ok_or_else(|| {
            IrnError::NoTemplate(format!("{shape:?} over [{}]", relations.join(", ")))
        })?;
        let mut out = String::with_capacity(template.len() + 32);
        let mut rest = template.as_str();
        while let Some(pos) = rest.find('$') {
            out.push_str(&rest[..pos]);
            let tail = &rest[pos + 1..];
            let len = tail
                .find(|c: char| !c.is_ascii_alphanumeric())
                .unwrap_or(tail.len());
            let slot = &tail[..len];
            let filler = match slot {
                "es" | "es1" => subjects[0].to_string(),
                "es2" => subjects[1].to_string(),
                _ => {
                    let k: usize = slot[1..].parse().expect("validated at parse time");
                    let syns = self.synonyms_for(relations[k - 1]);
                    syns.choose(rng).expect("non-empty synonyms").clone()
                }
            };
            out.push_str(&filler);
            rest = &tail[len..];
        }
        out.push_str(rest);
        Ok(out.to_lowercase())
    }
}
