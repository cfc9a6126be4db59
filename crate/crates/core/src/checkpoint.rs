//! Trained model bundle and its JSON checkpoint format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Symbols, Vocab};
use crate::error::{IrnError, Result};
use crate::kb::{EntityId, KnowledgeBase, RelationId};
use crate::model::{ModelParams, TrainMode, TENSOR_NAMES, TERMINAL_NAME};
use crate::numerics::Tensor2;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Parameters plus the symbol tables needed to read questions and print
/// answers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub entities: Vec<String>,
    /// KB relations; `Terminal` is implicit at index `relations.len()`.
    pub relations: Vec<String>,
    pub mode: TrainMode,
    /// Free-form run metadata (seeds, digests, config).
    pub provenance: BTreeMap<String, String>,
    entity_ids: BTreeMap<String, EntityId>,
    relation_ids: BTreeMap<String, RelationId>,
}

impl TrainedModel {
    pub fn new(
        params: ModelParams,
        vocab: Vocab,
        entities: Vec<String>,
        relations: Vec<String>,
        mode: TrainMode,
    ) -> Result<Self> {
        let m = TrainedModel {
            entity_ids: entities.iter().cloned().zip(0..).collect(),
            relation_ids: relations.iter().cloned().zip(0..).collect(),
            params,
            vocab,
            entities,
            relations,
            mode,
            provenance: BTreeMap::new(),
        };
        m.check_shapes()?;
        Ok(m)
    }

    pub fn for_kb(
        params: ModelParams,
        vocab: Vocab,
        kb: &KnowledgeBase,
        mode: TrainMode,
    ) -> Result<Self> {
        Self::new(
            params,
            vocab,
            kb.entity_names().to_vec(),
            kb.relation_names().to_vec(),
            mode,
        )
    }

    fn check_shapes(&self) -> Result<()> {
        let p = &self.params;
        let d = p.dim();
        let expect = [
            (self.vocab.len(), d),
            (self.entities.len(), d),
            (self.relations.len() + 1, d),
            (d, d),
            (d, d),
            (d, d),
        ];
        for ((name, t), shape) in TENSOR_NAMES.iter().zip(p.tensors()).zip(expect) {
            if t.shape() != shape {
                return Err(IrnError::Shape(format!(
                    "{name} is {:?}, declared {:?}",
                    t.shape(),
                    shape
                )));
            }
        }
        if self.entity_ids.len() != self.entities.len()
            || self.relation_ids.len() != self.relations.len()
        {
            return Err(IrnError::Invalid("duplicate names in symbol tables".into()));
        }
        Ok(())
    }

    pub fn terminal(&self) -> RelationId {
        self.relations.len()
    }

    /// Relation names including the trailing `Terminal`.
    pub fn relation_names_with_terminal(&self) -> Vec<String> {
        let mut v = self.relations.clone();
        v.push(TERMINAL_NAME.to_string());
        v
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = CheckpointFile::from_model(self);
        let text = serde_json::to_string(&file)?;
        fs::write(path, text).map_err(|e| IrnError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| IrnError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let version = raw
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| IrnError::Invalid("checkpoint lacks a version field".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(IrnError::UnsupportedVersion(
                version.min(u64::from(u32::MAX)) as u32,
            ));
        }
        let file: CheckpointFile = serde_json::from_value(raw)?;
        file.into_model()
    }
}

impl Symbols for TrainedModel {
    fn entity_id(&self, name: &str) -> Result<EntityId> {
        self.entity_ids
            .get(name)
            .copied()
            .ok_or_else(|| IrnError::UnknownEntity(name.to_string()))
    }

    fn relation_id(&self, name: &str) -> Result<RelationId> {
        if name == TERMINAL_NAME {
            return Ok(self.terminal());
        }
        self.relation_ids
            .get(name)
            .copied()
            .ok_or_else(|| IrnError::UnknownRelation(name.to_string()))
    }

    fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id]
    }

    fn relation_name(&self, id: RelationId) -> &str {
        self.relations.get(id).map_or(TERMINAL_NAME, String::as_str)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    dim: usize,
    vocab_size: usize,
    num_entities: usize,
    /// KB relations, excluding `Terminal`.
    num_relations: usize,
    mode: TrainMode,
    vocab: Vocab,
    entities: Vec<String>,
    relations: Vec<String>,
    /// Row-major tensor data keyed by tensor name.
    tensors: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    provenance: BTreeMap<String, String>,
}

impl CheckpointFile {
    fn from_model(m: &TrainedModel) -> Self {
        CheckpointFile {
            version: CHECKPOINT_VERSION,
            dim: m.params.dim(),
            vocab_size: m.vocab.len(),
            num_entities: m.entities.len(),
            num_relations: m.relations.len(),
            mode: m.mode,
            vocab: m.vocab.clone(),
            entities: m.entities.clone(),
            relations: m.relations.clone(),
            tensors: TENSOR_NAMES
                .iter()
                .zip(m.params.tensors())
                .map(|(n, t)| (n.to_string(), t.as_slice().to_vec()))
                .collect(),
            provenance: m.provenance.clone(),
        }
    }

    fn into_model(mut self) -> Result<TrainedModel> {
        let d = self.dim;
        if d == 0 {
            return Err(IrnError::Shape("dimension must be positive".into()));
        }
        if self.vocab.len() != self.vocab_size
            || self.entities.len() != self.num_entities
            || self.relations.len() != self.num_relations
        {
            return Err(IrnError::Shape(
                "symbol tables disagree with declared sizes".into(),
            ));
        }
        let rows = [
            self.vocab_size,
            self.num_entities,
            self.num_relations + 1,
            d,
            d,
            d,
        ];
        let mut tensors = Vec::with_capacity(6);
        for (name, r) in TENSOR_NAMES.iter().zip(rows) {
            let data = self
                .tensors
                .remove(*name)
                .ok_or_else(|| IrnError::Shape(format!("missing tensor {name}")))?;
            if data.len() != r * d {
                return Err(IrnError::Shape(format!(
                    "{name} has {} values, declared {r}×{d}",
                    data.len()
                )));
            }
            tensors.push(Tensor2::from_vec(r, d, data)?);
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("six tensors");
        let params = ModelParams {
            word_emb: next(),
            ent_emb: next(),
            rel_emb: next(),
            m_rq: next(),
            m_rs: next(),
            m_se: next(),
        };
        if !params.is_finite() {
            return Err(IrnError::NonFinite("checkpoint tensors"));
        }
        let mut m =
            TrainedModel::new(params, self.vocab, self.entities, self.relations, self.mode)?;
        m.provenance = self.provenance;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> TrainedModel {
        let mut vocab_words = vec!["<unk>".to_string()];
        vocab_words.extend(["who", "is", "the"].map(String::from));
        let vocab = Vocab::from(vocab_words);
        let params = ModelParams::init(6, 4, 3, 2, 5);
        TrainedModel::new(
            params,
            vocab,
            vec!["a".into(), "b".into(), "c".into()],
            vec!["R1".into(), "R2".into()],
            TrainMode::Irn,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut m = model();
        m.provenance.insert("seed".into(), "5".into());
        m.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.params.tensors().iter().zip(m.params.tensors()) {
            let bits = |t: &Tensor2| t.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn mismatched_dims_rejected() {
        let m = model();
        let mut v: serde_json::Value =
            serde_json::to_value(CheckpointFile::from_model(&m)).unwrap();
        v["dim"] = 7.into();
        assert!(matches!(
            TrainedModel::from_json(&v.to_string()),
            Err(IrnError::Shape(_))
        ));
    }

    #[test]
    fn unknown_version_rejected() {
        let m = model();
        let mut v: serde_json::Value =
            serde_json::to_value(CheckpointFile::from_model(&m)).unwrap();
        v["version"] = 9.into();
        assert!(matches!(
            TrainedModel::from_json(&v.to_string()),
            Err(IrnError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn terminal_symbol() {
        let m = model();
        assert_eq!(m.relation_id("Terminal").unwrap(), 2);
        assert_eq!(m.relation_name(2), "Terminal");
        assert!(m.entity_id("zzz").is_err());
    }
}
