#![allow(dead_code)]

use irn::dataset::{generate_path_dataset, QaInstance, TemplateSet};
use irn::kb::KnowledgeBase;
use irn::numerics::Prng;

/// Five entities, three relations, four 2-hop paths.
pub fn toy_kb() -> KnowledgeBase {
    KnowledgeBase::from_named_triples([
        ("anna", "Children", "bert"),
        ("bert", "Children", "carl"),
        ("bert", "Profession", "doctor"),
        ("carl", "Nationality", "france"),
        ("carl", "Profession", "doctor"),
        ("anna", "Nationality", "france"),
    ])
    .unwrap()
}

/// Twenty questions: every 2-hop path of [`toy_kb`] phrased five times.
pub fn toy_questions(kb: &KnowledgeBase) -> Vec<QaInstance> {
    let data =
        generate_path_dataset(kb, &TemplateSet::builtin(), 2, 20, 5, &mut Prng::new(3)).unwrap();
    assert_eq!(data.len(), 20);
    data
}
