use irn::dataset::synth::{synthesize_kb, SynthConfig, FB13_RELATIONS};
use irn::kb::KnowledgeBase;

#[test]
fn default_synthetic_kb_matches_fb13_scale() {
    let kb = synthesize_kb(&SynthConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fb13.tsv");
    kb.write_tsv(&path).unwrap();
    let loaded = KnowledgeBase::load_triples(&path).unwrap();
    assert_eq!(loaded.num_relations(), 13);
    for r in FB13_RELATIONS {
        loaded.relation_id(r).unwrap();
    }
    assert!(loaded.num_triples() > 60_000, "{}", loaded.num_triples());
    assert_eq!(loaded.num_triples(), kb.num_triples());

    let half = loaded.drop_random_triples(0.5, 3).unwrap();
    assert_eq!(
        half.num_triples(),
        loaded.num_triples() - loaded.num_triples() / 2
    );
    assert_eq!(half.num_entities(), loaded.num_entities());
    assert_eq!(half.num_relations(), loaded.num_relations());
}
