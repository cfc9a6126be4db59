use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::QaInstance;
use crate::error::{IrnError, Result};
use crate::kb::{KnowledgeBase, RelationId};
use crate::numerics::Prng;

/// Relations whose questions are withheld from training in the unseen
/// configuration.
pub const DEFAULT_HOLDOUT: [&str; 3] = ["Cause_of_Death", "Gender", "Profession"];

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<QaInstance>,
    pub valid: Vec<QaInstance>,
    pub test: Vec<QaInstance>,
}

/// Seeded shuffle, then `⌊r₀n⌋` train, `⌊r₁n⌋` valid and the rest test.
pub fn split_dataset(
    instances: &[QaInstance],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Split> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| *r < 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(IrnError::Invalid(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let n = instances.len();
    if n < 10 {
        return Err(IrnError::Invalid(format!(
            "cannot split {n} instances (need at least 10)"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut Prng::stream(seed, "split"));
    let n_train = (a * n as f64).floor() as usize;
    let n_valid = (b * n as f64).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| instances[i].clone()).collect();
    Ok(Split {
        train: pick(&order[..n_train]),
        valid: pick(&order[n_train..n_train + n_valid]),
        test: pick(&order[n_train + n_valid..]),
    })
}

/// Moves every instance whose gold path mentions a held-out relation out
/// of `instances`. Returns `(kept, moved)`.
pub fn make_unseen_split(
    instances: &[QaInstance],
    holdout: &[&str],
    kb: &KnowledgeBase,
) -> Result<(Vec<QaInstance>, Vec<QaInstance>)> {
    if holdout.is_empty() {
        return Err(IrnError::Invalid("holdout relation set is empty".into()));
    }
    let ids: BTreeSet<RelationId> = holdout
        .iter()
        .map(|n| kb.relation_id(n))
        .collect::<Result<_>>()?;
    Ok(instances
        .iter()
        .cloned()
        .partition(|inst| !inst.relations().any(|r| ids.contains(&r))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{GoldPath, QuestionKind};

    fn dummy(n: usize) -> Vec<QaInstance> {
        (0..n)
            .map(|i| QaInstance {
                question: format!("q{i}"),
                tokens: vec![format!("q{i}")],
                subjects: vec![0],
                paths: vec![GoldPath {
                    relations: vec![i % 3, (i + 1) % 3],
                    entities: vec![1, 2],
                }],
                answers: [2].into(),
                kind: QuestionKind::PATH_2H,
            })
            .collect()
    }

    #[test]
    fn sizes_follow_floor_rule() {
        let s = split_dataset(&dummy(1908), (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!(
            (s.train.len(), s.valid.len(), s.test.len()),
            (1526, 190, 192)
        );
        let s = split_dataset(&dummy(10), (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_partition_and_deterministic() {
        let data = dummy(57);
        let a = split_dataset(&data, (0.8, 0.1, 0.1), 4).unwrap();
        let b = split_dataset(&data, (0.8, 0.1, 0.1), 4).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<String> = a
            .train
            .iter()
            .chain(&a.valid)
            .chain(&a.test)
            .map(|i| i.question.clone())
            .collect();
        all.sort();
        let mut expected: Vec<String> = data.iter().map(|i| i.question.clone()).collect();
        expected.sort();
        assert_eq!(all, expected);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(split_dataset(&dummy(9), (0.8, 0.1, 0.1), 1).is_err());
        assert!(split_dataset(&dummy(20), (0.8, 0.1, 0.2), 1).is_err());
    }

    #[test]
    fn unseen_split_moves_holdout_questions() {
        let kb = KnowledgeBase::from_named_triples([
            ("a", "Spouse", "b"),
            ("b", "Profession", "c"),
            ("a", "Religion", "d"),
        ])
        .unwrap();
        let prof = kb.relation_id("Profession").unwrap();
        let data = dummy(12);
        let (train, extra) = make_unseen_split(&data, &["Profession"], &kb).unwrap();
        assert_eq!(train.len() + extra.len(), data.len());
        assert!(extra.iter().all(|i| i.relations().any(|r| r == prof)));
        assert!(train.iter().all(|i| i.relations().all(|r| r != prof)));

        let (train, extra) = make_unseen_split(&data[..1], &["Religion"], &kb).unwrap();
        // dummy(1)[0] uses relations 0 and 1 (Spouse, Profession)
        assert_eq!(train.len(), 1);
        assert!(extra.is_empty());

        assert!(make_unseen_split(&data, &["Gender"], &kb).is_err());
        assert!(make_unseen_split(&data, &[], &kb).is_err());
    }
}
