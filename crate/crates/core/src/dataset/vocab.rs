use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::QaInstance;

pub const UNK: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Word table over training questions; ID 0 is reserved for unknown words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        let mut v = Vocab {
            words: Vec::new(),
            ids: HashMap::new(),
        };
        v.add(UNK);
        v
    }

    /// First-seen order over the training tokens.
    pub fn build(train: &[QaInstance]) -> Self {
        let mut v = Vocab::new();
        for inst in train {
            for t in &inst.tokens {
                v.add(t);
            }
        }
        v
    }

    fn add(&mut self, word: &str) -> usize {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len();
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }

    pub fn id(&self, word: &str) -> usize {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        let mut v = Vocab {
            words: Vec::new(),
            ids: HashMap::new(),
        };
        if words.first().map(String::as_str) != Some(UNK) {
            v.add(UNK);
        }
        for w in &words {
            v.add(w);
        }
        v
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{tokenize, QuestionKind};
    use std::collections::BTreeSet;

    fn inst(q: &str) -> QaInstance {
        QaInstance {
            question: q.to_string(),
            tokens: tokenize(q),
            subjects: vec![0],
            paths: vec![],
            answers: BTreeSet::new(),
            kind: QuestionKind::Path { hops: 2 },
        }
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = Vocab::build(&[inst("who is x's wife?")]);
        assert_eq!(v.id("zebra"), UNK_ID);
        assert_ne!(v.id("wife"), UNK_ID);
        assert_eq!(v.word(UNK_ID), UNK);
    }

    #[test]
    fn size_is_distinct_tokens_plus_one() {
        let train = [inst("a b a c"), inst("c d")];
        let v = Vocab::build(&train);
        assert_eq!(v.len(), 4 + 1);
        assert_eq!(Vocab::build(&train), v);
    }

    #[test]
    fn ids_are_contiguous_after_round_trip() {
        let v = Vocab::build(&[inst("x y z")]);
        let back = Vocab::from(Vec::<String>::from(v.clone()));
        assert_eq!(back, v);
        for (i, w) in v.words().iter().enumerate() {
            assert_eq!(v.id(w), i);
        }
    }
}
