//! Question-answer data: templated generation from KB paths, answer sets,
//! splits, vocabulary and the JSON Lines dataset format.

mod generate;
mod instance;
mod split;
pub mod synth;
mod templates;
mod tokenize;
mod vocab;

pub use generate::{
    compute_answer_set, extract_paths, generate_conjunctive, generate_path_dataset,
    generate_question, KbPath,
};
pub use instance::{
    read_jsonl, write_jsonl, GoldPath, InstanceRecord, QaInstance, QuestionKind, Symbols,
};
pub use split::{make_unseen_split, split_dataset, Split, DEFAULT_HOLDOUT};
pub use templates::{template_slots, Condition, FamilyShape, TemplateFamily, TemplateSet};
pub use tokenize::tokenize;
pub use vocab::{Vocab, UNK, UNK_ID};
