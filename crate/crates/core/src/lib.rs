//! Interpretable Reasoning Network for multi-relation question answering
//! over a knowledge base.
//!
//! A question is encoded as a bag of word embeddings; a reasoning state is
//! initialised from the topic entity. At every hop the network picks a
//! relation (softly, via a distribution over all KB relations plus a
//! `Terminal` relation), subtracts its question-space projection from the
//! question vector, adds its state-space projection to the state, and reads
//! an entity distribution off the state. The per-hop relation and entity
//! argmaxes form an inspectable answer path.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod inference;
pub mod kb;
pub mod model;
pub mod numerics;
pub mod trainer;

pub use error::{IrnError, Result};
