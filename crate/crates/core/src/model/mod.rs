//! The reasoning network: parameters, forward pass, loss and backward pass.

mod backward;
mod forward;
mod gradcheck;
mod params;

pub use backward::{backward, backward_into};
pub use forward::{
    apply_relation, encode_question, forward, initial_vectors, predict_entity, reason_step,
    relation_logits, EntityStep, GoldTargets, HopRecord, ModelInput, ReasoningTrace, StepOutput,
    StopReason, Supervision, TrainMode,
};
pub use gradcheck::{
    gradcheck_suite, GradCheckCase, GradCheckOutcome, GRADCHECK_FLOOR, GRADCHECK_STEP,
    GRADCHECK_TOL,
};
pub use params::{xavier_bound, Gradients, ModelParams, EMBED_INIT_STD, TENSOR_NAMES};

pub const TERMINAL_NAME: &str = "Terminal";

#[cfg(test)]
mod tests;
