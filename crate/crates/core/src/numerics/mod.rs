//! Dense kernels shared by the model and trainer: a row-major matrix,
//! stable softmax / cross-entropy, Adam, a named-stream PRNG and the
//! central-difference gradient oracle used to check hand-written backward
//! passes.

mod adam;
mod gradcheck;
mod ops;
mod rng;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_grad, finite_diff_grad_5pt, relative_error};
pub use ops::{argmax, cross_entropy, cross_entropy_at, dot, softmax, LOG_EPS};
pub use rng::Prng;
pub use tensor::{axpy, Tensor2};
