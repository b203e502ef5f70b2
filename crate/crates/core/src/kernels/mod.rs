//! Minimal differentiable numeric kernels.
//!
//! Everything here is a pure function over immutable inputs plus, for the
//! optimizer, an explicit mutable state argument. There is no autograd graph:
//! each layer exposes a forward and a matching backward, and callers chain
//! them through the fixed network topology.

pub mod adam;
pub mod conv;
pub mod linear;
pub mod pool;
pub mod prelu;
pub mod schedule;
pub mod softmax;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use conv::{conv2d_backward, conv2d_forward};
pub use linear::{linear_backward, linear_forward};
pub use pool::{maxpool2_backward, maxpool2_forward};
pub use prelu::{prelu_backward, prelu_forward};
pub use schedule::LrSchedule;
pub use softmax::{softmax, softmax_xent};
pub use tensor::Tensor;
