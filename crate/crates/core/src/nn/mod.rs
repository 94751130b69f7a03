//! Layer mechanics: every layer type's forward and hand-derived backward pass.
//!
//! All operations are pure functions of their inputs; dropout's randomness is
//! an explicit seeded input. Gradients are w.r.t. a scalar objective, fed in
//! as `grad_out` (the objective's gradient at the layer output).

pub mod activation;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod loss;
pub mod lrn;
pub mod pool;
pub mod tensor;

pub use activation::{relu_backward, relu_forward, softmax_forward};
pub use conv::{conv_backward, conv_forward, conv_output_extent, ConvSpec};
pub use dense::{dense_backward, dense_forward, DenseSpec};
pub use dropout::{dropout_backward, dropout_forward, DropoutSpec};
pub use loss::{cross_entropy_loss, softmax_cross_entropy_grad, LossConfig, PROB_FLOOR};
pub use lrn::{lrn_backward, lrn_forward, LrnSpec};
pub use pool::{maxpool_backward, maxpool_forward, MaxPoolSpec};
pub use tensor::Tensor;

/// Whether stochastic layers (dropout) sample or pass through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
