//! Toy temporal-convolutional classifier with a per-segment attention
//! branch, trained with hand-written backpropagation in double precision.
//!
//! Main path: causal conv encoder → residual dilated TCN blocks → width-1
//! merge over all block outputs → per-segment mean pooling → `classifier1`
//! logit vectors. The branch scores each segment of the second input; the
//! softmax of those scores weights the segment logits, and `classifier2`
//! maps the weighted sum to class logits.

mod attention;
pub mod checkpoint;
mod conv;
mod model;
mod train;

pub use attention::{scaled_softmax_attention, softmax};
pub use conv::{causal_dilated_conv, impulse_support, receptive_field, ConvLayer};
pub use model::{
    backward, cross_entropy, forward_trace, iq_channels, loss, loss_and_grad, model_forward, predict, residual_block,
    spatial_attention_weights, Activation, ArchConfig, Branch, BranchArch, Decision, Linear, NetParams, ResidualBlock,
    Sample, TcnStack, TensorRef, Trace,
};
pub use train::{accuracy, grad_check, sat_transfer, train, TrainConfig, TrainOutcome};
