//! Minimal from-scratch numeric kernel: dense 2-D tensors, multi-head
//! cross-modal attention, sinusoidal positions, focal and L1 losses, a
//! two-layer MLP, hand-derived gradients with a finite-difference harness,
//! and a decoupled-weight-decay adaptive optimizer.
//!
//! Everything is double precision and pure; verification outranks speed at
//! this scale.

mod attention;
mod loss;
mod mlp;
mod optim;
mod tensor;

pub use attention::{
    attention_backward, multi_head_attention, sinusoidal_positions, AttentionCache,
    AttentionGrads, AttentionParams,
};
pub use loss::{focal_loss, l1_loss, logistic, FOCAL_ALPHA, FOCAL_GAMMA};
pub use mlp::{Mlp, MlpCache, MlpGrads};
pub use optim::{cosine_multiplier, finite_diff_check, AdamState, AdamW};
pub use tensor::{softmax_rows, Tensor2};
