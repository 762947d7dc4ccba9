//! Reverse-mode differentiation, MLP generators and the Adam optimizer.
//!
//! Losses are built on a scalar [`Tape`]; network outputs enter that tape as
//! leaves, and their adjoints are pushed through the layer-level [`MlpTape`]
//! to obtain the parameter gradient.

mod adam;
pub mod checkpoint;
mod mlp;
mod tape;

pub use adam::{adam_step, AdamState};
pub use mlp::{
    mlp_forward, mlp_forward_taped, Activation, GeneratorSpec, LayerSlice, MlpTape, ParamLayout, ParamVector,
};
pub use tape::{sigmoid, Gradients, Tape, Var};
