//! Denoiser models: a classical conv stack, a conv/VQC hybrid and a purely
//! variational-circuit model, with gradients and checkpointing.

pub mod checkpoint;
pub mod conv;
pub mod model;
pub mod vqc;

pub use checkpoint::Checkpoint;
pub use model::{
    model_backward, model_forward, DenoiserModel, GradientBundle, ModelConfig, ModelKind,
    PreparedModel,
};
pub use vqc::{VqcParams, VqcPlan};
