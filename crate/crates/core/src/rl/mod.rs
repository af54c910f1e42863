//! Discrete soft actor-critic and its building blocks.

pub mod checkpoint;
pub mod encode;
pub mod nn;
pub mod sac;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use encode::{Encoder, ObsHistory};
pub use nn::{Adam, Mlp};
pub use sac::{
    entropy, masked_softmax, q_target, sample_action, soft_update, SacAgent, SacError, SacHyperparams, SacSample,
};
