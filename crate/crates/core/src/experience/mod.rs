//! Replay storage for agent-born and advisor-refined experience.

pub mod buffer;
pub mod sft;
pub mod transition;

pub use buffer::{
    validity, weight, BufferError, BufferKind, Draw, MixConfig, MixedBatch, ReplayBuffers, W_MAX, W_MIN,
};
pub use sft::{read_sft, sample_sft, sft_record, write_sft, SftError, SftHeader, SftRecord, SFT_SCHEMA};
pub use transition::{record_episode, Source, Transition};
