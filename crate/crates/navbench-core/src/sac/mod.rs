//! Soft actor-critic: squashed-Gaussian policy, twin critics with Polyak
//! targets, a uniform replay buffer, and the curriculum-coupled training
//! loop.

mod core;
mod policy;
mod replay;
mod trainer;

pub use self::core::{CriticUpdate, PolicyUpdate, SacCore};
pub use policy::{
    draw_noise, sample_action, scale_action, ActionMode, ActionSample, Heads, PolicyHead,
};
pub use replay::{ReplayBuffer, Transition};
pub use trainer::{train, EpisodeRecord, TrainOutcome, Trainer, TrainerError};

/// Action dimension: commanded linear and angular velocity.
pub const ACTION_DIM: usize = 2;
