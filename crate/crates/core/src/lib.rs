//! Toolkit for studying sparse-to-dense reward transitions in goal-conditioned RL.
//!
//! The crate bundles small dense networks with exact gradients ([`nn`]), toy
//! goal-conditioned environments ([`envs`]), potential-based reward shaping and
//! curriculum certificates ([`reward`]), from-scratch DQN/PPO/SAC agents
//! ([`agents`]), policy loss landscape grids and the local-minima depth metric
//! ([`landscape`]), the end-of-training sharpness metric ([`sharpness`]) and the
//! experiment harness ([`harness`]).

pub mod agents;
pub mod error;
pub mod envs;
pub mod harness;
pub mod landscape;
pub mod nn;
pub mod reward;
pub mod seeding;
pub mod sharpness;

pub use error::{Error, Result};
