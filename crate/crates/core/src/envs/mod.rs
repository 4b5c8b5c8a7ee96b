//! Goal-conditioned toy environments.

mod gridworld;
mod reacher;

use serde::{Deserialize, Serialize};

pub use gridworld::{Cell, GoalMode, GridAction, GridState, Gridworld, GridworldSpec};
pub use reacher::{PointReacher, PointReacherSpec};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub agent_pos: [f64; 2],
    pub goal_pos: [f64; 2],
    pub step_index: u32,
}

/// Result of one environment step. `base_reward` is the sparse-stage reward only.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_obs: Vec<f64>,
    pub base_reward: f64,
    pub done: bool,
    pub success: bool,
    pub info: StepInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Gridworld(GridworldSpec),
    PointReacher(PointReacherSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSpace {
    Discrete(usize),
    /// Box of the given dimension with symmetric bound.
    Continuous { dim: usize },
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Gridworld(s) => s.validate(),
            EnvSpec::PointReacher(s) => s.validate(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        4
    }

    pub fn action_space(&self) -> ActionSpace {
        match self {
            EnvSpec::Gridworld(_) => ActionSpace::Discrete(4),
            EnvSpec::PointReacher(_) => ActionSpace::Continuous { dim: 2 },
        }
    }

    pub fn max_steps(&self) -> u32 {
        match self {
            EnvSpec::Gridworld(s) => s.max_steps,
            EnvSpec::PointReacher(s) => s.max_steps,
        }
    }

    /// Max pairwise L2 distance over the reachable position set.
    pub fn diameter(&self) -> f64 {
        match self {
            EnvSpec::Gridworld(s) => s.diameter(),
            EnvSpec::PointReacher(s) => s.diameter(),
        }
    }

    pub fn enumerate_states(&self) -> Result<Vec<(GridState, Vec<GridAction>)>> {
        match self {
            EnvSpec::Gridworld(s) => Ok(s.enumerate_states()),
            EnvSpec::PointReacher(_) => {
                Err(Error::Unsupported("state enumeration needs a discrete environment".into()))
            }
        }
    }

    pub fn as_gridworld(&self) -> Result<&GridworldSpec> {
        match self {
            EnvSpec::Gridworld(s) => Ok(s),
            EnvSpec::PointReacher(_) => {
                Err(Error::Unsupported("operation needs an enumerable gridworld".into()))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnvSpec::Gridworld(s) => {
                let mode = match s.goal_mode {
                    GoalMode::Fixed(_) => "fixed",
                    GoalMode::RandomPerEpisode => "random",
                };
                format!("gridworld-{}x{}-{mode}", s.width, s.height)
            }
            EnvSpec::PointReacher(_) => "point-reacher".to_string(),
        }
    }

    pub fn build(&self) -> Result<Env> {
        Ok(match self {
            EnvSpec::Gridworld(s) => Env::Gridworld(Gridworld::new(s.clone())?),
            EnvSpec::PointReacher(s) => Env::PointReacher(PointReacher::new(s.clone())?),
        })
    }
}

/// A running environment instance.
#[derive(Clone, Debug)]
pub enum Env {
    Gridworld(Gridworld),
    PointReacher(PointReacher),
}

impl Env {
    /// Start episode `episode`; deterministic in `(seed, episode)`.
    pub fn reset(&mut self, seed: u64, episode: u64) -> Vec<f64> {
        match self {
            Env::Gridworld(e) => e.reset(seed, episode),
            Env::PointReacher(e) => e.reset(seed, episode),
        }
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        match (self, action) {
            (Env::Gridworld(e), Action::Discrete(i)) => e.step(GridAction::from_index(*i)?),
            (Env::PointReacher(e), Action::Continuous(a)) => e.step(a),
            _ => Err(Error::Precondition("action kind does not match the environment".into())),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        match self {
            Env::Gridworld(e) => e.state().agent.as_point(),
            Env::PointReacher(e) => e.position(),
        }
    }

    pub fn goal(&self) -> [f64; 2] {
        match self {
            Env::Gridworld(e) => e.state().goal.as_point(),
            Env::PointReacher(e) => e.goal(),
        }
    }
}
