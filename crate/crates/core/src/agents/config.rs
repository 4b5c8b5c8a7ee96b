use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dqn,
    Ppo,
    Sac,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dqn => "DQN",
            Algorithm::Ppo => "PPO",
            Algorithm::Sac => "SAC",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Agent hyperparameters. Defaults follow the gridworld column of the
/// experiment hyperparameter table where one exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// PPO entropy bonus weight, or SAC's fixed temperature.
    pub entropy_coef: f64,
    pub buffer_capacity: usize,

    // DQN
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the training budget over which epsilon decays linearly.
    pub eps_decay_fraction: f64,
    pub target_update_every: u64,
    /// Gradient steps per environment step once the buffer holds a full batch.
    pub updates_per_step: usize,

    // PPO
    pub clip: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub update_every_episodes: u64,
    pub normalize_advantages: bool,

    // SAC
    pub tau: f64,
    pub learning_starts: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            algorithm: Algorithm::Dqn,
            hidden: vec![64, 64],
            lr: 5e-4,
            gamma: 0.99,
            batch_size: 128,
            entropy_coef: 0.03,
            buffer_capacity: 50_000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.5,
            target_update_every: 100,
            updates_per_step: 1,
            clip: 0.2,
            gae_lambda: 0.95,
            epochs: 4,
            update_every_episodes: 2,
            normalize_advantages: true,
            tau: 0.005,
            learning_starts: 128,
        }
    }
}

impl AgentConfig {
    pub fn dqn() -> Self {
        AgentConfig { algorithm: Algorithm::Dqn, ..Default::default() }
    }

    pub fn ppo() -> Self {
        AgentConfig { algorithm: Algorithm::Ppo, ..Default::default() }
    }

    pub fn sac() -> Self {
        AgentConfig {
            algorithm: Algorithm::Sac,
            lr: 3e-4,
            entropy_coef: 0.2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("agent.{name} must be positive, got {v}"));
            }
        };
        positive("lr", self.lr);
        positive("batch_size", self.batch_size as f64);
        positive("buffer_capacity", self.buffer_capacity as f64);
        positive("target_update_every", self.target_update_every as f64);
        positive("epochs", self.epochs as f64);
        positive("update_every_episodes", self.update_every_episodes as f64);
        positive("clip", self.clip);
        positive("tau", self.tau);
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            errs.push(format!("agent.gamma must lie in (0, 1], got {}", self.gamma));
        }
        if self.entropy_coef < 0.0 {
            errs.push("agent.entropy_coef must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.eps_end) || !(0.0..=1.0).contains(&self.eps_start) {
            errs.push("agent epsilon bounds must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            errs.push("agent.gae_lambda must lie in [0, 1]".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            errs.push("agent.hidden widths must be positive".into());
        }
        errs
    }

    pub fn check(&self) -> Result<()> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
