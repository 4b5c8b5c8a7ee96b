//! Single-seed training loop shared by experiments and the cross-density protocol.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{ActMode, Agent, AgentConfig, ReplayBuffer, Transition};
use crate::envs::{Action, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::reward::{schedule_reward, stage_index, CurriculumSpec, PotentialSpec, TimeUnit};
use crate::seeding::{derive_seed, rng_for};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub total: u64,
    pub unit: TimeUnit,
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Environment steps taken once this episode ended.
    pub env_step: u64,
    pub stage: usize,
    /// Undiscounted return of the base (sparse) reward.
    pub ret: f64,
    pub success: bool,
    /// Mean training loss over the updates made during the episode, if any.
    pub loss_main: Option<f64>,
    /// DQN exploration rate, or the policy entropy of the latest update.
    pub epsilon_or_entropy: f64,
}

/// Complete training state. Cloning yields an independent copy of the agent,
/// buffer, environment and random streams.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub env_spec: EnvSpec,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    pub curriculum: CurriculumSpec,
    pub budget: Budget,
    seed: u64,
    env: Env,
    rng: ChaCha8Rng,
    episode: u64,
    env_step: u64,
    obs: Option<Vec<f64>>,
    potential: PotentialSpec,
    ep_return: f64,
    ep_loss_sum: f64,
    ep_loss_count: u64,
    rollout: Vec<Transition>,
    rollout_episodes: u64,
    last_entropy: f64,
}

impl Trainer {
    pub fn new(env_spec: &EnvSpec, agent_cfg: &AgentConfig, curriculum: CurriculumSpec, budget: Budget, seed: u64) -> Result<Self> {
        env_spec.validate()?;
        curriculum.validate()?;
        if budget.total == 0 {
            return Err(Error::InvalidSpec("training budget must be positive".into()));
        }
        let agent = Agent::new(agent_cfg, env_spec, derive_seed(seed, "agent", 0))?;
        Ok(Trainer {
            env: env_spec.build()?,
            env_spec: env_spec.clone(),
            buffer: ReplayBuffer::new(agent_cfg.buffer_capacity),
            agent,
            curriculum,
            budget,
            seed,
            rng: rng_for(seed, "replay", 0),
            episode: 0,
            env_step: 0,
            obs: None,
            potential: PotentialSpec::new(env_spec.diameter(), [0.0, 0.0]),
            ep_return: 0.0,
            ep_loss_sum: 0.0,
            ep_loss_count: 0,
            rollout: Vec::new(),
            rollout_episodes: 0,
            last_entropy: 0.0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn env_step(&self) -> u64 {
        self.env_step
    }

    /// Elapsed training time in `unit`.
    pub fn time(&self, unit: TimeUnit) -> u64 {
        match unit {
            TimeUnit::Episodes => self.episode,
            TimeUnit::EnvSteps => self.env_step,
        }
    }

    pub fn finished(&self) -> bool {
        self.time(self.budget.unit) >= self.budget.total
    }

    pub fn mid_episode(&self) -> bool {
        self.obs.is_some()
    }

    fn epsilon(&self) -> f64 {
        let cfg = self.agent.config();
        let horizon = cfg.eps_decay_fraction * self.budget.total as f64;
        let frac = if horizon > 0.0 { (self.time(self.budget.unit) as f64 / horizon).min(1.0) } else { 1.0 };
        cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)
    }

    fn record_loss(&mut self, loss: f64) {
        self.ep_loss_sum += loss;
        self.ep_loss_count += 1;
    }

    fn off_policy_updates(&mut self) -> Result<()> {
        let cfg = self.agent.config();
        let (batch_size, per_step) = (cfg.batch_size, cfg.updates_per_step);
        let start = match self.agent {
            Agent::Sac(_) => batch_size.max(cfg.learning_starts),
            _ => batch_size,
        };
        if self.buffer.len() < start {
            return Ok(());
        }
        for _ in 0..per_step {
            let batch = self.buffer.sample(batch_size, &mut self.rng)?;
            let loss = match &mut self.agent {
                Agent::Dqn(a) => a.update(&batch)?,
                Agent::Sac(a) => a.update(&batch)?.policy_loss,
                Agent::Ppo(_) => unreachable!("PPO learns from rollouts"),
            };
            self.record_loss(loss);
        }
        Ok(())
    }

    /// Advance one environment step, learning as the agent's cadence dictates.
    /// Returns the finished episode's record when the step ends an episode.
    pub fn step(&mut self) -> Result<Option<EpisodeRecord>> {
        let obs = match self.obs.take() {
            Some(o) => o,
            None => {
                let o = self.env.reset(self.seed, self.episode);
                self.potential.goal = self.env.goal();
                self.ep_return = 0.0;
                self.ep_loss_sum = 0.0;
                self.ep_loss_count = 0;
                o
            }
        };
        let t = self.time(self.curriculum.unit);
        let stage = stage_index(t, &self.curriculum);
        let pos = self.env.position();

        let eps = self.epsilon();
        let mut log_prob = 0.0;
        let (stored_action, env_action) = match &mut self.agent {
            Agent::Dqn(a) => {
                a.epsilon = eps;
                let act = a.act(&obs, ActMode::Explore)?;
                (act.clone(), act)
            }
            Agent::Ppo(a) => {
                let out = a.act(&obs, ActMode::Explore)?;
                log_prob = out.log_prob;
                (out.action.clone(), out.action)
            }
            Agent::Sac(a) => {
                let act = a.act(&obs, ActMode::Explore)?;
                let scale = match &self.env_spec {
                    EnvSpec::PointReacher(r) => r.max_action,
                    EnvSpec::Gridworld(_) => 1.0,
                };
                let Action::Continuous(v) = &act else { unreachable!() };
                let scaled = Action::Continuous(v.iter().map(|x| x * scale).collect());
                (act, scaled)
            }
        };

        let out = self.env.step(&env_action)?;
        let reward = schedule_reward(&self.curriculum, &self.potential, t, out.base_reward, pos, out.info.agent_pos);
        let mut tr = Transition::new(obs, stored_action, reward, out.next_obs.clone(), out.done, self.episode);
        tr.log_prob = log_prob;
        self.env_step += 1;
        self.ep_return += out.base_reward;

        match self.agent {
            Agent::Ppo(_) => {
                self.rollout.push(tr);
                if out.done {
                    self.rollout_episodes += 1;
                    if self.rollout_episodes >= self.agent.config().update_every_episodes {
                        self.ppo_update()?;
                    }
                }
            }
            _ => {
                self.buffer.push(tr);
                self.off_policy_updates()?;
            }
        }

        if !out.done {
            self.obs = Some(out.next_obs);
            return Ok(None);
        }
        let epsilon_or_entropy = match &self.agent {
            Agent::Dqn(a) => a.epsilon,
            _ => self.last_entropy,
        };
        let record = EpisodeRecord {
            episode: self.episode,
            env_step: self.env_step,
            stage,
            ret: self.ep_return,
            success: out.success,
            loss_main: (self.ep_loss_count > 0).then(|| self.ep_loss_sum / self.ep_loss_count as f64),
            epsilon_or_entropy,
        };
        self.episode += 1;
        Ok(Some(record))
    }

    fn ppo_update(&mut self) -> Result<()> {
        let Agent::Ppo(a) = &mut self.agent else { unreachable!() };
        let mut rollout = std::mem::take(&mut self.rollout);
        a.finish_rollout(&mut rollout)?;
        let stats = a.update(&rollout)?;
        self.last_entropy = stats.entropy;
        self.record_loss(stats.policy_loss);
        self.buffer.extend(rollout);
        self.rollout_episodes = 0;
        Ok(())
    }

    /// Run until the budget is spent, calling `on_episode` for every finished episode.
    pub fn run(&mut self, mut on_episode: impl FnMut(&EpisodeRecord)) -> Result<()> {
        while !self.finished() {
            if let Some(rec) = self.step()? {
                on_episode(&rec);
            }
        }
        Ok(())
    }

    /// Step while `keep_going` holds (checked between steps) and budget remains.
    pub fn run_while(
        &mut self,
        mut keep_going: impl FnMut(&Trainer) -> bool,
        mut on_episode: impl FnMut(&EpisodeRecord),
    ) -> Result<()> {
        while !self.finished() && keep_going(self) {
            if let Some(rec) = self.step()? {
                on_episode(&rec);
            }
        }
        Ok(())
    }

    /// Deterministic evaluation batch: the most recent transitions in the buffer.
    pub fn eval_batch(&self, size: usize) -> Result<Vec<Transition>> {
        self.buffer.deterministic_sample(size)
    }
}
