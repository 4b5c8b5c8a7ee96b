//! From-scratch DQN, PPO and SAC agents and the replay buffer.

mod batch;
pub mod buffer;
pub mod config;
pub mod dist;
pub mod dqn;
pub mod ppo;
pub mod sac;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use buffer::{ReplayBuffer, Transition};
pub use config::{AgentConfig, Algorithm};
pub use dqn::{DqnAgent, DqnObjective};
pub use ppo::{PpoAct, PpoAgent, PpoPolicyObjective, PpoStats};
pub use sac::{SacAgent, SacPolicyObjective, SacStats};

use crate::envs::{ActionSpace, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::{Network, Objective, SNAPSHOT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Explore,
    Greedy,
}

/// Any of the three agents. Serialized form doubles as the agent snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum Agent {
    Dqn(DqnAgent),
    Ppo(PpoAgent),
    Sac(SacAgent),
}

pub type AgentSnapshot = Agent;

impl Agent {
    pub fn new(cfg: &AgentConfig, env: &EnvSpec, seed: u64) -> Result<Self> {
        cfg.check()?;
        let obs = env.obs_dim();
        match (cfg.algorithm, env.action_space()) {
            (Algorithm::Dqn, ActionSpace::Discrete(n)) => Ok(Agent::Dqn(DqnAgent::new(obs, n, cfg.clone(), seed)?)),
            (Algorithm::Ppo, ActionSpace::Discrete(n)) => Ok(Agent::Ppo(PpoAgent::new(obs, n, cfg.clone(), seed)?)),
            (Algorithm::Sac, ActionSpace::Continuous { dim }) => {
                Ok(Agent::Sac(SacAgent::new(obs, dim, cfg.clone(), seed)?))
            }
            (alg, space) => Err(Error::Unsupported(format!("{alg} cannot act in a {space:?} action space"))),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Agent::Dqn(_) => Algorithm::Dqn,
            Agent::Ppo(_) => Algorithm::Ppo,
            Agent::Sac(_) => Algorithm::Sac,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        match self {
            Agent::Dqn(a) => &a.cfg,
            Agent::Ppo(a) => &a.cfg,
            Agent::Sac(a) => &a.cfg,
        }
    }

    /// Gradient updates performed so far.
    pub fn updates(&self) -> u64 {
        match self {
            Agent::Dqn(a) => a.updates(),
            Agent::Ppo(a) => a.updates(),
            Agent::Sac(a) => a.updates(),
        }
    }

    /// The network whose parameters the landscape and sharpness probes perturb:
    /// the online Q-network for DQN and the policy otherwise.
    pub fn probe_net(&self) -> &Network {
        match self {
            Agent::Dqn(a) => &a.online,
            Agent::Ppo(a) => &a.policy,
            Agent::Sac(a) => &a.policy,
        }
    }

    /// The loss evaluated over the landscape, as a function of [`Agent::probe_net`].
    pub fn objective(&self, batch: &[Transition]) -> Result<Box<dyn Objective>> {
        Ok(match self {
            Agent::Dqn(a) => Box::new(a.objective(batch)?),
            Agent::Ppo(a) => Box::new(a.objective(batch)?),
            Agent::Sac(a) => Box::new(a.objective(batch)?),
        })
    }

    pub fn save(&self, path: &Path, eval_batch: &[Transition]) -> Result<()> {
        SnapshotFile { version: SNAPSHOT_VERSION, agent: self.clone(), eval_batch: eval_batch.to_vec() }.save(path)
    }
}

/// Policy loss of an unperturbed snapshot over a batch.
pub fn policy_loss_eval(agent: &Agent, batch: &[Transition]) -> Result<f64> {
    agent.objective(batch)?.loss(agent.probe_net())
}

/// On-disk snapshot: the agent plus the evaluation batch used to probe it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub version: u32,
    pub agent: Agent,
    pub eval_batch: Vec<Transition>,
}

impl SnapshotFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: SnapshotFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.version != SNAPSHOT_VERSION {
            return Err(Error::Malformed(format!("unsupported snapshot version {}", file.version)));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{GridworldSpec, PointReacherSpec};

    fn grid() -> EnvSpec {
        EnvSpec::Gridworld(GridworldSpec::fixed_4x4())
    }

    fn batch(agent: &Agent, n: usize) -> Vec<Transition> {
        (0..n)
            .map(|i| {
                let s = vec![(i % 4) as f64 / 3.0, (i / 4 % 4) as f64 / 3.0, 1.0, 1.0];
                let action = match agent.algorithm() {
                    Algorithm::Sac => crate::envs::Action::Continuous(vec![0.3, -0.1]),
                    _ => crate::envs::Action::Discrete(i % 4),
                };
                let mut t = Transition::new(s.clone(), action, -0.1, s, i % 5 == 4, 0);
                t.log_prob = -1.2;
                t.advantage = (i as f64 - 3.0) / 4.0;
                t
            })
            .collect()
    }

    #[test]
    fn algorithm_env_compatibility() {
        let reacher = EnvSpec::PointReacher(PointReacherSpec::default());
        assert!(Agent::new(&AgentConfig::dqn(), &grid(), 0).is_ok());
        assert!(Agent::new(&AgentConfig::ppo(), &grid(), 0).is_ok());
        assert!(Agent::new(&AgentConfig::sac(), &reacher, 0).is_ok());
        assert!(Agent::new(&AgentConfig::sac(), &grid(), 0).is_err());
        assert!(Agent::new(&AgentConfig::dqn(), &reacher, 0).is_err());
    }

    #[test]
    fn eval_is_pure_and_survives_round_trip() {
        let reacher = EnvSpec::PointReacher(PointReacherSpec::default());
        let agents = [
            Agent::new(&AgentConfig::dqn(), &grid(), 3).unwrap(),
            Agent::new(&AgentConfig::ppo(), &grid(), 3).unwrap(),
            Agent::new(&AgentConfig::sac(), &reacher, 3).unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        for agent in agents {
            let b = batch(&agent, 12);
            let l1 = policy_loss_eval(&agent, &b).unwrap();
            assert_eq!(l1, policy_loss_eval(&agent, &b).unwrap());
            let path = dir.path().join(format!("{}.json", agent.algorithm()));
            agent.save(&path, &b).unwrap();
            let loaded = SnapshotFile::load(&path).unwrap();
            assert_eq!(loaded.agent, agent);
            let l2 = policy_loss_eval(&loaded.agent, &loaded.eval_batch).unwrap();
            assert!((l1 - l2).abs() <= 1e-12, "{l1} vs {l2}");
        }
    }

    #[test]
    fn dqn_eval_zero_when_consistent() {
        let mut agent = Agent::new(&AgentConfig::dqn(), &grid(), 0).unwrap();
        let Agent::Dqn(d) = &mut agent else { unreachable!() };
        for l in d.online.param_slices_mut() {
            l.iter_mut().for_each(|v| *v = 0.0);
        }
        d.target = d.online.clone();
        let mut b = batch(&agent, 6);
        b.iter_mut().for_each(|t| t.reward = 0.0);
        assert_eq!(policy_loss_eval(&agent, &b).unwrap(), 0.0);
    }

    #[test]
    fn clone_is_independent() {
        let agent = Agent::new(&AgentConfig::ppo(), &grid(), 1).unwrap();
        let mut copy = agent.clone();
        let Agent::Ppo(p) = &mut copy else { unreachable!() };
        p.policy.param_slices_mut()[0][0] += 1.0;
        assert_ne!(copy, agent);
        assert_ne!(copy.probe_net(), agent.probe_net());
    }
}
