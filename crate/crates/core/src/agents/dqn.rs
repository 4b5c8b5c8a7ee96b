use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{discrete_actions, next_state_matrix, state_matrix};
use super::dist::argmax;
use super::{ActMode, AgentConfig, Transition};
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nn::{adam_step, loss_and_grad, mlp_init, AdamState, Gradients, Matrix, Network, Objective};
use crate::seeding::{derive_seed, rng_for};

/// Deep Q-network with a hard-copied target network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnAgent {
    pub online: Network,
    pub target: Network,
    pub cfg: AgentConfig,
    /// Exploration rate used by [`ActMode::Explore`]; owned by the training loop.
    pub epsilon: f64,
    opt: AdamState,
    updates: u64,
    n_actions: usize,
    #[serde(with = "crate::seeding::rng_serde")]
    rng: ChaCha8Rng,
}

fn smooth_l1(d: f64) -> (f64, f64) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

/// Smooth-L1 temporal-difference loss of an online network against fixed
/// bootstrap targets from the target network.
pub struct DqnObjective {
    states: Matrix,
    actions: Vec<usize>,
    targets: Vec<f64>,
}

impl DqnObjective {
    pub fn new(target: &Network, batch: &[Transition], gamma: f64) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::Precondition("DQN loss needs a nonempty batch".into()));
        }
        let states = state_matrix(batch)?;
        let actions = discrete_actions(batch, target.out_dim())?;
        let next_q = target.forward_batch(&next_state_matrix(batch)?)?;
        let targets = batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let bootstrap = if t.done {
                    0.0
                } else {
                    next_q.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
                t.reward + gamma * bootstrap
            })
            .collect();
        Ok(DqnObjective { states, actions, targets })
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn loss_from(&self, q: &Matrix) -> (f64, Matrix) {
        let n = self.actions.len() as f64;
        let mut d_out = Matrix::zeros(q.rows, q.cols);
        let mut total = 0.0;
        for (i, (&a, &y)) in self.actions.iter().zip(&self.targets).enumerate() {
            let (l, g) = smooth_l1(q.get(i, a) - y);
            total += l;
            d_out.set(i, a, g / n);
        }
        (total / n, d_out)
    }
}

impl Objective for DqnObjective {
    fn loss(&self, net: &Network) -> Result<f64> {
        let q = net.forward_batch(&self.states)?;
        let loss = self.loss_from(&q).0;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite TD loss {loss}")));
        }
        Ok(loss)
    }

    fn loss_and_grad(&self, net: &Network) -> Result<(f64, Gradients)> {
        loss_and_grad(net, &self.states, |q| Ok(self.loss_from(q)))
    }
}

impl DqnAgent {
    pub fn new(obs_dim: usize, n_actions: usize, cfg: AgentConfig, seed: u64) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend(&cfg.hidden);
        dims.push(n_actions);
        let online = mlp_init(&dims, derive_seed(seed, "dqn-online", 0))?;
        let target = online.clone();
        let opt = AdamState::new(&online, cfg.lr);
        Ok(DqnAgent {
            online,
            target,
            epsilon: cfg.eps_start,
            cfg,
            opt,
            updates: 0,
            n_actions,
            rng: rng_for(seed, "dqn-act", 0),
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn act(&mut self, obs: &[f64], mode: ActMode) -> Result<Action> {
        if mode == ActMode::Explore && self.rng.gen::<f64>() < self.epsilon {
            return Ok(Action::Discrete(self.rng.gen_range(0..self.n_actions)));
        }
        let q = self.online.forward(obs)?;
        Ok(Action::Discrete(argmax(&q)))
    }

    pub fn objective(&self, batch: &[Transition]) -> Result<DqnObjective> {
        DqnObjective::new(&self.target, batch, self.cfg.gamma)
    }

    /// One Adam step on the TD loss; refreshes the target every
    /// `target_update_every` updates. Returns the pre-update loss.
    pub fn update(&mut self, batch: &[Transition]) -> Result<f64> {
        let objective = self.objective(batch)?;
        let (loss, grads) = objective.loss_and_grad(&self.online)?;
        adam_step(&mut self.online, &grads, &mut self.opt)?;
        self.updates += 1;
        if self.updates % self.cfg.target_update_every == 0 {
            self.target.copy_from(&self.online)?;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    fn linear(w: Vec<f64>, b: Vec<f64>, in_dim: usize, out_dim: usize) -> Network {
        Network::from_layers(vec![Layer { in_dim, out_dim, weights: w, biases: b }], 0).unwrap()
    }

    fn tr(s: f64, a: usize, r: f64, sn: f64, done: bool) -> Transition {
        Transition::new(vec![s], Action::Discrete(a), r, vec![sn], done, 0)
    }

    #[test]
    fn hand_computed_td_loss() {
        // Q(s) = [2s, -s]; target Q(s) = [s, 3s]
        let online = linear(vec![2.0, -1.0], vec![0.0, 0.0], 1, 2);
        let target = linear(vec![1.0, 3.0], vec![0.0, 0.0], 1, 2);
        let batch = [tr(1.0, 0, 0.5, 0.2, false)];
        let obj = DqnObjective::new(&target, &batch, 0.9).unwrap();
        // y = 0.5 + 0.9 * max(0.2, 0.6) = 1.04; q = 2; d = 0.96 -> 0.5 d^2
        assert!((obj.targets()[0] - 1.04).abs() < 1e-12);
        assert!((obj.loss(&online).unwrap() - 0.5 * 0.96f64.powi(2)).abs() < 1e-12);
        // Large error uses the linear branch.
        let far = [tr(1.0, 1, 5.0, 0.0, true)];
        let obj = DqnObjective::new(&target, &far, 0.9).unwrap();
        assert!((obj.loss(&online).unwrap() - (6.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn terminal_transition_has_no_bootstrap() {
        let target = linear(vec![10.0, 10.0], vec![5.0, 5.0], 1, 2);
        let obj = DqnObjective::new(&target, &[tr(1.0, 0, 0.7, 1.0, true)], 0.99).unwrap();
        assert_eq!(obj.targets()[0], 0.7);
    }

    #[test]
    fn consistent_q_gives_zero_loss_and_no_update() {
        // Q = 0 everywhere, rewards 0: targets are 0.
        let cfg = AgentConfig::dqn();
        let mut agent = DqnAgent::new(1, 2, cfg, 0).unwrap();
        let zero = linear(vec![0.0, 0.0], vec![0.0, 0.0], 1, 2);
        agent.online = zero.clone();
        agent.target = zero.clone();
        agent.opt = AdamState::new(&zero, agent.cfg.lr);
        let batch = [tr(0.3, 0, 0.0, 0.4, false), tr(0.1, 1, 0.0, 0.0, true)];
        let loss = agent.update(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(agent.online, zero);
    }

    #[test]
    fn greedy_action_is_argmax() {
        let mut agent = DqnAgent::new(1, 2, AgentConfig::dqn(), 0).unwrap();
        agent.online = linear(vec![1.0, -1.0], vec![0.0, 0.0], 1, 2);
        agent.epsilon = 0.0;
        assert_eq!(agent.act(&[2.0], ActMode::Explore).unwrap(), Action::Discrete(0));
        assert_eq!(agent.act(&[-2.0], ActMode::Greedy).unwrap(), Action::Discrete(1));
    }

    #[test]
    fn target_refresh_cadence() {
        let mut cfg = AgentConfig::dqn();
        cfg.target_update_every = 3;
        cfg.lr = 1e-2;
        let mut agent = DqnAgent::new(1, 2, cfg, 1).unwrap();
        let batch = [tr(0.5, 0, 1.0, 0.2, false), tr(0.9, 1, -1.0, 0.1, false)];
        let initial_target = agent.target.clone();
        agent.update(&batch).unwrap();
        agent.update(&batch).unwrap();
        assert_eq!(agent.target, initial_target, "target constant between copies");
        agent.update(&batch).unwrap();
        assert_eq!(agent.target, agent.online);
    }

    #[test]
    fn rejects_bad_batches() {
        let agent = DqnAgent::new(1, 2, AgentConfig::dqn(), 0).unwrap();
        assert!(agent.objective(&[]).is_err());
        let cont = Transition::new(vec![0.0], Action::Continuous(vec![0.0]), 0.0, vec![0.0], false, 0);
        assert!(agent.objective(&[cont]).is_err());
        assert!(agent.objective(&[tr(0.0, 5, 0.0, 0.0, false)]).is_err());
    }
}
