use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{discrete_actions, next_state_matrix, state_matrix};
use super::dist::{argmax, entropy, log_softmax, sample_categorical, softmax};
use super::{ActMode, AgentConfig, Transition};
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nn::{adam_step, loss_and_grad, mlp_init, AdamState, Gradients, Matrix, Network, Objective};
use crate::seeding::{derive_seed, rng_for};

/// Clipped-surrogate PPO with separate policy and value networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoAgent {
    pub policy: Network,
    pub value: Network,
    pub cfg: AgentConfig,
    policy_opt: AdamState,
    value_opt: AdamState,
    updates: u64,
    n_actions: usize,
    #[serde(with = "crate::seeding::rng_serde")]
    rng: ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PpoAct {
    pub action: Action,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// `-mean(min(r A, clip(r, 1-eps, 1+eps) A)) - c * mean(H)` over a fixed batch with
/// stored behaviour log-probabilities and advantages.
pub struct PpoPolicyObjective {
    states: Matrix,
    actions: Vec<usize>,
    old_log_probs: Vec<f64>,
    advantages: Vec<f64>,
    clip: f64,
    entropy_coef: f64,
}

impl PpoPolicyObjective {
    pub fn new(batch: &[Transition], n_actions: usize, clip: f64, entropy_coef: f64) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::Precondition("PPO loss needs a nonempty batch".into()));
        }
        Ok(PpoPolicyObjective {
            states: state_matrix(batch)?,
            actions: discrete_actions(batch, n_actions)?,
            old_log_probs: batch.iter().map(|t| t.log_prob).collect(),
            advantages: batch.iter().map(|t| t.advantage).collect(),
            clip,
            entropy_coef,
        })
    }

    /// Returns (total loss, surrogate loss, mean entropy, dL/dlogits).
    fn evaluate(&self, logits: &Matrix) -> (f64, f64, f64, Matrix) {
        let n = self.actions.len() as f64;
        let mut grad = Matrix::zeros(logits.rows, logits.cols);
        let (mut surrogate, mut ent_sum) = (0.0, 0.0);
        for i in 0..logits.rows {
            let row = logits.row(i);
            let p = softmax(row);
            let lp = log_softmax(row);
            let a = self.actions[i];
            let adv = self.advantages[i];
            let ratio = (lp[a] - self.old_log_probs[i]).exp();
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(1.0 - self.clip, 1.0 + self.clip) * adv;
            let d_term = if unclipped <= clipped { ratio * adv } else { 0.0 };
            surrogate -= unclipped.min(clipped);
            let h = entropy(&p, &lp);
            ent_sum += h;
            let g = grad.row_mut(i);
            for k in 0..g.len() {
                let onehot = if k == a { 1.0 } else { 0.0 };
                let d_surr = -d_term * (onehot - p[k]);
                let d_ent = -p[k] * (lp[k] + h);
                g[k] = (d_surr - self.entropy_coef * d_ent) / n;
            }
        }
        let surrogate = surrogate / n;
        let mean_ent = ent_sum / n;
        (surrogate - self.entropy_coef * mean_ent, surrogate, mean_ent, grad)
    }
}

impl Objective for PpoPolicyObjective {
    fn loss(&self, net: &Network) -> Result<f64> {
        let logits = net.forward_batch(&self.states)?;
        let loss = self.evaluate(&logits).0;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite PPO loss {loss}")));
        }
        Ok(loss)
    }

    fn loss_and_grad(&self, net: &Network) -> Result<(f64, Gradients)> {
        loss_and_grad(net, &self.states, |logits| {
            let (loss, _, _, g) = self.evaluate(logits);
            Ok((loss, g))
        })
    }
}

/// Mean squared error of the value head against stored returns.
pub struct ValueObjective {
    states: Matrix,
    targets: Vec<f64>,
}

impl ValueObjective {
    pub fn new(states: Matrix, targets: Vec<f64>) -> Result<Self> {
        if states.rows == 0 || states.rows != targets.len() {
            return Err(Error::Precondition("value loss needs matching nonempty states and targets".into()));
        }
        Ok(ValueObjective { states, targets })
    }

    fn evaluate(&self, v: &Matrix) -> (f64, Matrix) {
        let n = self.targets.len() as f64;
        let mut g = Matrix::zeros(v.rows, 1);
        let mut loss = 0.0;
        for (i, y) in self.targets.iter().enumerate() {
            let d = v.get(i, 0) - y;
            loss += d * d;
            g.set(i, 0, 2.0 * d / n);
        }
        (loss / n, g)
    }
}

impl Objective for ValueObjective {
    fn loss(&self, net: &Network) -> Result<f64> {
        Ok(self.evaluate(&net.forward_batch(&self.states)?).0)
    }

    fn loss_and_grad(&self, net: &Network) -> Result<(f64, Gradients)> {
        loss_and_grad(net, &self.states, |v| Ok(self.evaluate(v)))
    }
}

impl PpoAgent {
    pub fn new(obs_dim: usize, n_actions: usize, cfg: AgentConfig, seed: u64) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend(&cfg.hidden);
        let mut pdims = dims.clone();
        pdims.push(n_actions);
        dims.push(1);
        let policy = mlp_init(&pdims, derive_seed(seed, "ppo-policy", 0))?;
        let value = mlp_init(&dims, derive_seed(seed, "ppo-value", 0))?;
        Ok(PpoAgent {
            policy_opt: AdamState::new(&policy, cfg.lr),
            value_opt: AdamState::new(&value, cfg.lr),
            policy,
            value,
            cfg,
            updates: 0,
            n_actions,
            rng: rng_for(seed, "ppo-act", 0),
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn act(&mut self, obs: &[f64], mode: ActMode) -> Result<PpoAct> {
        let logits = self.policy.forward(obs)?;
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numeric("non-finite policy logits".into()));
        }
        let p = softmax(&logits);
        let a = match mode {
            ActMode::Explore => sample_categorical(&p, &mut self.rng),
            ActMode::Greedy => argmax(&p),
        };
        let value = self.value.forward(obs)?[0];
        Ok(PpoAct { action: Action::Discrete(a), log_prob: log_softmax(&logits)[a], value })
    }

    /// Fill `advantage` (GAE) and `ret` for a rollout of complete episodes.
    pub fn finish_rollout(&self, rollout: &mut [Transition]) -> Result<()> {
        if rollout.is_empty() {
            return Err(Error::Precondition("empty rollout".into()));
        }
        let v = self.value.forward_batch(&state_matrix(rollout)?)?;
        let v_next = self.value.forward_batch(&next_state_matrix(rollout)?)?;
        let (gamma, lambda) = (self.cfg.gamma, self.cfg.gae_lambda);
        let mut running = 0.0;
        for i in (0..rollout.len()).rev() {
            let t = &mut rollout[i];
            let live = if t.done { 0.0 } else { 1.0 };
            let delta = t.reward + gamma * live * v_next.get(i, 0) - v.get(i, 0);
            running = delta + gamma * lambda * live * running;
            t.advantage = running;
            t.ret = running + v.get(i, 0);
        }
        if self.cfg.normalize_advantages && rollout.len() > 1 {
            let n = rollout.len() as f64;
            let mean = rollout.iter().map(|t| t.advantage).sum::<f64>() / n;
            let var = rollout.iter().map(|t| (t.advantage - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std > 1e-8 {
                for t in rollout.iter_mut() {
                    t.advantage = (t.advantage - mean) / std;
                }
            }
        }
        if rollout.iter().any(|t| !t.advantage.is_finite() || !t.ret.is_finite()) {
            return Err(Error::Numeric("non-finite advantage".into()));
        }
        Ok(())
    }

    /// Landscape/sharpness objective: the clipped surrogate alone.
    pub fn objective(&self, batch: &[Transition]) -> Result<PpoPolicyObjective> {
        PpoPolicyObjective::new(batch, self.n_actions, self.cfg.clip, 0.0)
    }

    /// `epochs` passes of shuffled minibatches over a finished rollout.
    pub fn update(&mut self, rollout: &[Transition]) -> Result<PpoStats> {
        if rollout.is_empty() {
            return Err(Error::Precondition("PPO update needs at least one transition".into()));
        }
        let mut order: Vec<usize> = (0..rollout.len()).collect();
        let mut stats = PpoStats::default();
        let mut count = 0.0;
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let mb: Vec<Transition> = chunk.iter().map(|&i| rollout[i].clone()).collect();
                let pobj = PpoPolicyObjective::new(&mb, self.n_actions, self.cfg.clip, self.cfg.entropy_coef)?;
                let (logits, tape) = self.policy.forward_tape(&pobj.states)?;
                if !logits.is_finite() {
                    return Err(Error::Numeric("non-finite policy logits".into()));
                }
                let (_, surrogate, ent, d_logits) = pobj.evaluate(&logits);
                let (pg, _) = self.policy.backward(&tape, &d_logits)?;
                adam_step(&mut self.policy, &pg, &mut self.policy_opt)?;

                let vobj = ValueObjective::new(pobj.states.clone(), mb.iter().map(|t| t.ret).collect())?;
                let (vloss, vg) = vobj.loss_and_grad(&self.value)?;
                adam_step(&mut self.value, &vg, &mut self.value_opt)?;

                stats.policy_loss += surrogate;
                stats.value_loss += vloss;
                stats.entropy += ent;
                count += 1.0;
                self.updates += 1;
            }
        }
        stats.policy_loss /= count;
        stats.value_loss /= count;
        stats.entropy /= count;
        if !(stats.policy_loss.is_finite() && stats.value_loss.is_finite()) {
            return Err(Error::Numeric("non-finite PPO losses".into()));
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    fn tr(s: Vec<f64>, a: usize, logp: f64, adv: f64) -> Transition {
        let mut t = Transition::new(s.clone(), Action::Discrete(a), 0.0, s, false, 0);
        t.log_prob = logp;
        t.advantage = adv;
        t
    }

    fn batch_for(agent: &PpoAgent, advs: &[f64]) -> Vec<Transition> {
        advs.iter()
            .enumerate()
            .map(|(i, &adv)| {
                let s = vec![i as f64 * 0.1, 0.5, 0.2, 0.9];
                let logits = agent.policy.forward(&s).unwrap();
                let a = i % 4;
                tr(s, a, log_softmax(&logits)[a], adv)
            })
            .collect()
    }

    #[test]
    fn ratio_one_gives_negative_mean_advantage() {
        let agent = PpoAgent::new(4, 4, AgentConfig::ppo(), 3).unwrap();
        let advs = [0.5, -1.0, 2.0, 0.25, -0.3];
        let batch = batch_for(&agent, &advs);
        let loss = agent.objective(&batch).unwrap().loss(&agent.policy).unwrap();
        let expect = -advs.iter().sum::<f64>() / advs.len() as f64;
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_advantages_give_zero_surrogate_gradient() {
        let agent = PpoAgent::new(4, 4, AgentConfig::ppo(), 3).unwrap();
        let batch = batch_for(&agent, &[0.0; 6]);
        let (loss, g) = agent.objective(&batch).unwrap().loss_and_grad(&agent.policy).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clipped_loss_hand_computation() {
        // One-layer policy over 2 actions with logits [w0 s, w1 s], s = 1.
        let policy = Network::from_layers(
            vec![Layer { in_dim: 1, out_dim: 2, weights: vec![1.0, 0.0], biases: vec![0.0, 0.0] }],
            0,
        )
        .unwrap();
        // pi(a=0) = e / (e + 1)
        let p0 = 1f64.exp() / (1f64.exp() + 1.0);
        let old = (0.5f64).ln();
        let batch = vec![tr(vec![1.0], 0, old, 1.0), tr(vec![1.0], 1, old, -2.0)];
        let obj = PpoPolicyObjective::new(&batch, 2, 0.2, 0.0).unwrap();
        let r0 = p0 / 0.5; // > 1.2 with A > 0 -> clipped at 1.2
        let r1 = (1.0 - p0) / 0.5; // < 0.8 with A < 0 -> clipped at 0.8
        assert!(r0 > 1.2 && r1 < 0.8);
        let expect = -((1.2f64 * 1.0).min(r0 * 1.0) + (r1 * -2.0f64).min(0.8 * -2.0)) / 2.0;
        assert!((obj.loss(&policy).unwrap() - expect).abs() < 1e-12);
        // Both samples sit on the clipped branch: no gradient.
        let (_, g) = obj.loss_and_grad(&policy).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gae_on_single_terminal_step() {
        let mut cfg = AgentConfig::ppo();
        cfg.normalize_advantages = false;
        let agent = PpoAgent::new(4, 4, cfg, 0).unwrap();
        let s = vec![0.1, 0.2, 0.3, 0.4];
        let mut roll = vec![Transition::new(s.clone(), Action::Discrete(0), 0.9, s.clone(), true, 0)];
        agent.finish_rollout(&mut roll).unwrap();
        let v = agent.value.forward(&s).unwrap()[0];
        assert!((roll[0].advantage - (0.9 - v)).abs() < 1e-12);
        assert!((roll[0].ret - 0.9).abs() < 1e-12);
    }

    #[test]
    fn update_changes_policy_and_counts_steps() {
        let mut cfg = AgentConfig::ppo();
        cfg.batch_size = 4;
        let mut agent = PpoAgent::new(4, 4, cfg, 5).unwrap();
        let mut roll = batch_for(&agent, &[0.0; 10]);
        for (i, t) in roll.iter_mut().enumerate() {
            t.reward = if i % 2 == 0 { 1.0 } else { -0.1 };
            t.done = i == 9;
        }
        agent.finish_rollout(&mut roll).unwrap();
        let before = agent.policy.clone();
        let stats = agent.update(&roll).unwrap();
        assert!(stats.entropy > 0.0 && stats.entropy <= 4f64.ln() + 1e-12);
        assert_ne!(before, agent.policy);
        assert_eq!(agent.updates(), 4 * 3);
    }
}
