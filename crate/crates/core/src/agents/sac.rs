use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::batch::{continuous_actions, next_state_matrix, state_matrix};
use super::dist::{clamp_log_std, squashed_sample, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS};
use super::{ActMode, AgentConfig, Transition};
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nn::{adam_step, loss_and_grad, mlp_init, AdamState, Gradients, Matrix, Network, Objective};
use crate::seeding::{derive_seed, rng_for};

/// Soft actor-critic with a state-value network, its soft-updated target, two
/// soft-Q networks and a tanh-squashed Gaussian policy. The temperature is fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacAgent {
    pub policy: Network,
    pub q1: Network,
    pub q2: Network,
    pub value: Network,
    pub value_target: Network,
    pub cfg: AgentConfig,
    /// Seed for the action noise used by [`SacAgent::objective`].
    pub eval_seed: u64,
    policy_opt: AdamState,
    q1_opt: AdamState,
    q2_opt: AdamState,
    value_opt: AdamState,
    updates: u64,
    act_dim: usize,
    #[serde(with = "crate::seeding::rng_serde")]
    rng: ChaCha8Rng,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SacStats {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub value_loss: f64,
    pub policy_loss: f64,
}

pub fn gaussian_noise<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix { rows, cols, data }
}

/// Elementwise `min(Q1, Q2)` over a batch of state-action rows.
pub fn min_q(q1: &Network, q2: &Network, sa: &Matrix) -> Result<Vec<f64>> {
    let a = q1.forward_batch(sa)?;
    let b = q2.forward_batch(sa)?;
    Ok((0..sa.rows).map(|i| a.get(i, 0).min(b.get(i, 0))).collect())
}

/// `mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a))` with `a` reparameterised
/// through fixed noise, as a function of the policy parameters.
pub struct SacPolicyObjective {
    states: Matrix,
    noise: Matrix,
    q1: Network,
    q2: Network,
    alpha: f64,
}

struct PolicyPass {
    actions: Matrix,
    log_probs: Vec<f64>,
}

impl SacPolicyObjective {
    pub fn new(states: Matrix, noise: Matrix, q1: Network, q2: Network, alpha: f64) -> Result<Self> {
        if states.rows == 0 {
            return Err(Error::Precondition("SAC loss needs a nonempty batch".into()));
        }
        if noise.rows != states.rows {
            return Err(Error::DimensionMismatch { expected: states.rows, got: noise.rows });
        }
        if q1.in_dim() != states.cols + noise.cols || q2.in_dim() != q1.in_dim() {
            return Err(Error::DimensionMismatch { expected: states.cols + noise.cols, got: q1.in_dim() });
        }
        Ok(SacPolicyObjective { states, noise, q1, q2, alpha })
    }

    fn sample(&self, out: &Matrix) -> Result<PolicyPass> {
        let d = self.noise.cols;
        if out.cols != 2 * d {
            return Err(Error::DimensionMismatch { expected: 2 * d, got: out.cols });
        }
        let mut actions = Matrix::zeros(out.rows, d);
        let mut log_probs = Vec::with_capacity(out.rows);
        for i in 0..out.rows {
            let row = out.row(i);
            let (a, lp) = squashed_sample(&row[..d], &row[d..], self.noise.row(i));
            actions.row_mut(i).copy_from_slice(&a);
            log_probs.push(lp);
        }
        Ok(PolicyPass { actions, log_probs })
    }

    fn value_of(&self, pass: &PolicyPass) -> Result<f64> {
        let sa = self.states.hcat(&pass.actions)?;
        let q = min_q(&self.q1, &self.q2, &sa)?;
        let n = q.len() as f64;
        let loss = pass.log_probs.iter().zip(&q).map(|(lp, q)| self.alpha * lp - q).sum::<f64>() / n;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite SAC policy loss {loss}")));
        }
        Ok(loss)
    }

    /// Loss and dL/d(policy output) for a given policy output matrix.
    fn grad_wrt_output(&self, out: &Matrix) -> Result<(f64, Matrix)> {
        let d = self.noise.cols;
        let n = out.rows as f64;
        let pass = self.sample(out)?;
        let loss = self.value_of(&pass)?;

        let sa = self.states.hcat(&pass.actions)?;
        let (o1, t1) = self.q1.forward_tape(&sa)?;
        let (o2, t2) = self.q2.forward_tape(&sa)?;
        let mut pick1 = Matrix::zeros(sa.rows, 1);
        let mut pick2 = Matrix::zeros(sa.rows, 1);
        for i in 0..sa.rows {
            if o1.get(i, 0) <= o2.get(i, 0) {
                pick1.set(i, 0, 1.0);
            } else {
                pick2.set(i, 0, 1.0);
            }
        }
        let (_, dq1) = self.q1.backward(&t1, &pick1)?;
        let (_, dq2) = self.q2.backward(&t2, &pick2)?;

        let obs = self.states.cols;
        let mut g = Matrix::zeros(out.rows, out.cols);
        for i in 0..out.rows {
            for j in 0..d {
                let a = pass.actions.get(i, j);
                let raw_ls = out.get(i, d + j);
                let ls = clamp_log_std(raw_ls);
                let xi = self.noise.get(i, j);
                let one_m = 1.0 - a * a;
                let dq_da = dq1.get(i, obs + j) + dq2.get(i, obs + j);
                let dlogp_du = 2.0 * a * one_m / (one_m + SQUASH_EPS);
                let dl_du = (self.alpha * dlogp_du - dq_da * one_m) / n;
                g.set(i, j, dl_du);
                let in_range = raw_ls > LOG_STD_MIN && raw_ls < LOG_STD_MAX;
                let dl_dls = if in_range { -self.alpha / n + dl_du * ls.exp() * xi } else { 0.0 };
                g.set(i, d + j, dl_dls);
            }
        }
        Ok((loss, g))
    }
}

impl Objective for SacPolicyObjective {
    fn loss(&self, net: &Network) -> Result<f64> {
        let out = net.forward_batch(&self.states)?;
        self.value_of(&self.sample(&out)?)
    }

    fn loss_and_grad(&self, net: &Network) -> Result<(f64, Gradients)> {
        loss_and_grad(net, &self.states, |out| self.grad_wrt_output(out))
    }
}

/// Mean squared error of a single-output network against fixed targets.
pub struct RegressionObjective {
    inputs: Matrix,
    targets: Vec<f64>,
}

impl RegressionObjective {
    pub fn new(inputs: Matrix, targets: Vec<f64>) -> Result<Self> {
        if inputs.rows == 0 || inputs.rows != targets.len() {
            return Err(Error::Precondition("regression loss needs matching nonempty inputs and targets".into()));
        }
        Ok(RegressionObjective { inputs, targets })
    }

    fn evaluate(&self, out: &Matrix) -> (f64, Matrix) {
        let n = self.targets.len() as f64;
        let mut g = Matrix::zeros(out.rows, 1);
        let mut loss = 0.0;
        for (i, y) in self.targets.iter().enumerate() {
            let d = out.get(i, 0) - y;
            loss += d * d;
            g.set(i, 0, 2.0 * d / n);
        }
        (loss / n, g)
    }
}

impl Objective for RegressionObjective {
    fn loss(&self, net: &Network) -> Result<f64> {
        Ok(self.evaluate(&net.forward_batch(&self.inputs)?).0)
    }

    fn loss_and_grad(&self, net: &Network) -> Result<(f64, Gradients)> {
        loss_and_grad(net, &self.inputs, |out| Ok(self.evaluate(out)))
    }
}

impl SacAgent {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: AgentConfig, seed: u64) -> Result<Self> {
        let dims = |input: usize, output: usize| {
            let mut d = vec![input];
            d.extend(&cfg.hidden);
            d.push(output);
            d
        };
        let policy = mlp_init(&dims(obs_dim, 2 * act_dim), derive_seed(seed, "sac-policy", 0))?;
        let q1 = mlp_init(&dims(obs_dim + act_dim, 1), derive_seed(seed, "sac-q", 1))?;
        let q2 = mlp_init(&dims(obs_dim + act_dim, 1), derive_seed(seed, "sac-q", 2))?;
        let value = mlp_init(&dims(obs_dim, 1), derive_seed(seed, "sac-value", 0))?;
        Ok(SacAgent {
            policy_opt: AdamState::new(&policy, cfg.lr),
            q1_opt: AdamState::new(&q1, cfg.lr),
            q2_opt: AdamState::new(&q2, cfg.lr),
            value_opt: AdamState::new(&value, cfg.lr),
            value_target: value.clone(),
            policy,
            q1,
            q2,
            value,
            eval_seed: derive_seed(seed, "sac-eval", 0),
            cfg,
            updates: 0,
            act_dim,
            rng: rng_for(seed, "sac-act", 0),
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Action in `[-1, 1]^act_dim`; the caller rescales to the environment bounds.
    pub fn act(&mut self, obs: &[f64], mode: ActMode) -> Result<Action> {
        let out = self.policy.forward(obs)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite policy output".into()));
        }
        let d = self.act_dim;
        let a = match mode {
            ActMode::Greedy => out[..d].iter().map(|m| m.tanh()).collect(),
            ActMode::Explore => {
                let noise: Vec<f64> = (0..d).map(|_| self.rng.sample(StandardNormal)).collect();
                squashed_sample(&out[..d], &out[d..], &noise).0
            }
        };
        Ok(Action::Continuous(a))
    }

    /// Policy objective with unit temperature and noise drawn from the fixed
    /// evaluation seed, so repeated evaluations agree exactly.
    pub fn objective(&self, batch: &[Transition]) -> Result<SacPolicyObjective> {
        let states = state_matrix(batch)?;
        let mut rng = rng_for(self.eval_seed, "sac-eval-noise", 0);
        let noise = gaussian_noise(states.rows, self.act_dim, &mut rng);
        SacPolicyObjective::new(states, noise, self.q1.clone(), self.q2.clone(), 1.0)
    }

    pub fn update(&mut self, batch: &[Transition]) -> Result<SacStats> {
        if batch.is_empty() {
            return Err(Error::Precondition("SAC update needs a nonempty batch".into()));
        }
        let states = state_matrix(batch)?;
        let actions = continuous_actions(batch, self.act_dim)?;
        let sa = states.hcat(&actions)?;
        let v_next = self.value_target.forward_batch(&next_state_matrix(batch)?)?;
        let q_targets: Vec<f64> = batch
            .iter()
            .enumerate()
            .map(|(i, t)| t.reward + self.cfg.gamma * if t.done { 0.0 } else { v_next.get(i, 0) })
            .collect();

        let alpha = self.cfg.entropy_coef;
        let noise = gaussian_noise(states.rows, self.act_dim, &mut self.rng);
        let pobj = SacPolicyObjective::new(states.clone(), noise, self.q1.clone(), self.q2.clone(), alpha)?;
        let pass = pobj.sample(&self.policy.forward_batch(&states)?)?;
        let new_sa = states.hcat(&pass.actions)?;
        let q_new = min_q(&self.q1, &self.q2, &new_sa)?;
        let v_targets: Vec<f64> = q_new.iter().zip(&pass.log_probs).map(|(q, lp)| q - alpha * lp).collect();

        let q1obj = RegressionObjective::new(sa.clone(), q_targets.clone())?;
        let q2obj = RegressionObjective::new(sa, q_targets)?;
        let vobj = RegressionObjective::new(states, v_targets)?;
        let (q1_loss, g1) = q1obj.loss_and_grad(&self.q1)?;
        let (q2_loss, g2) = q2obj.loss_and_grad(&self.q2)?;
        let (value_loss, gv) = vobj.loss_and_grad(&self.value)?;
        let (policy_loss, gp) = pobj.loss_and_grad(&self.policy)?;

        adam_step(&mut self.q1, &g1, &mut self.q1_opt)?;
        adam_step(&mut self.q2, &g2, &mut self.q2_opt)?;
        adam_step(&mut self.value, &gv, &mut self.value_opt)?;
        adam_step(&mut self.policy, &gp, &mut self.policy_opt)?;
        self.value_target.soft_update_from(&self.value, self.cfg.tau)?;
        self.updates += 1;
        let stats = SacStats { q1_loss, q2_loss, value_loss, policy_loss };
        if ![q1_loss, q2_loss, value_loss, policy_loss].iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite SAC losses {stats:?}")));
        }
        Ok(stats)
    }
}
