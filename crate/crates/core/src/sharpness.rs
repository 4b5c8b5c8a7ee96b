//! End-of-training sharpness: the loss increase along the one-step ascent
//! perturbation of norm `rho`.

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Transition};
use crate::error::{Error, Result};
use crate::nn::{Blocks, Gradients, Network, Objective};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SharpnessConfig {
    pub rho: f64,
    pub p: f64,
    pub batch_size: usize,
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        SharpnessConfig { rho: 0.02, p: 2.0, batch_size: 128 }
    }
}

impl SharpnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidSpec(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidSpec(format!("p must exceed 1, got {}", self.p)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidSpec("sharpness batch size must be positive".into()));
        }
        Ok(())
    }

    /// Hölder conjugate of `p`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sharpness {
    pub value: f64,
    /// Set when the gradient vanished and no ascent direction exists.
    pub degenerate: bool,
    pub grad_norm: f64,
}

/// `rho * sgn(g) |g|^(q-1) / (||g||_q^q)^(1/p)`, or `None` for a zero gradient.
pub fn ascent_perturbation(grad: &Gradients, rho: f64, p: f64) -> Option<Blocks> {
    let q = p / (p - 1.0);
    let sum_q: f64 = grad.0.iter().flatten().map(|g| g.abs().powf(q)).sum();
    if sum_q == 0.0 {
        return None;
    }
    let denom = sum_q.powf(1.0 / p);
    let eps = grad
        .0
        .iter()
        .map(|b| b.iter().map(|g| rho * g.signum() * g.abs().powf(q - 1.0) / denom).collect())
        .collect();
    Some(Blocks(eps))
}

pub fn sharpness(objective: &dyn Objective, net: &Network, cfg: &SharpnessConfig) -> Result<Sharpness> {
    cfg.validate()?;
    let (base, grad) = objective.loss_and_grad(net)?;
    if !grad.is_finite() {
        return Err(Error::Numeric("non-finite gradient in sharpness probe".into()));
    }
    let grad_norm = grad.norm();
    let Some(eps) = ascent_perturbation(&grad, cfg.rho, cfg.p) else {
        return Ok(Sharpness { value: 0.0, degenerate: true, grad_norm });
    };
    let mut params = net.params();
    params.add_scaled(&eps, 1.0);
    let mut moved = net.clone();
    moved.set_params(&params)?;
    let value = objective.loss(&moved)? - base;
    Ok(Sharpness { value, degenerate: false, grad_norm })
}

/// Sharpness of an agent's probe network under its landscape loss.
pub fn agent_sharpness(agent: &Agent, batch: &[Transition], cfg: &SharpnessConfig) -> Result<Sharpness> {
    sharpness(agent.objective(batch)?.as_ref(), agent.probe_net(), cfg)
}

/// `L(theta) = 0.5 ||theta||^2` over all parameters of the network.
pub struct QuadraticProbe;

impl Objective for QuadraticProbe {
    fn loss(&self, net: &Network) -> Result<f64> {
        Ok(0.5 * net.params().dot(&net.params()))
    }

    fn loss_and_grad(&self, net: &Network) -> Result<(f64, Gradients)> {
        let p = net.params();
        Ok((0.5 * p.dot(&p), p))
    }
}
