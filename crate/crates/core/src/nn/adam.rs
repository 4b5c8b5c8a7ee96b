use serde::{Deserialize, Serialize};

use super::{Blocks, Gradients, Network};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Blocks,
    v: Blocks,
}

impl AdamState {
    pub fn new(net: &Network, lr: f64) -> Self {
        let shapes = Blocks::from_shapes(&net.block_lens());
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `net` in place.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.lens() != net.block_lens() || state.m.lens() != net.block_lens() {
        return Err(Error::ShapeMismatch("adam: gradients, moments and network differ".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("adam: non-finite gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    for (((p, g), m), v) in net
        .param_slices_mut()
        .into_iter()
        .zip(&grads.0)
        .zip(state.m.0.iter_mut())
        .zip(state.v.0.iter_mut())
    {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_init, Layer};

    fn scalar_net(theta: f64) -> Network {
        Network::from_layers(
            vec![Layer { in_dim: 1, out_dim: 1, weights: vec![theta], biases: vec![0.0] }],
            0,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut net = mlp_init(&[2, 8, 3], 1).unwrap();
        let before = net.clone();
        let mut st = AdamState::new(&net, 1e-3);
        let g = Blocks::zeros_like(&net.params());
        adam_step(&mut net, &g, &mut st).unwrap();
        assert_eq!(net, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_hand_value() {
        let mut net = scalar_net(0.0);
        let mut st = AdamState::new(&net, 0.1);
        let g = Blocks(vec![vec![1.0], vec![0.0]]);
        adam_step(&mut net, &g, &mut st).unwrap();
        let expected = -0.1 * (1.0 / (1.0 + 1e-8));
        assert!((net.params().0[0][0] - expected).abs() < 1e-15);
    }

    #[test]
    fn momentum_differs_from_doubled_lr() {
        let g = Blocks(vec![vec![0.7], vec![0.0]]);
        let mut a = scalar_net(1.0);
        let mut sa = AdamState::new(&a, 0.1);
        adam_step(&mut a, &g, &mut sa).unwrap();
        adam_step(&mut a, &g, &mut sa).unwrap();
        let mut b = scalar_net(1.0);
        let mut sb = AdamState::new(&b, 0.2);
        adam_step(&mut b, &g, &mut sb).unwrap();
        assert_ne!(a.params().0[0][0], b.params().0[0][0]);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut net = scalar_net(1.0);
        let mut st = AdamState::new(&net, 0.1);
        let g = Blocks(vec![vec![f64::INFINITY], vec![0.0]]);
        assert!(matches!(adam_step(&mut net, &g, &mut st), Err(Error::Numeric(_))));
    }
}
