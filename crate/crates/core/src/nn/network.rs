use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Blocks, Gradients, Matrix};
use crate::error::{Error, Result};

/// Version tag written into every network snapshot document.
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// ReLU on hidden layers, identity on the output layer.
    Relu,
}

/// Fully connected layer. `weights` is `out_dim x in_dim`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct Network {
    layers: Vec<Layer>,
    activation: Activation,
    seed: u64,
}

/// On-disk form of a [`Network`].
#[derive(Serialize, Deserialize)]
struct NetworkFile {
    version: u32,
    layer_dims: Vec<usize>,
    activation: Activation,
    seed: u64,
    blocks: Vec<Vec<f64>>,
}

impl From<Network> for NetworkFile {
    fn from(net: Network) -> Self {
        NetworkFile {
            version: SNAPSHOT_VERSION,
            layer_dims: net.layer_dims(),
            activation: net.activation,
            seed: net.seed,
            blocks: net.params().0,
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        if file.version != SNAPSHOT_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported network snapshot version {}",
                file.version
            )));
        }
        let mut net = mlp_zeros(&file.layer_dims, file.seed)?;
        net.activation = file.activation;
        net.set_params(&Blocks(file.blocks))?;
        Ok(net)
    }
}

/// Activations recorded by a forward pass, consumed by [`Network::backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    /// `acts[0]` is the input; `acts[k]` is the (post-ReLU) output of layer `k-1`.
    acts: Vec<Matrix>,
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidSpec(format!(
            "a network needs at least an input and an output dimension, got {layer_dims:?}"
        )));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidSpec(format!("zero layer dimension in {layer_dims:?}")));
    }
    Ok(())
}

fn mlp_zeros(layer_dims: &[usize], seed: u64) -> Result<Network> {
    validate_dims(layer_dims)?;
    let layers = layer_dims
        .windows(2)
        .map(|w| Layer {
            in_dim: w[0],
            out_dim: w[1],
            weights: vec![0.0; w[0] * w[1]],
            biases: vec![0.0; w[1]],
        })
        .collect();
    Ok(Network { layers, activation: Activation::Relu, seed })
}

/// Build an MLP with Kaiming-uniform weights (bound `sqrt(6 / fan_in)`) and zero biases.
pub fn mlp_init(layer_dims: &[usize], seed: u64) -> Result<Network> {
    let mut net = mlp_zeros(layer_dims, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &mut net.layers {
        let bound = (6.0 / layer.in_dim as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.gen_range(-bound..bound);
        }
    }
    Ok(net)
}

impl Network {
    /// Assemble a network from explicit layers. Shapes must chain.
    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidSpec("network without layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::InvalidSpec(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.in_dim * l.out_dim || l.biases.len() != l.out_dim {
                return Err(Error::ShapeMismatch(format!("layer {i} storage does not match its dims")));
            }
            if i > 0 && layers[i - 1].out_dim != l.in_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} outputs {} but layer {i} expects {}",
                    i - 1,
                    layers[i - 1].out_dim,
                    l.in_dim
                )));
            }
        }
        Ok(Network { layers, activation: Activation::Relu, seed })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn block_lens(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.biases.len()])
            .collect()
    }

    /// Parameter blocks in order w0, b0, w1, b1, ...
    pub fn params(&self) -> Blocks {
        Blocks(
            self.layers
                .iter()
                .flat_map(|l| [l.weights.clone(), l.biases.clone()])
                .collect(),
        )
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub fn set_params(&mut self, blocks: &Blocks) -> Result<()> {
        if blocks.lens() != self.block_lens() {
            return Err(Error::ShapeMismatch(format!(
                "expected blocks {:?}, got {:?}",
                self.block_lens(),
                blocks.lens()
            )));
        }
        for (dst, src) in self.param_slices_mut().into_iter().zip(&blocks.0) {
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    /// Overwrite parameters with those of a same-shaped network (hard target update).
    pub fn copy_from(&mut self, src: &Network) -> Result<()> {
        self.set_params(&src.params())
    }

    /// Polyak averaging: `self <- (1 - tau) self + tau src`.
    pub fn soft_update_from(&mut self, src: &Network, tau: f64) -> Result<()> {
        if src.block_lens() != self.block_lens() {
            return Err(Error::ShapeMismatch("soft update between different shapes".into()));
        }
        for (dst, s) in self.param_slices_mut().into_iter().zip(src.param_slices()) {
            for (d, v) in dst.iter_mut().zip(s) {
                *d = (1.0 - tau) * *d + tau * v;
            }
        }
        Ok(())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.forward_batch(&x)?.data)
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut cur = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            cur = affine(layer, &cur);
            if k < last {
                relu_inplace(&mut cur);
            }
        }
        Ok(cur)
    }

    /// Forward pass that records activations for [`Network::backward`].
    pub fn forward_tape(&self, x: &Matrix) -> Result<(Matrix, Tape)> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(x.clone());
        let mut out = None;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &acts[k]);
            if k < last {
                relu_inplace(&mut z);
                acts.push(z);
            } else {
                out = Some(z);
            }
        }
        Ok((out.expect("at least one layer"), Tape { acts }))
    }

    /// Back-propagate `d_out` (dL/d outputs) through the recorded pass. Returns the
    /// parameter gradients and dL/d inputs.
    pub fn backward(&self, tape: &Tape, d_out: &Matrix) -> Result<(Gradients, Matrix)> {
        let batch = tape.acts[0].rows;
        if d_out.rows != batch || d_out.cols != self.out_dim() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient is {}x{}, expected {}x{}",
                d_out.rows,
                d_out.cols,
                batch,
                self.out_dim()
            )));
        }
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(2 * self.layers.len());
        let mut delta = d_out.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.acts[k];
            let mut dw = vec![0.0; layer.weights.len()];
            let mut db = vec![0.0; layer.out_dim];
            for b in 0..batch {
                let d = delta.row(b);
                let x = input.row(b);
                for (o, &g) in d.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    db[o] += g;
                    let row = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (w, &xi) in row.iter_mut().zip(x) {
                        *w += g * xi;
                    }
                }
            }
            let mut dx = Matrix::zeros(batch, layer.in_dim);
            for b in 0..batch {
                let d = delta.row(b).to_vec();
                let out = dx.row_mut(b);
                for (o, &g) in d.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (acc, &w) in out.iter_mut().zip(row) {
                        *acc += g * w;
                    }
                }
            }
            if k > 0 {
                // ReLU mask from the stored post-activation.
                for (g, &a) in dx.data.iter_mut().zip(&input.data) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            grads.push(db);
            grads.push(dw);
            delta = dx;
        }
        grads.reverse();
        Ok((Blocks(grads), delta))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols != self.in_dim() {
            return Err(Error::DimensionMismatch { expected: self.in_dim(), got: x.cols });
        }
        Ok(())
    }

    /// Serialize to the versioned snapshot JSON document.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn affine(layer: &Layer, x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows, layer.out_dim);
    for b in 0..x.rows {
        let xi = x.row(b);
        let o = out.row_mut(b);
        for (j, dst) in o.iter_mut().enumerate() {
            let w = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
            let mut acc = layer.biases[j];
            for (a, c) in w.iter().zip(xi) {
                acc += a * c;
            }
            *dst = acc;
        }
    }
    out
}

fn relu_inplace(m: &mut Matrix) {
    for v in &mut m.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Evaluate a scalar loss of the network outputs over `batch` and its gradient with
/// respect to every parameter. `loss_fn` returns the loss and dL/d outputs.
pub fn loss_and_grad<F>(net: &Network, batch: &Matrix, loss_fn: F) -> Result<(f64, Gradients)>
where
    F: FnOnce(&Matrix) -> Result<(f64, Matrix)>,
{
    if batch.rows == 0 {
        return Err(Error::Precondition("loss_and_grad needs a nonempty batch".into()));
    }
    let (out, tape) = net.forward_tape(batch)?;
    if !out.is_finite() {
        return Err(Error::Numeric("non-finite network output in forward pass".into()));
    }
    let (loss, d_out) = loss_fn(&out)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    let (grads, _) = net.backward(&tape, &d_out)?;
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(weights: Vec<f64>, in_dim: usize, out_dim: usize) -> Layer {
        Layer { in_dim, out_dim, weights, biases: vec![0.0; out_dim] }
    }

    #[test]
    fn init_is_deterministic() {
        let a = mlp_init(&[2, 64, 64, 4], 0).unwrap();
        let b = mlp_init(&[2, 64, 64, 4], 0).unwrap();
        assert_eq!(a, b);
        let c = mlp_init(&[2, 64, 64, 4], 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_counts_and_bounds() {
        let net = mlp_init(&[2, 64, 64, 4], 0).unwrap();
        assert_eq!(net.num_params(), 4612);
        assert_eq!(net.block_lens(), vec![128, 64, 4096, 64, 256, 4]);
        for l in net.layers() {
            let bound = (6.0 / l.in_dim as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
            assert!(l.biases.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(matches!(mlp_init(&[1], 0), Err(Error::InvalidSpec(_))));
        assert!(matches!(mlp_init(&[], 0), Err(Error::InvalidSpec(_))));
        assert!(matches!(mlp_init(&[2, 0, 1], 0), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn zero_weight_net_returns_output_bias() {
        let mut net = mlp_init(&[3, 5, 2], 4).unwrap();
        let mut p = Blocks::zeros_like(&net.params());
        p.0[3] = vec![0.25, -1.5];
        net.set_params(&p).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.25, -1.5]);
    }

    #[test]
    fn identity_net() {
        let net = Network::from_layers(vec![linear(vec![1.0, 0.0, 0.0, 1.0], 2, 2)], 0).unwrap();
        assert_eq!(net.forward(&[0.3, -7.0]).unwrap(), vec![0.3, -7.0]);
    }

    #[test]
    fn relu_hidden_layer() {
        // hidden = relu([1, -1] * 2) = [2, 0]; output sums hidden.
        let net = Network::from_layers(
            vec![linear(vec![1.0, -1.0], 1, 2), linear(vec![1.0, 10.0], 2, 1)],
            0,
        )
        .unwrap();
        assert_eq!(net.forward(&[2.0]).unwrap(), vec![2.0]);
        let (_, tape) = net.forward_tape(&Matrix::from_vec(1, 1, vec![2.0]).unwrap()).unwrap();
        assert_eq!(tape.acts[1].data, vec![2.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = mlp_init(&[2, 4, 1], 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn half_square_norm_gradient() {
        // L = 0.5 * y^2 with y = theta * 1, theta = 3 -> dL/dtheta = 3.
        let net = Network::from_layers(vec![linear(vec![3.0], 1, 1)], 0).unwrap();
        let x = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let (loss, g) = loss_and_grad(&net, &x, |out| {
            let y = out.get(0, 0);
            Ok((0.5 * y * y, Matrix::from_vec(1, 1, vec![y])?))
        })
        .unwrap();
        assert_eq!(loss, 4.5);
        assert_eq!(g.0[0], vec![3.0]);
    }

    #[test]
    fn empty_batch_rejected() {
        let net = mlp_init(&[2, 3, 1], 0).unwrap();
        let x = Matrix::zeros(0, 2);
        let r = loss_and_grad(&net, &x, |o| Ok((0.0, o.clone())));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn nan_forward_is_numeric_error() {
        let net = mlp_init(&[1, 3, 1], 0).unwrap();
        let x = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        let r = loss_and_grad(&net, &x, |o| Ok((0.0, o.clone())));
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let net = mlp_init(&[2, 7, 3], 99).unwrap();
        let json = net.to_json().unwrap();
        let back = Network::from_json(&json).unwrap();
        assert_eq!(net, back);
        for (a, b) in net.params().flatten().iter().zip(back.params().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["layer_dims"], serde_json::json!([2, 7, 3]));
        assert_eq!(v["activation"], "relu");
    }

    #[test]
    fn clone_is_independent() {
        let src = mlp_init(&[2, 4, 2], 3).unwrap();
        let before = src.clone();
        let mut c = src.clone();
        c.param_slices_mut()[0][0] += 1.0;
        assert_eq!(src, before);
        assert_ne!(src, c);
    }
}
