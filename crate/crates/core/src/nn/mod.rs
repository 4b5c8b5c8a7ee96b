//! Dense ReLU networks with hand-written reverse-mode gradients, Adam, and the
//! affine parameter-space perturbation used by the landscape tools.

mod adam;
mod blocks;
mod matrix;
mod network;
mod objective;
mod perturb;

pub use adam::{adam_step, AdamState};
pub use blocks::{Blocks, Gradients};
pub use matrix::Matrix;
pub use network::{loss_and_grad, mlp_init, Activation, Layer, Network, Tape, SNAPSHOT_VERSION};
pub use objective::Objective;
pub use perturb::{perturb, DirectionPair};
