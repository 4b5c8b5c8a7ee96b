use super::{Gradients, Network};
use crate::error::Result;

/// A scalar loss viewed as a function of one network's parameters, with every
/// other input (batch, frozen networks, sampling noise) held fixed.
pub trait Objective: Sync {
    fn loss(&self, net: &Network) -> Result<f64>;

    fn loss_and_grad(&self, net: &Network) -> Result<(f64, Gradients)>;
}
