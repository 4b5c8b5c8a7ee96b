use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A list of flat parameter-shaped arrays, one per weight matrix or bias vector,
/// in network order (w0, b0, w1, b1, ...).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Blocks(pub Vec<Vec<f64>>);

/// Gradient of a scalar loss with respect to every parameter block.
pub type Gradients = Blocks;

impl Blocks {
    pub fn zeros_like(other: &Blocks) -> Self {
        Blocks(other.0.iter().map(|b| vec![0.0; b.len()]).collect())
    }

    pub fn from_shapes(lens: &[usize]) -> Self {
        Blocks(lens.iter().map(|&n| vec![0.0; n]).collect())
    }

    pub fn lens(&self) -> Vec<usize> {
        self.0.iter().map(Vec::len).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.0.len()
    }

    pub fn num_params(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    pub fn check_congruent(&self, other: &Blocks) -> Result<()> {
        if self.lens() != other.lens() {
            return Err(Error::ShapeMismatch(format!(
                "block lengths {:?} vs {:?}",
                self.lens(),
                other.lens()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Blocks) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, other: &Blocks, c: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.0.iter_mut().flatten() {
            *v *= c;
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    /// Inverse of [`Blocks::flatten`] using `self` for the shapes.
    pub fn unflatten_like(&self, flat: &[f64]) -> Result<Blocks> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), got: flat.len() });
        }
        let mut out = Vec::with_capacity(self.0.len());
        let mut off = 0;
        for b in &self.0 {
            out.push(flat[off..off + b.len()].to_vec());
            off += b.len();
        }
        Ok(Blocks(out))
    }
}
