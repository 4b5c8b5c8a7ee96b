//! Conversions from transition batches to network inputs.

use super::Transition;
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub fn state_matrix(batch: &[Transition]) -> Result<Matrix> {
    Matrix::from_rows(batch.iter().map(|t| t.state.as_slice()))
}

pub fn next_state_matrix(batch: &[Transition]) -> Result<Matrix> {
    Matrix::from_rows(batch.iter().map(|t| t.next_state.as_slice()))
}

pub fn discrete_actions(batch: &[Transition], n_actions: usize) -> Result<Vec<usize>> {
    batch
        .iter()
        .map(|t| match t.action {
            Action::Discrete(a) if a < n_actions => Ok(a),
            Action::Discrete(a) => Err(Error::Precondition(format!("action {a} out of range 0..{n_actions}"))),
            Action::Continuous(_) => Err(Error::Unsupported(
                "continuous action in a batch for a discrete-action agent".into(),
            )),
        })
        .collect()
}

pub fn continuous_actions(batch: &[Transition], dim: usize) -> Result<Matrix> {
    let rows = batch
        .iter()
        .map(|t| match &t.action {
            Action::Continuous(a) if a.len() == dim => Ok(a.as_slice()),
            Action::Continuous(a) => Err(Error::DimensionMismatch { expected: dim, got: a.len() }),
            Action::Discrete(_) => Err(Error::Unsupported(
                "discrete action in a batch for a continuous-action agent".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(rows)
}
