use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Action;
use crate::error::{Error, Result};

/// One stored interaction. `log_prob`, `advantage` and `ret` are filled by
/// on-policy agents and left at zero otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub episode: u64,
    #[serde(default)]
    pub log_prob: f64,
    #[serde(default)]
    pub advantage: f64,
    #[serde(default)]
    pub ret: f64,
}

impl Transition {
    pub fn new(state: Vec<f64>, action: Action, reward: f64, next_state: Vec<f64>, done: bool, episode: u64) -> Self {
        Transition { state, action, reward, next_state, done, episode, log_prob: 0.0, advantage: 0.0, ret: 0.0 }
    }
}

/// Bounded FIFO of transitions; the oldest entry is evicted first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer { items: VecDeque::with_capacity(capacity.min(1 << 16)), capacity }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Transition>) {
        for t in ts {
            self.push(t);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// The most recent `min(size, len)` transitions, oldest first.
    pub fn deterministic_sample(&self, size: usize) -> Result<Vec<Transition>> {
        if self.items.is_empty() {
            return Err(Error::Precondition("deterministic_sample on an empty buffer".into()));
        }
        let take = size.min(self.items.len());
        Ok(self.items.iter().skip(self.items.len() - take).cloned().collect())
    }

    /// Uniform sample without replacement.
    pub fn sample<R: Rng>(&self, size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if self.items.is_empty() {
            return Err(Error::Precondition("sample on an empty buffer".into()));
        }
        let take = size.min(self.items.len());
        let mut idx = sample(rng, self.items.len(), take).into_vec();
        idx.sort_unstable();
        Ok(idx.into_iter().map(|i| self.items[i].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(i: u64) -> Transition {
        Transition::new(vec![i as f64], Action::Discrete(0), 0.0, vec![0.0], false, i)
    }

    #[test]
    fn most_recent_items_in_order() {
        let mut b = ReplayBuffer::new(100);
        b.extend((1..=10).map(t));
        let s = b.deterministic_sample(4).unwrap();
        assert_eq!(s.iter().map(|x| x.episode).collect::<Vec<_>>(), vec![7, 8, 9, 10]);
        let all = b.deterministic_sample(50).unwrap();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0].episode, 1);
        assert_eq!(b.deterministic_sample(4).unwrap(), s);
    }

    #[test]
    fn eviction_is_fifo() {
        let mut b = ReplayBuffer::new(3);
        b.extend((1..=5).map(t));
        assert_eq!(b.len(), 3);
        assert_eq!(b.iter().map(|x| x.episode).collect::<Vec<_>>(), vec![3, 4, 5]);
    }

    #[test]
    fn empty_buffer_errors() {
        let b = ReplayBuffer::new(3);
        assert!(b.deterministic_sample(1).is_err());
    }

    proptest! {
        #[test]
        fn sample_is_pure_and_ordered(n in 1u64..200, cap in 1usize..150, size in 1usize..300) {
            let mut b = ReplayBuffer::new(cap);
            b.extend((0..n).map(t));
            let a = b.deterministic_sample(size).unwrap();
            prop_assert_eq!(&a, &b.deterministic_sample(size).unwrap());
            prop_assert_eq!(a.len(), size.min(b.len()));
            prop_assert!(a.windows(2).all(|w| w[0].episode + 1 == w[1].episode));
            prop_assert_eq!(a.last().unwrap().episode, n - 1);
        }
    }
}
