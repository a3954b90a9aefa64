//! Fixed-capacity transition store with uniform random mini-batch sampling.

use rand::Rng;
use thiserror::Error;

use crate::env::{Action, Observation};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("insufficient data: have {have} transitions, need {need}")]
    InsufficientData { have: usize, need: usize },
}

/// One environment step. `next_state` is kept even for terminal transitions;
/// its Q contribution is masked in the target computation, not here.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

/// FIFO ring buffer; once full, each push evicts the oldest transition.
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    write_index: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            storage: Vec::with_capacity(capacity),
            write_index: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_index] = t;
        }
        self.write_index = (self.write_index + 1) % self.capacity;
    }

    /// Uniform sample with replacement; same seed, same sample.
    pub fn sample(
        &self,
        batch_size: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<Transition>, ReplayError> {
        if self.storage.len() < batch_size {
            return Err(ReplayError::InsufficientData {
                have: self.storage.len(),
                need: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| self.storage[rng.gen_range(0..self.storage.len())].clone())
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}
