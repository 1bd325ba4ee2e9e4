//! Uniform ring-buffer experience replay.

use super::ACTION_DIM;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One stored step. The post-squash action is kept together with the
/// pre-squash Gaussian draw so densities can be recomputed exactly.
/// `done` marks environment death (reach or collision); truncation by the
/// step limit stores `false` so bootstrapping continues.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub pre_squash: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer with uniform sampling over current contents.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    head: usize,
    insertions: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self {
            data: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            head: 0,
            insertions: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    pub fn push(&mut self, t: Transition) {
        debug_assert!(t.obs.iter().all(|v| v.is_finite()));
        debug_assert!(t.reward.is_finite());
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.head] = t;
        }
        self.head = (self.head + 1) % self.capacity;
        self.insertions += 1;
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.data[idx]
    }

    /// Draw `batch` indices uniformly (with replacement) over the current
    /// contents.
    pub fn sample_indices(&self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        assert!(!self.is_empty(), "cannot sample from an empty buffer");
        (0..batch).map(|_| rng.gen_range(0..self.data.len())).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }
}
