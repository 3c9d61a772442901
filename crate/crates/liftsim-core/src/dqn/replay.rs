//! Bounded FIFO replay memory with seeded uniform sampling.

use std::collections::VecDeque;

use rand::Rng;

use super::Transition;

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    buffer: VecDeque<Transition>,
    capacity: usize,
    pushes: u64,
    evictions: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            pushes: 0,
            evictions: 0,
        }
    }

    /// Append a transition, evicting the oldest when full.
    pub fn push(&mut self, transition: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
            self.evictions += 1;
        }
        self.buffer.push_back(transition);
        self.pushes += 1;
        debug_assert!(self.buffer.len() <= self.capacity);
        debug_assert_eq!(self.evictions, self.pushes.saturating_sub(self.capacity as u64));
    }

    /// Sample up to `count` distinct transitions uniformly.
    pub fn sample(&self, count: usize, rng: &mut impl Rng) -> Vec<&Transition> {
        let take = count.min(self.buffer.len());
        if take == 0 {
            return Vec::new();
        }
        rand::seq::index::sample(rng, self.buffer.len(), take)
            .into_iter()
            .map(|i| &self.buffer[i])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions over the memory's lifetime.
    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    /// Oldest-first drops forced by the capacity bound.
    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }
}
