use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;

use crate::mdp::{Action, StreamRng, Trajectory};

/// A trajectory kept for replay, with cached state features and the prefix
/// log-weights computed when it was inserted.
#[derive(Clone, Debug)]
pub struct StoredTrajectory<S> {
    pub traj: Trajectory<S>,
    /// One row per state `s_0 … s_T`.
    pub features: Array2<f64>,
    /// Entry `j` is the log-weight of the first `j` actions at insertion time.
    pub frozen_prefix: Vec<f64>,
}

/// Step `step` of a stored trajectory: `(s_step, a_{step+1}, s_{step+1})`.
#[derive(Debug)]
pub struct Transition<S> {
    pub source: Arc<StoredTrajectory<S>>,
    pub step: usize,
}

impl<S> Clone for Transition<S> {
    fn clone(&self) -> Self {
        Self { source: Arc::clone(&self.source), step: self.step }
    }
}

impl<S> Transition<S> {
    pub fn state(&self) -> &S {
        &self.source.traj.states[self.step]
    }

    pub fn next_state(&self) -> &S {
        &self.source.traj.states[self.step + 1]
    }

    pub fn action(&self) -> &Action {
        &self.source.traj.actions[self.step]
    }

    pub fn is_terminal(&self) -> bool {
        self.step + 1 == self.source.traj.steps()
    }

    /// Return of the episode; only meaningful at terminal transitions.
    pub fn ret(&self) -> f64 {
        self.source.traj.ret
    }
}

/// First-in-first-out transition store.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<S> {
    items: VecDeque<Transition<S>>,
    capacity: usize,
}

impl<S> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: VecDeque::with_capacity(capacity.min(1 << 20)), capacity }
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

    /// Appends every transition of `stored`, evicting the oldest beyond capacity.
    pub fn push(&mut self, stored: Arc<StoredTrajectory<S>>) {
        for step in 0..stored.traj.steps() {
            self.items.push_back(Transition { source: Arc::clone(&stored), step });
            if self.items.len() > self.capacity {
                self.items.pop_front();
            }
        }
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> Vec<Transition<S>> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| self.items[rng.random_range(0..self.items.len())].clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<S>> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::stream_rng;

    fn stored(steps: usize, tag: f64) -> Arc<StoredTrajectory<f64>> {
        Arc::new(StoredTrajectory {
            traj: Trajectory {
                states: (0..=steps).map(|i| tag + i as f64).collect(),
                actions: vec![Action::Discrete(0); steps],
                nominal_logps: vec![0.0; steps],
                proposal_logps: vec![0.0; steps],
                proposal_index: 0,
                ret: tag,
            },
            features: Array2::zeros((steps + 1, 1)),
            frozen_prefix: vec![0.0; steps + 1],
        })
    }

    #[test]
    fn fifo_eviction_respects_capacity() {
        let mut b = ReplayBuffer::new(5);
        b.push(stored(3, 100.0));
        b.push(stored(3, 200.0));
        assert_eq!(b.len(), 5);
        let first = b.iter().next().unwrap();
        assert_eq!(*first.state(), 101.0);
        assert_eq!(first.step, 1);
    }

    #[test]
    fn terminal_flag_on_last_step() {
        let mut b = ReplayBuffer::new(10);
        b.push(stored(3, 0.0));
        let flags: Vec<bool> = b.iter().map(Transition::is_terminal).collect();
        assert_eq!(flags, [false, false, true]);
        let last = b.iter().last().unwrap();
        assert_eq!(*last.next_state(), 3.0);
    }

    #[test]
    fn sampling_is_seeded() {
        let mut b = ReplayBuffer::new(100);
        for k in 0..10 {
            b.push(stored(4, k as f64 * 10.0));
        }
        let a: Vec<f64> = b.sample(50, &mut stream_rng(3, 0)).iter().map(|t| *t.state()).collect();
        let c: Vec<f64> = b.sample(50, &mut stream_rng(3, 0)).iter().map(|t| *t.state()).collect();
        assert_eq!(a, c);
        assert!(b.sample(3, &mut stream_rng(0, 0)).len() == 3);
        assert!(ReplayBuffer::<f64>::new(3).sample(3, &mut stream_rng(0, 0)).is_empty());
    }
}
