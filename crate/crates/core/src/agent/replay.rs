//! Fixed-capacity transition store with uniform sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [f64; 2],
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Ring-structured replay buffer; at capacity the oldest entry is
/// overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            entries: Vec::new(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() < self.capacity {
            self.entries.push(t);
        } else {
            self.entries[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    /// Uniform sample with replacement.
    pub fn sample_indices(&self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        if self.entries.len() < batch {
            return Err(Error::contract(format!(
                "replay holds {} transitions, batch needs {batch}",
                self.entries.len()
            )));
        }
        Ok((0..batch).map(|_| rng.gen_range(0..self.entries.len())).collect())
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.entries[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn t(v: f64) -> Transition {
        Transition {
            obs: vec![v],
            action: [0.0, 0.0],
            reward: v,
            next_obs: vec![v],
            done: false,
        }
    }

    #[test]
    fn capacity_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..4 {
            b.push(t(i as f64));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = (0..3).map(|i| b.get(i).reward).collect();
        assert!(rewards.contains(&3.0));
        assert!(!rewards.contains(&0.0));
    }

    #[test]
    fn sampling_needs_enough_entries() {
        let mut b = ReplayBuffer::new(10);
        b.push(t(1.0));
        let mut rng = stream(0, &["replay"]);
        assert!(b.sample_indices(2, &mut rng).is_err());
        b.push(t(2.0));
        assert!(b.sample_indices(2, &mut rng).is_ok());
    }

    #[test]
    fn sampling_is_close_to_uniform() {
        // Chi-square goodness of fit over 100 cells at 1e5 draws; the 99th
        // percentile of chi2 with 99 degrees of freedom is ~134.6.
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(t(i as f64));
        }
        let mut rng = stream(4, &["replay-chi2"]);
        let mut counts = [0u32; 100];
        let draws = 100_000;
        for idx in b.sample_indices(draws, &mut rng).unwrap() {
            counts[idx] += 1;
        }
        let expected = draws as f64 / 100.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 134.6, "chi-square statistic {chi2}");
    }
}
