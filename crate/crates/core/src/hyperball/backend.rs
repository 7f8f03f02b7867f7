// SPDX-License-Identifier: Apache-2.0

//! Counter backends the ball engine can run on.

use crate::graph::NodeWeights;
use crate::hll::{HashedItem, HyperLogLog};

/// What the engine needs from a family of set counters. Every counter
/// occupies the same number of `u64` words, so an array of counters is a
/// flat word vector that can be split into disjoint per-node chunks.
pub trait CounterLogic: Sync {
    fn words_per_counter(&self) -> usize;

    /// Words of per-worker scratch space passed to [`merge`](Self::merge).
    fn scratch_words(&self) -> usize {
        0
    }

    /// Feeds replica `replica` of `node` to `counter`.
    fn add(&self, counter: &mut [u64], node: usize, replica: u64) -> bool;

    /// Stores the union of `target` and `source` in `target`; returns
    /// whether `target` changed.
    fn merge(&self, target: &mut [u64], source: &[u64], scratch: &mut [u64]) -> bool;

    fn estimate(&self, counter: &[u64]) -> f64;
}

impl CounterLogic for HyperLogLog {
    fn words_per_counter(&self) -> usize {
        HyperLogLog::words_per_counter(self)
    }

    fn scratch_words(&self) -> usize {
        HyperLogLog::scratch_words(self)
    }

    fn add(&self, counter: &mut [u64], node: usize, replica: u64) -> bool {
        let item = HashedItem::new(node as u64, replica, self.params().seed());
        HyperLogLog::add(self, counter, item)
    }

    fn merge(&self, target: &mut [u64], source: &[u64], scratch: &mut [u64]) -> bool {
        HyperLogLog::merge(self, target, source, scratch)
    }

    fn estimate(&self, counter: &[u64]) -> f64 {
        HyperLogLog::estimate(self, counter)
    }
}

/// Exact sets stored as bitsets over all replicas. Turns the engine into an
/// exact breadth-first computation; meant for validation on small graphs.
#[derive(Debug, Clone)]
pub struct ExactCounters {
    /// First replica id of each node, plus the total.
    first_replica: Vec<u64>,
    words_per_counter: usize,
}

impl ExactCounters {
    /// One item per node.
    pub fn new(n: usize) -> Self {
        Self::from_first_replica((0..=n as u64).collect())
    }

    /// `w(v)` items per node.
    pub fn weighted(weights: &NodeWeights) -> Self {
        let mut first = Vec::with_capacity(weights.len() + 1);
        let mut acc = 0u64;
        first.push(0);
        for &w in weights.as_slice() {
            acc += w;
            first.push(acc);
        }
        Self::from_first_replica(first)
    }

    fn from_first_replica(first_replica: Vec<u64>) -> Self {
        let universe = *first_replica.last().unwrap() as usize;
        Self {
            first_replica,
            words_per_counter: universe.div_ceil(64).max(1),
        }
    }

    /// The items of a counter, as replica ids.
    pub fn members(&self, counter: &[u64]) -> Vec<u64> {
        let mut out = Vec::new();
        for (i, &word) in counter.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                out.push(64 * i as u64 + w.trailing_zeros() as u64);
                w &= w - 1;
            }
        }
        out
    }
}

impl CounterLogic for ExactCounters {
    fn words_per_counter(&self) -> usize {
        self.words_per_counter
    }

    fn add(&self, counter: &mut [u64], node: usize, replica: u64) -> bool {
        let id = self.first_replica[node] + replica;
        assert!(id < self.first_replica[node + 1], "replica out of range");
        let (word, bit) = ((id / 64) as usize, id % 64);
        let before = counter[word];
        counter[word] |= 1 << bit;
        counter[word] != before
    }

    fn merge(&self, target: &mut [u64], source: &[u64], _scratch: &mut [u64]) -> bool {
        let mut changed = false;
        for (t, &s) in target.iter_mut().zip(source) {
            let merged = *t | s;
            changed |= merged != *t;
            *t = merged;
        }
        changed
    }

    fn estimate(&self, counter: &[u64]) -> f64 {
        counter.iter().map(|w| w.count_ones() as u64).sum::<u64>() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_counters_count_replicas() {
        let weights = NodeWeights::new(vec![3, 1, 70]).unwrap();
        let logic = ExactCounters::weighted(&weights);
        assert_eq!(logic.words_per_counter(), 2);
        let mut c = vec![0; 2];
        for r in 0..70 {
            assert!(logic.add(&mut c, 2, r));
        }
        assert!(!logic.add(&mut c, 2, 0));
        assert_eq!(logic.estimate(&c), 70.0);
        let mut d = vec![0; 2];
        logic.add(&mut d, 0, 2);
        assert!(logic.merge(&mut d, &c, &mut []));
        assert_eq!(logic.estimate(&d), 71.0);
        assert!(!logic.merge(&mut d, &c, &mut []));
        assert_eq!(logic.members(&d)[0], 2);
    }
}
