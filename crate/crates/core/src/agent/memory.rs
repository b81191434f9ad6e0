use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Bounded history kept in sorted order for percentile lookups. When full,
/// the oldest inserted value is evicted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PercentileMemory {
    capacity: usize,
    sorted: Vec<f64>,
    arrivals: VecDeque<f64>,
}

impl PercentileMemory {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self { capacity, sorted: Vec::with_capacity(capacity), arrivals: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Inserts `value`; non-finite values are ignored.
    pub fn push(&mut self, value: f64) {
        if !value.is_finite() {
            return;
        }
        if self.arrivals.len() == self.capacity {
            if let Some(old) = self.arrivals.pop_front() {
                let idx = self.sorted.partition_point(|x| *x < old);
                self.sorted.remove(idx);
            }
        }
        let idx = self.sorted.partition_point(|x| *x <= value);
        self.sorted.insert(idx, value);
        self.arrivals.push_back(value);
    }

    /// Mid-rank percentile of `value` against the stored values; 0.5 when empty.
    pub fn rank(&self, value: f64) -> f64 {
        percentile_rank(self, value)
    }

    /// Inserts `value` and returns its percentile among the stored values.
    pub fn push_rank(&mut self, value: f64) -> f64 {
        self.push(value);
        self.rank(value)
    }
}

/// Fraction of stored values strictly below `value` plus half the fraction
/// equal to it. An empty memory ranks everything at 0.5.
pub fn percentile_rank(memory: &PercentileMemory, value: f64) -> f64 {
    let n = memory.sorted.len();
    if n == 0 {
        return 0.5;
    }
    let below = memory.sorted.partition_point(|x| *x < value);
    let up_to = memory.sorted.partition_point(|x| *x <= value);
    (below as f64 + 0.5 * (up_to - below) as f64) / n as f64
}
