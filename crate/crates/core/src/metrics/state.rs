use std::collections::VecDeque;

use super::multiset::Multiset;
use super::MetricsError;
use crate::event::RequestRecord;

pub const DEFAULT_HISTORY_CAPACITY: usize = 100_000;
pub const DEFAULT_MAINTAINED_PERCENTILE: f64 = 99.0;

/// 1-based nearest rank of percentile `p` among `n` samples: `ceil(p/100 * n)`,
/// clamped to `1..=n` for `n > 0`.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let x = p / 100.0 * n as f64;
    // p/100 is rarely exact in binary; absorb that rounding before ceil so
    // 99.9% of 1000 is rank 999 and not 1000.
    let rank = (x - x.abs().max(1.0) * 1e-12).ceil();
    (rank.max(1.0) as usize).min(n)
}

fn check_percentile(p: f64) -> Result<(), MetricsError> {
    if p.is_finite() && p > 0.0 && p <= 100.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidPercentile(p))
    }
}

/// Sliding window over the most recent request records of one process.
///
/// Keeps the last `capacity` `(start_ts, latency)` pairs, their exact integer
/// latency sum, and the window's latencies split into two multisets: `low`
/// holds the `nearest_rank(maintained_p, n)` smallest and `high` the rest, so
/// the maintained percentile is `max(low)`.
#[derive(Clone, Debug)]
pub struct MetricsState {
    history: VecDeque<(u64, u64)>,
    capacity: usize,
    running_sum: u128,
    low: Multiset,
    high: Multiset,
    maintained_p: f64,
}

impl Default for MetricsState {
    fn default() -> Self {
        Self::new(DEFAULT_HISTORY_CAPACITY, DEFAULT_MAINTAINED_PERCENTILE).unwrap()
    }
}

impl MetricsState {
    pub fn new(capacity: usize, maintained_p: f64) -> Result<Self, MetricsError> {
        if capacity == 0 {
            return Err(MetricsError::InvalidCapacity(capacity));
        }
        check_percentile(maintained_p)?;
        Ok(MetricsState {
            history: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
            running_sum: 0,
            low: Multiset::default(),
            high: Multiset::default(),
            maintained_p,
        })
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn maintained_percentile(&self) -> f64 {
        self.maintained_p
    }

    pub fn running_sum(&self) -> u128 {
        self.running_sum
    }

    /// `(start_ts, latency)` pairs, oldest first.
    pub fn history(&self) -> impl ExactSizeIterator<Item = (u64, u64)> + '_ {
        self.history.iter().copied()
    }

    pub fn absorb(&mut self, record: &RequestRecord) {
        if self.history.len() == self.capacity {
            self.evict_oldest();
        }
        let latency = record.latency;
        self.history.push_back((record.start_ts, latency));
        self.running_sum += u128::from(latency);
        match self.low.max() {
            Some(top) if latency <= top => self.low.insert(latency),
            _ => self.high.insert(latency),
        }
        self.rebalance();
    }

    fn evict_oldest(&mut self) {
        let Some((_, old)) = self.history.pop_front() else { return };
        self.running_sum -= u128::from(old);
        // Any copy of an equal value is interchangeable, so either side will do.
        let in_low = self.low.max().is_some_and(|top| old <= top) && self.low.remove(old);
        if !in_low {
            let removed = self.high.remove(old);
            debug_assert!(removed, "evicted latency {old} missing from both multisets");
        }
    }

    fn rebalance(&mut self) {
        let target = nearest_rank(self.maintained_p, self.history.len());
        while self.low.len() > target {
            let v = self.low.pop_max().unwrap();
            self.high.insert(v);
        }
        while self.low.len() < target {
            let v = self.high.pop_min().unwrap();
            self.low.insert(v);
        }
    }

    /// Shrink or grow the window. Shrinking evicts the oldest entries.
    pub fn set_capacity(&mut self, capacity: usize) -> Result<(), MetricsError> {
        if capacity == 0 {
            return Err(MetricsError::InvalidCapacity(capacity));
        }
        self.capacity = capacity;
        while self.history.len() > capacity {
            self.evict_oldest();
        }
        self.rebalance();
        Ok(())
    }

    pub fn latest_latency(&self) -> Result<u64, MetricsError> {
        self.history.back().map(|(_, l)| *l).ok_or(MetricsError::NoData)
    }

    pub fn average_latency(&self) -> Result<f64, MetricsError> {
        if self.history.is_empty() {
            return Err(MetricsError::NoData);
        }
        Ok(self.running_sum as f64 / self.history.len() as f64)
    }

    /// Requests per second: window size divided by the start-time span
    /// between the oldest and newest entries.
    pub fn rps(&self) -> Result<f64, MetricsError> {
        let (Some(oldest), Some(newest)) = (self.history.front(), self.history.back()) else {
            return Err(MetricsError::NoData);
        };
        if newest.0 <= oldest.0 {
            return Err(MetricsError::UndefinedRate);
        }
        let span_s = (newest.0 - oldest.0) as f64 / 1e9;
        Ok(self.history.len() as f64 / span_s)
    }

    /// Nearest-rank percentile. The maintained percentile is read off the
    /// multisets; any other `p` scans the window.
    pub fn percentile(&self, p: f64) -> Result<u64, MetricsError> {
        check_percentile(p)?;
        if self.history.is_empty() {
            return Err(MetricsError::NoData);
        }
        if p == self.maintained_p {
            return Ok(self.low.max().expect("low set is non-empty when n >= 1"));
        }
        Ok(self.scan_percentile(p))
    }

    pub fn scan_percentile(&self, p: f64) -> u64 {
        let mut values: Vec<u64> = self.history.iter().map(|(_, l)| *l).collect();
        let k = nearest_rank(p, values.len());
        *values.select_nth_unstable(k - 1).1
    }

    /// Multiset sizes `(low, high)`.
    pub fn split_sizes(&self) -> (usize, usize) {
        (self.low.len(), self.high.len())
    }

    /// Verify the structural invariants; used by tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.history.len();
        if self.low.len() + self.high.len() != n {
            return Err(format!("{} + {} != {n}", self.low.len(), self.high.len()));
        }
        if self.low.len() != nearest_rank(self.maintained_p, n) {
            return Err(format!("low set has {} entries, want rank {}", self.low.len(), nearest_rank(self.maintained_p, n)));
        }
        if let (Some(a), Some(b)) = (self.low.max(), self.high.min()) {
            if a > b {
                return Err(format!("max(low) {a} > min(high) {b}"));
            }
        }
        let sum: u128 = self.history.iter().map(|(_, l)| u128::from(*l)).sum();
        if sum != self.running_sum {
            return Err(format!("running sum {} != {sum}", self.running_sum));
        }
        let mut window: Vec<u64> = self.history.iter().map(|(_, l)| *l).collect();
        window.sort_unstable();
        let merged: Vec<u64> = self.low.iter().chain(self.high.iter()).collect();
        if merged != window {
            return Err("multiset contents differ from the window".into());
        }
        Ok(())
    }
}
