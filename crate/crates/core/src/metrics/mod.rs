//! Application-level metrics over a per-process sliding window.
//!
//! [`MetricsEngine`] is the library surface a resource manager polls:
//! `start_tracing` / `stop_tracing` plus the four queries (throughput, latest
//! latency, average latency, percentile latency). Records arrive through a
//! per-process [`ring`](crate::ring) and are folded into a [`MetricsState`]
//! by [`MetricsEngine::poll_loop_step`].
//!
//! The producer side of each ring is a [`Tracer`], which owns the request
//! matcher for that process.

mod multiset;
mod state;

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

pub use multiset::Multiset;
pub use state::{nearest_rank, MetricsState, DEFAULT_HISTORY_CAPACITY, DEFAULT_MAINTAINED_PERCENTILE};

use crate::disambiguator::{Disambiguator, DisambiguatorConfig, MatchCounters, MatchStats, ProtocolPattern};
use crate::event::{RequestRecord, TraceEvent, WireError};
use crate::ring::{record_ring, RingConsumer, RingError, RingProducer, DEFAULT_RING_BYTES};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no requests recorded yet")]
    NoData,
    #[error("request rate undefined: oldest and newest entries share a start time")]
    UndefinedRate,
    #[error("percentile must be in (0, 100], got {0}")]
    InvalidPercentile(f64),
    #[error("history capacity must be positive, got {0}")]
    InvalidCapacity(usize),
    #[error("pid {0} is already traced")]
    DuplicateTarget(u32),
    #[error("pid {0} is not traced")]
    NotTraced(u32),
    #[error("capture backend unavailable: {0}")]
    Capability(String),
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// Where a target's events come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Source {
    /// The caller feeds events (replay, simulation, an external collector)
    /// through the returned [`Tracer`].
    #[default]
    Feed,
    /// In-kernel capture. Not part of this crate; requesting it fails with
    /// [`MetricsError::Capability`].
    Live,
}

#[derive(Clone, Debug)]
pub struct TracingOptions {
    pub source: Source,
    pub matcher: DisambiguatorConfig,
    pub history_capacity: usize,
    pub maintained_percentile: f64,
    /// Overrides the engine-wide ring size for this target.
    pub ring_bytes: Option<usize>,
}

impl Default for TracingOptions {
    fn default() -> Self {
        TracingOptions {
            source: Source::Feed,
            matcher: DisambiguatorConfig::default(),
            history_capacity: DEFAULT_HISTORY_CAPACITY,
            maintained_percentile: DEFAULT_MAINTAINED_PERCENTILE,
            ring_bytes: None,
        }
    }
}

struct Target {
    state: Mutex<MetricsState>,
    consumer: Mutex<RingConsumer>,
    counters: Arc<MatchCounters>,
    active: Arc<AtomicBool>,
}

/// Producer side of one traced process: matches events into records and
/// pushes them onto the target's ring.
pub struct Tracer {
    pid: u32,
    matcher: Disambiguator,
    producer: RingProducer,
    scratch: Vec<RequestRecord>,
    attached: Arc<AtomicBool>,
}

impl Tracer {
    pub fn pid(&self) -> u32 {
        self.pid
    }

    /// False once the engine has stopped tracing this pid.
    pub fn is_attached(&self) -> bool {
        self.attached.load(Ordering::Acquire)
    }

    /// Match one event. Events of other processes, and everything after the
    /// engine stopped tracing, are ignored. Returns how many records were pushed.
    pub fn feed(&mut self, ev: TraceEvent) -> usize {
        if ev.pid != self.pid || !self.is_attached() {
            return 0;
        }
        self.matcher.ingest_into(ev, &mut self.scratch);
        self.push_scratch()
    }

    /// Push a record produced elsewhere, e.g. by an in-kernel matcher.
    pub fn push_record(&mut self, record: &RequestRecord) -> bool {
        self.producer.push(record)
    }

    /// Push a raw 24-byte record as the capture backend emits it.
    pub fn push_wire(&mut self, bytes: &[u8]) -> Result<bool, WireError> {
        self.producer.push_wire(bytes)
    }

    /// End of stream: release every buffered event.
    pub fn finish(&mut self) -> usize {
        self.matcher.flush_into(&mut self.scratch);
        self.push_scratch()
    }

    /// Like [`finish`](Self::finish), but calls `make_room` whenever the
    /// ring is full so the flushed backlog is not dropped. `make_room`
    /// typically polls the engine.
    pub fn finish_with<F: FnMut()>(&mut self, mut make_room: F) -> usize {
        self.matcher.flush_into(&mut self.scratch);
        let mut pushed = 0;
        for r in std::mem::take(&mut self.scratch) {
            if self.producer.len() >= self.producer.capacity_slots() {
                make_room();
            }
            if self.producer.push(&r) {
                pushed += 1;
            }
        }
        pushed
    }

    fn push_scratch(&mut self) -> usize {
        let mut pushed = 0;
        for r in self.scratch.drain(..) {
            if self.producer.push(&r) {
                pushed += 1;
            }
        }
        pushed
    }

    pub fn stats(&self) -> MatchStats {
        self.matcher.stats()
    }

    pub fn pattern(&self) -> Option<ProtocolPattern> {
        self.matcher.pattern_for(self.pid)
    }

    pub fn ring_len(&self) -> usize {
        self.producer.len()
    }

    pub fn ring_dropped(&self) -> u64 {
        self.producer.dropped()
    }
}

/// Registry of traced processes and their metrics.
///
/// All methods take `&self`; queries and absorption for one pid are
/// serialized by that pid's lock, and different pids never contend beyond
/// the registry lookup.
pub struct MetricsEngine {
    targets: RwLock<HashMap<u32, Arc<Target>>>,
    ring_bytes: AtomicUsize,
}

impl Default for MetricsEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl MetricsEngine {
    pub fn new() -> Self {
        MetricsEngine {
            targets: RwLock::new(HashMap::new()),
            ring_bytes: AtomicUsize::new(DEFAULT_RING_BYTES),
        }
    }

    /// Trace `pid` with default options: automatic pattern selection, 100k
    /// history, maintained p99.
    pub fn start_tracing(&self, pid: u32) -> Result<Tracer, MetricsError> {
        self.start_tracing_with(pid, TracingOptions::default())
    }

    pub fn start_tracing_with(&self, pid: u32, opts: TracingOptions) -> Result<Tracer, MetricsError> {
        if opts.source == Source::Live {
            return Err(MetricsError::Capability(crate::live::unavailable_reason().into()));
        }
        let state = MetricsState::new(opts.history_capacity, opts.maintained_percentile)?;
        let bytes = opts.ring_bytes.unwrap_or_else(|| self.ring_bytes.load(Ordering::Relaxed));

        let mut targets = self.targets.write().unwrap();
        if targets.contains_key(&pid) {
            return Err(MetricsError::DuplicateTarget(pid));
        }
        let (producer, consumer) = record_ring(bytes)?;
        let matcher = Disambiguator::new(opts.matcher);
        let attached = Arc::new(AtomicBool::new(true));
        targets.insert(
            pid,
            Arc::new(Target {
                state: Mutex::new(state),
                consumer: Mutex::new(consumer),
                counters: matcher.counters(),
                active: Arc::clone(&attached),
            }),
        );
        log::debug!("tracing pid {pid} with a {bytes}-byte ring");
        Ok(Tracer {
            pid,
            matcher,
            producer,
            scratch: Vec::new(),
            attached,
        })
    }

    /// Stop tracing `pid`, drain its ring, and hand back the final state.
    pub fn stop_tracing(&self, pid: u32) -> Result<MetricsState, MetricsError> {
        let target = self
            .targets
            .write()
            .unwrap()
            .remove(&pid)
            .ok_or(MetricsError::NotTraced(pid))?;
        target.active.store(false, Ordering::Release);
        drain(&target, usize::MAX);
        let state = target.state.lock().unwrap().clone();
        Ok(state)
    }

    pub fn is_traced(&self, pid: u32) -> bool {
        self.targets.read().unwrap().contains_key(&pid)
    }

    pub fn traced_pids(&self) -> Vec<u32> {
        let mut pids: Vec<u32> = self.targets.read().unwrap().keys().copied().collect();
        pids.sort_unstable();
        pids
    }

    fn target(&self, pid: u32) -> Result<Arc<Target>, MetricsError> {
        self.targets
            .read()
            .unwrap()
            .get(&pid)
            .cloned()
            .ok_or(MetricsError::NotTraced(pid))
    }

    fn with_state<T>(&self, pid: u32, f: impl FnOnce(&MetricsState) -> T) -> Result<T, MetricsError> {
        let target = self.target(pid)?;
        let state = target.state.lock().unwrap();
        Ok(f(&state))
    }

    /// Absorb whatever is waiting in `pid`'s ring. Returns the count.
    pub fn poll_loop_step(&self, pid: u32) -> Result<usize, MetricsError> {
        let target = self.target(pid)?;
        Ok(drain(&target, usize::MAX))
    }

    /// Like [`poll_loop_step`](Self::poll_loop_step) but takes at most `max` records.
    pub fn poll_batch(&self, pid: u32, max: usize) -> Result<usize, MetricsError> {
        let target = self.target(pid)?;
        Ok(drain(&target, max))
    }

    pub fn get_rps(&self, pid: u32) -> Result<f64, MetricsError> {
        self.with_state(pid, MetricsState::rps)?
    }

    pub fn get_latest_latency(&self, pid: u32) -> Result<u64, MetricsError> {
        self.with_state(pid, MetricsState::latest_latency)?
    }

    pub fn get_average_latency(&self, pid: u32) -> Result<f64, MetricsError> {
        self.with_state(pid, MetricsState::average_latency)?
    }

    pub fn get_latency_percentile(&self, pid: u32, p: f64) -> Result<u64, MetricsError> {
        self.with_state(pid, |s| s.percentile(p))?
    }

    pub fn get_match_stats(&self, pid: u32) -> Result<MatchStats, MetricsError> {
        Ok(self.target(pid)?.counters.snapshot())
    }

    pub fn ring_dropped(&self, pid: u32) -> Result<u64, MetricsError> {
        Ok(self.target(pid)?.consumer.lock().unwrap().dropped())
    }

    pub fn history_len(&self, pid: u32) -> Result<usize, MetricsError> {
        self.with_state(pid, MetricsState::len)
    }

    /// Copy of `pid`'s current state.
    pub fn snapshot(&self, pid: u32) -> Result<MetricsState, MetricsError> {
        self.with_state(pid, MetricsState::clone)
    }

    pub fn set_history_capacity(&self, pid: u32, capacity: usize) -> Result<(), MetricsError> {
        let target = self.target(pid)?;
        let mut state = target.state.lock().unwrap();
        state.set_capacity(capacity)
    }

    /// Ring size used by later `start_tracing` calls.
    pub fn set_ring_capacity(&self, bytes: usize) -> Result<(), MetricsError> {
        if bytes < crate::event::WIRE_RECORD_LEN {
            return Err(RingError::TooSmall(bytes).into());
        }
        self.ring_bytes.store(bytes, Ordering::Relaxed);
        Ok(())
    }

    pub fn ring_capacity(&self) -> usize {
        self.ring_bytes.load(Ordering::Relaxed)
    }
}

fn drain(target: &Target, max: usize) -> usize {
    let mut consumer = target.consumer.lock().unwrap();
    let mut batch = Vec::new();
    let limit = max.min(consumer.capacity_slots());
    let n = consumer.poll_into(limit, &mut batch);
    let mut state = target.state.lock().unwrap();
    for r in &batch {
        state.absorb(r);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::ProbeKind;

    #[test]
    fn start_twice_is_duplicate() {
        let engine = MetricsEngine::new();
        let _t = engine.start_tracing(42).unwrap();
        assert_eq!(engine.history_len(42).unwrap(), 0);
        assert_eq!(engine.start_tracing(42).err(), Some(MetricsError::DuplicateTarget(42)));
    }

    #[test]
    fn live_source_is_a_capability_error() {
        let engine = MetricsEngine::new();
        let opts = TracingOptions {
            source: Source::Live,
            ..Default::default()
        };
        assert!(matches!(engine.start_tracing_with(1, opts), Err(MetricsError::Capability(_))));
        assert!(!engine.is_traced(1));
    }

    #[test]
    fn three_records_through_the_ring() {
        let engine = MetricsEngine::new();
        let mut t = engine.start_tracing(42).unwrap();
        for i in 0..3 {
            assert!(t.push_record(&RequestRecord::new(i * 10, 5, 42)));
        }
        assert_eq!(engine.poll_loop_step(42).unwrap(), 3);
        assert_eq!(engine.history_len(42).unwrap(), 3);
        assert_eq!(engine.poll_loop_step(42).unwrap(), 0);
    }

    #[test]
    fn stop_drains_pending_records() {
        let engine = MetricsEngine::new();
        let mut t = engine.start_tracing(7).unwrap();
        for i in 0..5 {
            t.push_record(&RequestRecord::new(i, 1, 7));
        }
        let state = engine.stop_tracing(7).unwrap();
        assert_eq!(state.len(), 5);
        assert!(!t.is_attached());
        assert!(!engine.is_traced(7));
        assert_eq!(engine.stop_tracing(7).err(), Some(MetricsError::NotTraced(7)));
        // Restartable after stop.
        engine.start_tracing(7).unwrap();
    }

    #[test]
    fn stop_with_no_records() {
        let engine = MetricsEngine::new();
        let _t = engine.start_tracing(1).unwrap();
        assert_eq!(engine.stop_tracing(1).unwrap().len(), 0);
    }

    #[test]
    fn queries_on_unknown_pid() {
        let engine = MetricsEngine::new();
        assert_eq!(engine.get_rps(3), Err(MetricsError::NotTraced(3)));
        assert_eq!(engine.get_latest_latency(3), Err(MetricsError::NotTraced(3)));
        assert_eq!(engine.poll_loop_step(3), Err(MetricsError::NotTraced(3)));
    }

    #[test]
    fn api_answers() {
        let engine = MetricsEngine::new();
        let mut t = engine.start_tracing(9).unwrap();
        assert_eq!(engine.get_latest_latency(9), Err(MetricsError::NoData));
        for (ts, l) in [(0u64, 7u64), (1_000_000_000, 9)] {
            t.push_record(&RequestRecord::new(ts, l, 9));
        }
        engine.poll_loop_step(9).unwrap();
        assert_eq!(engine.get_latest_latency(9).unwrap(), 9);
        assert_eq!(engine.get_average_latency(9).unwrap(), 8.0);
        assert_eq!(engine.get_rps(9).unwrap(), 2.0);
        assert_eq!(engine.get_latency_percentile(9, 99.0).unwrap(), 9);
        assert_eq!(engine.get_latency_percentile(9, 50.0).unwrap(), 7);
        assert!(matches!(
            engine.get_latency_percentile(9, 0.0),
            Err(MetricsError::InvalidPercentile(_))
        ));
    }

    #[test]
    fn tracer_matches_and_publishes_stats() {
        let engine = MetricsEngine::new();
        let mut t = engine
            .start_tracing_with(
                5,
                TracingOptions {
                    matcher: DisambiguatorConfig::with_pattern(ProtocolPattern::Http1AcceptClose),
                    ..Default::default()
                },
            )
            .unwrap();
        t.feed(TraceEvent::fd(10, 5, ProbeKind::AcceptReturn, 3));
        t.feed(TraceEvent::fd(30, 5, ProbeKind::CloseEntry, 3));
        t.feed(TraceEvent::fd(40, 6, ProbeKind::CloseEntry, 3));
        t.finish();
        engine.poll_loop_step(5).unwrap();
        assert_eq!(engine.get_latest_latency(5).unwrap(), 20);
        assert_eq!(engine.get_match_stats(5).unwrap().matched, 1);
        assert_eq!(engine.get_match_stats(5).unwrap().unmatched_end, 0);
    }

    #[test]
    fn capacities() {
        let engine = MetricsEngine::new();
        assert!(engine.set_ring_capacity(10).is_err());
        engine.set_ring_capacity(240).unwrap();
        let mut t = engine.start_tracing(1).unwrap();
        for i in 0..11 {
            t.push_record(&RequestRecord::new(i, i, 1));
        }
        assert_eq!(engine.ring_dropped(1).unwrap(), 1);
        engine.poll_loop_step(1).unwrap();
        engine.set_history_capacity(1, 4).unwrap();
        assert_eq!(engine.history_len(1).unwrap(), 4);
        assert_eq!(engine.get_latest_latency(1).unwrap(), 9);
    }
}
