//! Turning an interleaved event stream into per-request records.
//!
//! Worker threads of one process interleave their syscalls, and the capture
//! side only knows the PID. Requests are told apart by an identifier that
//! cannot be reused while the request is in flight: the socket fd handed out
//! by `accept4`, or a gRPC `(transport, stream)` pair. A start event records
//! `identifier -> start timestamp` in an [`OpenRequestTable`]; the matching
//! end event removes it and yields a [`RequestRecord`].
//!
//! Events first pass through a [`ReorderBuffer`] because the trace pipe does
//! not deliver cross-CPU events in timestamp order. Anomalies (orphan ends,
//! duplicate starts, negative latencies) are counted in [`MatchStats`] and
//! never abort the stream.

mod calibrate;
mod reorder;
mod table;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use calibrate::{calibrate, CalibrationError};
pub use reorder::ReorderBuffer;
pub use table::{InsertOutcome, OpenKey, OpenRequestTable, DEFAULT_TABLE_CAPACITY};

use crate::event::{ProbeKind, RequestId, RequestRecord, TraceEvent};

/// Start/end/identifier rule used to pair events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProtocolPattern {
    /// `accept4` return starts, `close` entry ends, keyed by fd.
    Http1AcceptClose,
    /// First `read` of a cycle starts, `sendmsg` ends, keyed by fd. For
    /// keep-alive servers that close sockets in bulk.
    Http1ReadSendmsg,
    /// gRPC with one socket per stream; same mechanics as accept/close.
    GrpcSocketPerStream,
    /// gRPC streams multiplexed over a shared transport, keyed by
    /// `(transport, stream)`.
    GrpcMultiplexed,
    /// Decide per PID from the first events seen.
    Auto,
}

impl ProtocolPattern {
    pub const CONCRETE: [ProtocolPattern; 4] = [
        ProtocolPattern::Http1AcceptClose,
        ProtocolPattern::Http1ReadSendmsg,
        ProtocolPattern::GrpcSocketPerStream,
        ProtocolPattern::GrpcMultiplexed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolPattern::Http1AcceptClose => "http1-accept-close",
            ProtocolPattern::Http1ReadSendmsg => "http1-read-sendmsg",
            ProtocolPattern::GrpcSocketPerStream => "grpc-socket",
            ProtocolPattern::GrpcMultiplexed => "grpc-mux",
            ProtocolPattern::Auto => "auto",
        }
    }
}

impl fmt::Display for ProtocolPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ProtocolPattern::Http1AcceptClose,
            ProtocolPattern::Http1ReadSendmsg,
            ProtocolPattern::GrpcSocketPerStream,
            ProtocolPattern::GrpcMultiplexed,
            ProtocolPattern::Auto,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| {
            format!("unknown pattern {s:?} (expected auto, http1-accept-close, http1-read-sendmsg, grpc-socket or grpc-mux)")
        })
    }
}

/// How gRPC stream events are keyed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StreamKey {
    #[default]
    TransportAndStream,
    /// Ignore the transport. Only useful to show why the transport is
    /// needed: stream ids restart at 1 on every connection.
    StreamOnly,
}

/// Per-(pid, fd) state under [`ProtocolPattern::Http1ReadSendmsg`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdCycleState {
    Idle,
    Reading { start: u64 },
}

#[derive(Clone, Debug)]
pub struct DisambiguatorConfig {
    pub pattern: ProtocolPattern,
    pub reorder_window_ns: u64,
    /// Events collected per PID before `Auto` picks a pattern.
    pub calibration_window: usize,
    pub table_capacity: usize,
    pub stream_key: StreamKey,
}

pub const DEFAULT_REORDER_WINDOW_NS: u64 = 10_000_000;
pub const DEFAULT_CALIBRATION_WINDOW: usize = 1000;

impl Default for DisambiguatorConfig {
    fn default() -> Self {
        DisambiguatorConfig {
            pattern: ProtocolPattern::Auto,
            reorder_window_ns: DEFAULT_REORDER_WINDOW_NS,
            calibration_window: DEFAULT_CALIBRATION_WINDOW,
            table_capacity: DEFAULT_TABLE_CAPACITY,
            stream_key: StreamKey::TransportAndStream,
        }
    }
}

impl DisambiguatorConfig {
    pub fn with_pattern(pattern: ProtocolPattern) -> Self {
        DisambiguatorConfig {
            pattern,
            ..Default::default()
        }
    }
}

/// Snapshot of the matcher's counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchStats {
    pub matched: u64,
    pub unmatched_end: u64,
    pub duplicate_start: u64,
    pub dropped_reorder: u64,
    pub pattern_switches: u64,
    /// Open entries pushed out by the table capacity bound.
    pub evicted: u64,
}

/// Live counters behind [`MatchStats`]. Shared so another thread can take
/// snapshots while the matcher runs; every counter only grows.
#[derive(Debug, Default)]
pub struct MatchCounters {
    matched: AtomicU64,
    unmatched_end: AtomicU64,
    duplicate_start: AtomicU64,
    dropped_reorder: AtomicU64,
    pattern_switches: AtomicU64,
    evicted: AtomicU64,
}

impl MatchCounters {
    pub fn snapshot(&self) -> MatchStats {
        MatchStats {
            matched: self.matched.load(Ordering::Relaxed),
            unmatched_end: self.unmatched_end.load(Ordering::Relaxed),
            duplicate_start: self.duplicate_start.load(Ordering::Relaxed),
            dropped_reorder: self.dropped_reorder.load(Ordering::Relaxed),
            pattern_switches: self.pattern_switches.load(Ordering::Relaxed),
            evicted: self.evicted.load(Ordering::Relaxed),
        }
    }

    fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }
}

enum Lane {
    Resolved(ProtocolPattern),
    Calibrating { buffer: Vec<TraceEvent>, next_attempt: usize },
}

struct Matcher {
    table: OpenRequestTable,
    cycles: OpenRequestTable,
    counters: Arc<MatchCounters>,
    stream_key: StreamKey,
}

impl Matcher {
    fn key(&self, ev: &TraceEvent) -> OpenKey {
        let id = match (self.stream_key, ev.id) {
            (StreamKey::StreamOnly, RequestId::Stream { stream, .. }) => RequestId::Stream { transport: 0, stream },
            (_, id) => id,
        };
        (ev.pid, id)
    }

    fn note_insert(&self, outcome: InsertOutcome) {
        match outcome {
            InsertOutcome::Inserted => {}
            InsertOutcome::Replaced { .. } => MatchCounters::bump(&self.counters.duplicate_start),
            InsertOutcome::Evicted { .. } => MatchCounters::bump(&self.counters.evicted),
        }
    }

    fn finish(&self, start: Option<u64>, ev: &TraceEvent, out: &mut Vec<RequestRecord>) {
        match start {
            None => MatchCounters::bump(&self.counters.unmatched_end),
            Some(start) if ev.timestamp < start => MatchCounters::bump(&self.counters.dropped_reorder),
            Some(start) => {
                MatchCounters::bump(&self.counters.matched);
                out.push(RequestRecord::new(start, ev.timestamp - start, ev.pid));
            }
        }
    }

    fn on_event(&mut self, pattern: ProtocolPattern, ev: &TraceEvent, out: &mut Vec<RequestRecord>) {
        use ProbeKind::*;
        let key = self.key(ev);
        match (pattern, ev.kind) {
            (ProtocolPattern::Http1AcceptClose | ProtocolPattern::GrpcSocketPerStream, AcceptReturn)
            | (ProtocolPattern::GrpcMultiplexed, StreamCtor) => {
                let outcome = self.table.insert(key, ev.timestamp);
                self.note_insert(outcome);
            }
            (ProtocolPattern::Http1AcceptClose | ProtocolPattern::GrpcSocketPerStream, CloseEntry)
            | (ProtocolPattern::GrpcMultiplexed, TrailingMetaDone) => {
                let start = self.table.remove(&key);
                self.finish(start, ev, out);
            }
            (ProtocolPattern::Http1ReadSendmsg, ReadEntry) => {
                // First read of a cycle wins; later reads belong to the same request.
                if !self.cycles.contains(&key) {
                    let outcome = self.cycles.insert(key, ev.timestamp);
                    self.note_insert(outcome);
                }
            }
            (ProtocolPattern::Http1ReadSendmsg, SendmsgEntry) => {
                let start = self.cycles.remove(&key);
                self.finish(start, ev, out);
            }
            // A fresh accept means any stale cycle on that fd ended unobserved.
            (ProtocolPattern::Http1ReadSendmsg, CloseEntry | AcceptReturn) => {
                self.cycles.remove(&key);
            }
            _ => {}
        }
    }

    fn cycle_state(&self, pid: u32, fd: u32) -> FdCycleState {
        match self.cycles.get(&(pid, RequestId::FileDescriptor(fd))) {
            Some(start) => FdCycleState::Reading { start },
            None => FdCycleState::Idle,
        }
    }
}

/// Streaming request matcher. One instance per traced process is the
/// intended use, but keys carry the pid so mixed streams stay correct.
pub struct Disambiguator {
    config: DisambiguatorConfig,
    reorder: ReorderBuffer,
    lanes: HashMap<u32, Lane>,
    matcher: Matcher,
}

impl Disambiguator {
    pub fn new(config: DisambiguatorConfig) -> Self {
        Disambiguator {
            reorder: ReorderBuffer::new(config.reorder_window_ns),
            lanes: HashMap::new(),
            matcher: Matcher {
                table: OpenRequestTable::with_capacity(config.table_capacity),
                cycles: OpenRequestTable::with_capacity(config.table_capacity),
                counters: Arc::default(),
                stream_key: config.stream_key,
            },
            config,
        }
    }

    pub fn with_pattern(pattern: ProtocolPattern) -> Self {
        Self::new(DisambiguatorConfig::with_pattern(pattern))
    }

    pub fn config(&self) -> &DisambiguatorConfig {
        &self.config
    }

    /// Feed one event in arrival order, returning the records it released.
    pub fn ingest(&mut self, ev: TraceEvent) -> Vec<RequestRecord> {
        let mut out = Vec::new();
        self.ingest_into(ev, &mut out);
        out
    }

    pub fn ingest_into(&mut self, ev: TraceEvent, out: &mut Vec<RequestRecord>) {
        let mut released = Vec::new();
        self.reorder.push(ev, |e| released.push(e));
        for ev in released {
            self.dispatch(ev, out);
        }
    }

    /// Release the reorder window and settle any PID still calibrating.
    /// Call at end of stream.
    pub fn flush(&mut self) -> Vec<RequestRecord> {
        let mut out = Vec::new();
        self.flush_into(&mut out);
        out
    }

    pub fn flush_into(&mut self, out: &mut Vec<RequestRecord>) {
        let mut released = Vec::new();
        self.reorder.drain(|e| released.push(e));
        for ev in released {
            self.dispatch(ev, out);
        }
        for lane in self.lanes.values_mut() {
            if let Lane::Calibrating { buffer, .. } = lane {
                // No start events at all means nothing can match; any
                // concrete pattern just counts the orphan ends.
                let pattern = calibrate(buffer).unwrap_or(ProtocolPattern::Http1AcceptClose);
                let buffer = std::mem::take(buffer);
                *lane = Lane::Resolved(pattern);
                MatchCounters::bump(&self.matcher.counters.pattern_switches);
                for ev in &buffer {
                    self.matcher.on_event(pattern, ev, out);
                }
            }
        }
    }

    fn dispatch(&mut self, ev: TraceEvent, out: &mut Vec<RequestRecord>) {
        let window = self.config.calibration_window.max(1);
        let configured = self.config.pattern;
        let lane = self.lanes.entry(ev.pid).or_insert_with(|| match configured {
            ProtocolPattern::Auto => Lane::Calibrating {
                buffer: Vec::new(),
                next_attempt: window,
            },
            p => Lane::Resolved(p),
        });
        match lane {
            Lane::Resolved(pattern) => {
                let pattern = *pattern;
                self.matcher.on_event(pattern, &ev, out);
            }
            Lane::Calibrating { buffer, next_attempt } => {
                buffer.push(ev);
                if buffer.len() < *next_attempt {
                    return;
                }
                match calibrate(buffer) {
                    Ok(pattern) => {
                        log::info!("pid {}: selected {pattern}", buffer[0].pid);
                        let buffer = std::mem::take(buffer);
                        *lane = Lane::Resolved(pattern);
                        MatchCounters::bump(&self.matcher.counters.pattern_switches);
                        for ev in &buffer {
                            self.matcher.on_event(pattern, ev, out);
                        }
                    }
                    Err(CalibrationError::Inconclusive) => *next_attempt += window,
                }
            }
        }
    }

    /// Pattern in force for `pid`; `None` while it is still calibrating or
    /// before any of its events were released.
    pub fn pattern_for(&self, pid: u32) -> Option<ProtocolPattern> {
        match self.lanes.get(&pid) {
            Some(Lane::Resolved(p)) => Some(*p),
            _ => None,
        }
    }

    pub fn stats(&self) -> MatchStats {
        self.matcher.counters.snapshot()
    }

    pub fn counters(&self) -> Arc<MatchCounters> {
        Arc::clone(&self.matcher.counters)
    }

    pub fn open_requests(&self) -> usize {
        self.matcher.table.len() + self.matcher.cycles.len()
    }

    pub fn cycle_state(&self, pid: u32, fd: u32) -> FdCycleState {
        self.matcher.cycle_state(pid, fd)
    }

    pub fn buffered(&self) -> usize {
        self.reorder.len()
    }
}

/// Run a whole trace through a fresh matcher.
pub fn disambiguate(
    config: DisambiguatorConfig,
    events: impl IntoIterator<Item = TraceEvent>,
) -> (Vec<RequestRecord>, MatchStats) {
    let mut d = Disambiguator::new(config);
    let mut out = Vec::new();
    for ev in events {
        d.ingest_into(ev, &mut out);
    }
    d.flush_into(&mut out);
    (out, d.stats())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ProbeKind::*;

    fn fd(ts: u64, kind: ProbeKind, fd: u32) -> TraceEvent {
        TraceEvent::fd(ts, 1, kind, fd)
    }

    fn st(ts: u64, kind: ProbeKind, transport: u64, stream: u32) -> TraceEvent {
        TraceEvent::stream(ts, 1, kind, transport, stream)
    }

    fn run(pattern: ProtocolPattern, events: Vec<TraceEvent>) -> (Vec<(u64, u64)>, MatchStats) {
        let (records, stats) = disambiguate(DisambiguatorConfig::with_pattern(pattern), events);
        let mut pairs: Vec<_> = records.iter().map(|r| (r.start_ts, r.latency)).collect();
        pairs.sort();
        (pairs, stats)
    }

    #[test]
    fn degenerate_zero_latency() {
        let (r, _) = run(
            ProtocolPattern::Http1AcceptClose,
            vec![fd(50, AcceptReturn, 5), fd(50, CloseEntry, 5)],
        );
        assert_eq!(r, vec![(50, 0)]);
    }

    #[test]
    fn interleaved_fds_pair_by_identifier_not_fifo() {
        let (r, s) = run(
            ProtocolPattern::Http1AcceptClose,
            vec![
                fd(1, AcceptReturn, 63),
                fd(2, AcceptReturn, 64),
                fd(3, CloseEntry, 64),
                fd(4, CloseEntry, 63),
            ],
        );
        assert_eq!(r, vec![(1, 3), (2, 1)]);
        assert_eq!(s.matched, 2);
    }

    #[test]
    fn orphan_close_is_counted() {
        let (r, s) = run(ProtocolPattern::Http1AcceptClose, vec![fd(1, CloseEntry, 63)]);
        assert!(r.is_empty());
        assert_eq!(s.unmatched_end, 1);
    }

    #[test]
    fn duplicate_start_newest_wins() {
        let (r, s) = run(
            ProtocolPattern::Http1AcceptClose,
            vec![fd(1, AcceptReturn, 7), fd(5, AcceptReturn, 7), fd(9, CloseEntry, 7)],
        );
        assert_eq!(r, vec![(5, 4)]);
        assert_eq!(s.duplicate_start, 1);
    }

    #[test]
    fn late_end_beyond_window_is_dropped() {
        let cfg = DisambiguatorConfig {
            pattern: ProtocolPattern::Http1AcceptClose,
            reorder_window_ns: 10,
            ..Default::default()
        };
        // The close is stamped before its accept and arrives too late to be reordered.
        let (r, s) = disambiguate(
            cfg,
            vec![fd(100, AcceptReturn, 3), fd(200, RecvEntry, 9), fd(90, CloseEntry, 3)],
        );
        assert!(r.is_empty());
        assert_eq!(s.dropped_reorder, 1);
    }

    #[test]
    fn grpc_streams_interleave() {
        let (r, _) = run(
            ProtocolPattern::GrpcMultiplexed,
            vec![
                st(10, StreamCtor, 1, 1),
                st(11, StreamCtor, 1, 3),
                st(15, TrailingMetaDone, 1, 3),
                st(20, TrailingMetaDone, 1, 1),
            ],
        );
        assert_eq!(r, vec![(10, 10), (11, 4)]);
    }

    #[test]
    fn grpc_key_includes_transport() {
        let mut d = Disambiguator::with_pattern(ProtocolPattern::GrpcMultiplexed);
        let mut out = Vec::new();
        for ev in [st(5, StreamCtor, 1, 1), st(6, StreamCtor, 2, 1), st(8, TrailingMetaDone, 2, 1)] {
            d.ingest_into(ev, &mut out);
        }
        out.extend(d.flush());
        assert_eq!(out, vec![RequestRecord::new(6, 2, 1)]);
        assert_eq!(d.open_requests(), 1);
    }

    #[test]
    fn grpc_orphan_done() {
        let (r, s) = run(ProtocolPattern::GrpcMultiplexed, vec![st(3, TrailingMetaDone, 1, 1)]);
        assert!(r.is_empty());
        assert_eq!(s.unmatched_end, 1);
    }

    #[test]
    fn read_sendmsg_cycles() {
        let (r, _) = run(
            ProtocolPattern::Http1ReadSendmsg,
            vec![fd(100, ReadEntry, 9), fd(160, SendmsgEntry, 9)],
        );
        assert_eq!(r, vec![(100, 60)]);

        let (r, _) = run(
            ProtocolPattern::Http1ReadSendmsg,
            vec![fd(100, ReadEntry, 9), fd(110, ReadEntry, 9), fd(160, SendmsgEntry, 9)],
        );
        assert_eq!(r, vec![(100, 60)]);

        let (r, s) = run(ProtocolPattern::Http1ReadSendmsg, vec![fd(100, SendmsgEntry, 9)]);
        assert!(r.is_empty());
        assert_eq!(s.unmatched_end, 1);
    }

    #[test]
    fn close_clears_read_cycle() {
        let mut d = Disambiguator::new(DisambiguatorConfig {
            pattern: ProtocolPattern::Http1ReadSendmsg,
            reorder_window_ns: 0,
            ..Default::default()
        });
        d.ingest(fd(100, ReadEntry, 9));
        d.ingest(fd(120, CloseEntry, 9));
        d.ingest(fd(130, RecvEntry, 1));
        assert_eq!(d.cycle_state(1, 9), FdCycleState::Idle);
        d.ingest(fd(140, ReadEntry, 9));
        d.ingest(fd(150, RecvEntry, 1));
        assert_eq!(d.cycle_state(1, 9), FdCycleState::Reading { start: 140 });
        let mut out = d.ingest(fd(160, SendmsgEntry, 9));
        out.extend(d.flush());
        assert_eq!(out, vec![RequestRecord::new(140, 20, 1)]);
    }

    #[test]
    fn auto_resolves_and_replays_window() {
        let cfg = DisambiguatorConfig {
            calibration_window: 4,
            ..Default::default()
        };
        let events: Vec<_> = (0..10u64)
            .flat_map(|i| [fd(i * 10, AcceptReturn, 3), fd(i * 10 + 4, CloseEntry, 3)])
            .collect();
        let mut d = Disambiguator::new(cfg);
        let mut out = Vec::new();
        for ev in events {
            d.ingest_into(ev, &mut out);
        }
        d.flush_into(&mut out);
        assert_eq!(out.len(), 10);
        assert_eq!(d.pattern_for(1), Some(ProtocolPattern::Http1AcceptClose));
        assert_eq!(d.stats().pattern_switches, 1);
    }

    #[test]
    fn auto_extends_window_when_inconclusive() {
        let cfg = DisambiguatorConfig {
            calibration_window: 2,
            reorder_window_ns: 0,
            ..Default::default()
        };
        let mut d = Disambiguator::new(cfg);
        for t in 0..5 {
            d.ingest(fd(t, RecvEntry, 1));
        }
        assert_eq!(d.pattern_for(1), None);
        d.ingest(TraceEvent::stream(10, 1, StreamCtor, 1, 1));
        d.ingest(fd(11, RecvEntry, 1));
        d.ingest(fd(12, RecvEntry, 1));
        assert_eq!(d.pattern_for(1), Some(ProtocolPattern::GrpcMultiplexed));
    }

    #[test]
    fn table_capacity_evicts() {
        let cfg = DisambiguatorConfig {
            pattern: ProtocolPattern::Http1AcceptClose,
            table_capacity: 2,
            ..Default::default()
        };
        let (records, stats) = disambiguate(
            cfg,
            vec![
                fd(1, AcceptReturn, 1),
                fd(2, AcceptReturn, 2),
                fd(3, AcceptReturn, 3),
                fd(4, CloseEntry, 1),
                fd(5, CloseEntry, 3),
            ],
        );
        assert_eq!(stats.evicted, 1);
        assert_eq!(stats.unmatched_end, 1);
        assert_eq!(records, vec![RequestRecord::new(3, 2, 1)]);
    }

    #[test]
    fn pattern_names_round_trip() {
        for p in ProtocolPattern::CONCRETE.iter().chain([ProtocolPattern::Auto].iter()) {
            assert_eq!(p.as_str().parse::<ProtocolPattern>().unwrap(), *p);
        }
        assert!("http3".parse::<ProtocolPattern>().is_err());
    }
}
