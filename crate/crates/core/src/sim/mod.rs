//! Synthetic multi-worker servers with known request boundaries.
//!
//! [`simulate`] runs a small discrete-event model: requests arrive (open or
//! closed loop), wait for a free worker, are served, and leave the syscall
//! or uprobe events their protocol would leave. All workers share one PID,
//! so the merged event stream is exactly the interleaving the matcher has
//! to untangle. The true `(start, end)` of every request is returned next to
//! the trace as a [`GroundTruthLog`].
//!
//! Identifier discipline mirrors the kernel: fds come from a
//! lowest-available pool and return to it only at `close`; gRPC stream ids
//! advance by a fixed stride and are never reused within a transport.

mod config;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use thiserror::Error;

pub use config::{Arrival, GrpcConfig, KeepaliveConfig, ServiceTime, SimConfig, Stop};

use crate::disambiguator::ProtocolPattern;
use crate::event::{ProbeKind, RequestId, TraceEvent};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("cannot read simulation config: {0}")]
    Config(String),
}

/// True lifecycle of one simulated request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruthEntry {
    pub arrival: u64,
    pub start: u64,
    pub end: u64,
    pub id: RequestId,
    pub worker: usize,
}

impl TruthEntry {
    pub fn latency(&self) -> u64 {
        self.end - self.start
    }
}

/// Every request the simulator served, in dispatch order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruthLog {
    pub entries: Vec<TruthEntry>,
    /// Length of the arrival horizon, when the run was duration-bounded.
    pub horizon_ns: Option<u64>,
    pub client_offset_ns: u64,
}

impl GroundTruthLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted `(start, latency)` pairs, for multiset comparison.
    pub fn pairs(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<_> = self.entries.iter().map(|e| (e.start, e.latency())).collect();
        v.sort_unstable();
        v
    }

    /// Latencies ordered by completion time, matching the order in which a
    /// matcher emits records.
    pub fn latencies_by_completion(&self) -> Vec<u64> {
        let mut v: Vec<_> = self.entries.iter().map(|e| (e.end, e.start, e.latency())).collect();
        v.sort_unstable();
        v.into_iter().map(|(_, _, l)| l).collect()
    }

    /// What a client would observe, including the constant network offset.
    pub fn client_latencies(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.latency() + self.client_offset_ns).collect()
    }

    /// Achieved throughput as a load generator reports it: completed
    /// requests over the arrival horizon. Falls back to the span of start
    /// times for count-bounded runs.
    pub fn rate(&self) -> Option<f64> {
        let n = self.entries.len() as f64;
        match self.horizon_ns {
            Some(h) if h > 0 => Some(n / (h as f64 / 1e9)),
            _ => {
                let first = self.entries.iter().map(|e| e.start).min()?;
                let last = self.entries.iter().map(|e| e.start).max()?;
                (last > first).then(|| n / ((last - first) as f64 / 1e9))
            }
        }
    }
}

/// A generated trace and its ground truth.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub events: Vec<TraceEvent>,
    pub truth: GroundTruthLog,
}

const COMPLETION: u8 = 0;
const DISPATCH: u8 = 1;
const ARRIVAL: u8 = 2;
const BASE_TID: u32 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Scheduled {
    at: u64,
    priority: u8,
    seq: u64,
    /// Worker for completions/dispatches, client for arrivals.
    who: usize,
}

struct FdPool {
    free: BTreeSet<u32>,
    next: u32,
}

impl FdPool {
    fn new(base: u32) -> Self {
        FdPool {
            free: BTreeSet::new(),
            next: base,
        }
    }

    fn alloc(&mut self) -> u32 {
        self.free.pop_first().unwrap_or_else(|| {
            let fd = self.next;
            self.next += 1;
            fd
        })
    }

    fn release(&mut self, fd: u32) {
        debug_assert!(fd < self.next && !self.free.contains(&fd));
        self.free.insert(fd);
    }
}

struct ServiceSampler {
    dist: Option<LogNormal<f64>>,
    constant: u64,
}

impl ServiceSampler {
    fn new(service: &ServiceTime) -> Self {
        match *service {
            ServiceTime::Constant { ns } => ServiceSampler { dist: None, constant: ns },
            ServiceTime::LogNormal { median_ns, sigma } => ServiceSampler {
                dist: Some(LogNormal::new((median_ns as f64).ln(), sigma).expect("validated parameters")),
                constant: 0,
            },
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match &self.dist {
            Some(d) => (d.sample(rng).round() as u64).max(1),
            None => self.constant,
        }
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    service: ServiceSampler,
    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    free_workers: BTreeSet<usize>,
    queue: VecDeque<(u64, usize)>,
    /// Workers already promised to the head of the queue.
    pending_dispatch: usize,
    fds: FdPool,
    /// Per-worker (fd or id, client) of the request in service.
    in_service: Vec<Option<(RequestId, usize)>>,
    /// Keep-alive connection fd per worker.
    conn_fds: Vec<u32>,
    /// (transport id, socket fd, next stream id) for gRPC multiplexing.
    transports: Vec<(u64, u32, u32)>,
    arrivals: usize,
    events: Vec<TraceEvent>,
    truth: Vec<TruthEntry>,
    last_ts: u64,
}

impl<'a> Sim<'a> {
    fn schedule(&mut self, at: u64, priority: u8, who: usize) {
        self.seq += 1;
        self.heap.push(Reverse(Scheduled {
            at,
            priority,
            seq: self.seq,
            who,
        }));
    }

    fn emit(&mut self, ts: u64, worker: usize, kind: ProbeKind, id: RequestId) {
        let ev = TraceEvent::new(ts, self.cfg.pid, kind, id)
            .expect("simulator pairs kinds with matching ids")
            .with_tid(BASE_TID + worker as u32);
        self.last_ts = self.last_ts.max(ts);
        self.events.push(ev);
    }

    /// Schedule an arrival unless the stop condition forbids it.
    fn schedule_arrival(&mut self, at: u64, client: usize) {
        let allowed = match self.cfg.stop {
            Stop::Duration { ns } => at < ns,
            Stop::Requests { count } => self.arrivals < count,
        };
        if allowed {
            self.arrivals += 1;
            self.schedule(at, ARRIVAL, client);
        }
    }

    fn dispatch(&mut self, now: u64, worker: usize, arrival: u64, client: usize) {
        let s = self.service.sample(&mut self.rng);
        let end = now + s;
        let aux = self.cfg.aux_events;
        let id = match self.cfg.protocol {
            ProtocolPattern::Http1AcceptClose | ProtocolPattern::GrpcSocketPerStream => {
                let fd = self.fds.alloc();
                let id = RequestId::FileDescriptor(fd);
                self.emit(now, worker, ProbeKind::AcceptReturn, id);
                if aux {
                    let read_kind = if self.cfg.protocol == ProtocolPattern::GrpcSocketPerStream {
                        ProbeKind::ReadvEntry
                    } else {
                        ProbeKind::RecvEntry
                    };
                    self.emit(now + s / 4, worker, read_kind, id);
                    self.emit(now + 3 * s / 4, worker, ProbeKind::WritevEntry, id);
                }
                self.emit(end, worker, ProbeKind::CloseEntry, id);
                if aux {
                    self.emit(end, worker, ProbeKind::CloseReturn, RequestId::FileDescriptor(0));
                }
                id
            }
            ProtocolPattern::Http1ReadSendmsg => {
                let id = RequestId::FileDescriptor(self.conn_fds[worker]);
                let reads = u64::from(self.cfg.keepalive.reads_per_request);
                for k in 0..reads {
                    self.emit(now + k * s / (2 * reads), worker, ProbeKind::ReadEntry, id);
                }
                self.emit(end, worker, ProbeKind::SendmsgEntry, id);
                id
            }
            ProtocolPattern::GrpcMultiplexed => {
                let t = self.truth.len() % self.transports.len();
                let (transport, sock, stream) = self.transports[t];
                self.transports[t].2 = stream + self.cfg.grpc.stride;
                let id = RequestId::Stream { transport, stream };
                self.emit(now, worker, ProbeKind::StreamCtor, id);
                if aux {
                    self.emit(now + s / 4, worker, ProbeKind::ReadvEntry, RequestId::FileDescriptor(sock));
                    self.emit(now + 3 * s / 4, worker, ProbeKind::WritevEntry, RequestId::FileDescriptor(sock));
                }
                self.emit(end, worker, ProbeKind::TrailingMetaDone, id);
                id
            }
            ProtocolPattern::Auto => unreachable!("validated"),
        };
        self.truth.push(TruthEntry {
            arrival,
            start: now,
            end,
            id,
            worker,
        });
        self.in_service[worker] = Some((id, client));
        self.schedule(end, COMPLETION, worker);
    }

    fn arrive(&mut self, now: u64, client: usize) {
        match self.free_workers.pop_first() {
            Some(w) => self.dispatch(now, w, now, client),
            None => self.queue.push_back((now, client)),
        }
        if let Arrival::Open { rate } = self.cfg.arrival {
            let gap = Exp::new(rate).expect("validated rate").sample(&mut self.rng);
            let next = now + (gap * 1e9).round() as u64;
            self.schedule_arrival(next, 0);
        }
    }

    fn complete(&mut self, now: u64, worker: usize) {
        let (id, client) = self.in_service[worker].take().expect("worker was busy");
        if matches!(
            self.cfg.protocol,
            ProtocolPattern::Http1AcceptClose | ProtocolPattern::GrpcSocketPerStream
        ) {
            if let RequestId::FileDescriptor(fd) = id {
                self.fds.release(fd);
            }
        }
        if let Arrival::Closed { think_ns, .. } = self.cfg.arrival {
            self.schedule_arrival(now + think_ns, client);
        }
        if self.queue.len() <= self.pending_dispatch {
            self.free_workers.insert(worker);
        } else {
            self.pending_dispatch += 1;
            self.schedule(now + self.cfg.handoff_ns, DISPATCH, worker);
        }
    }

    fn run(mut self) -> SimOutput {
        match self.cfg.protocol {
            ProtocolPattern::Http1ReadSendmsg => {
                for w in 0..self.cfg.workers {
                    let fd = self.fds.alloc();
                    self.conn_fds.push(fd);
                    self.emit(0, w, ProbeKind::AcceptReturn, RequestId::FileDescriptor(fd));
                }
            }
            ProtocolPattern::GrpcMultiplexed => {
                for t in 0..self.cfg.grpc.transports {
                    let fd = self.fds.alloc();
                    let transport = self.cfg.grpc.transport_base + 0x1000 * t as u64;
                    self.transports.push((transport, fd, self.cfg.grpc.first_stream));
                    self.emit(0, 0, ProbeKind::AcceptReturn, RequestId::FileDescriptor(fd));
                }
            }
            _ => {}
        }

        match &self.cfg.arrival {
            Arrival::Open { .. } => self.schedule_arrival(0, 0),
            Arrival::Closed { concurrency, .. } => {
                for c in 0..*concurrency {
                    self.schedule_arrival(0, c);
                }
            }
            Arrival::Explicit { times_ns } => {
                for &t in times_ns {
                    self.schedule(t, ARRIVAL, 0);
                }
            }
        }

        while let Some(Reverse(next)) = self.heap.pop() {
            match next.priority {
                COMPLETION => self.complete(next.at, next.who),
                DISPATCH => {
                    self.pending_dispatch -= 1;
                    let (arrival, client) = self.queue.pop_front().expect("dispatch scheduled for a queued request");
                    self.dispatch(next.at, next.who, arrival, client);
                }
                _ => self.arrive(next.at, next.who),
            }
        }

        // Connections that outlive the requests are closed together at the end.
        let close_at = self.last_ts + 1_000_000;
        let persistent: Vec<u32> = match self.cfg.protocol {
            ProtocolPattern::Http1ReadSendmsg if self.cfg.keepalive.bulk_close => self.conn_fds.clone(),
            ProtocolPattern::GrpcMultiplexed => self.transports.iter().map(|t| t.1).collect(),
            _ => Vec::new(),
        };
        for (w, fd) in persistent.into_iter().enumerate() {
            self.emit(close_at, w, ProbeKind::CloseEntry, RequestId::FileDescriptor(fd));
            if self.cfg.aux_events {
                self.emit(close_at, w, ProbeKind::CloseReturn, RequestId::FileDescriptor(0));
            }
        }

        // Stable sort: events sharing a timestamp keep generation order, so an
        // fd's close always precedes its reuse.
        let mut events = self.events;
        events.sort_by_key(|e| e.timestamp);

        // Delivery delay reorders events across identifiers only: events on
        // one fd or stream come from one thread and arrive in order.
        if self.cfg.jitter_ns > 0 {
            let mut last: HashMap<RequestId, u64> = HashMap::new();
            let mut keyed: Vec<(u64, usize, TraceEvent)> = Vec::with_capacity(events.len());
            for (i, e) in events.into_iter().enumerate() {
                let delivered = e.timestamp + self.rng.random_range(0..=self.cfg.jitter_ns);
                let prev = last.entry(e.id).or_insert(0);
                *prev = (*prev).max(delivered);
                keyed.push((*prev, i, e));
            }
            keyed.sort_by_key(|(k, i, _)| (*k, *i));
            events = keyed.into_iter().map(|(_, _, e)| e).collect();
        }

        SimOutput {
            events,
            truth: GroundTruthLog {
                entries: self.truth,
                horizon_ns: match (&self.cfg.arrival, self.cfg.stop.clone()) {
                    (Arrival::Explicit { .. }, _) => None,
                    (_, Stop::Duration { ns }) => Some(ns),
                    _ => None,
                },
                client_offset_ns: self.cfg.client_offset_ns,
            },
        }
    }
}

/// Generate one trace. Deterministic for a given config, seed included.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let sim = Sim {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        service: ServiceSampler::new(&cfg.service),
        heap: BinaryHeap::new(),
        seq: 0,
        free_workers: (0..cfg.workers).collect(),
        queue: VecDeque::new(),
        pending_dispatch: 0,
        fds: FdPool::new(cfg.base_fd),
        in_service: vec![None; cfg.workers],
        conn_fds: Vec::new(),
        transports: Vec::new(),
        arrivals: 0,
        events: Vec::new(),
        truth: Vec::new(),
        last_ts: 0,
    };
    Ok(sim.run())
}

/// Seed for the `index`-th run of a sweep.
pub fn derive_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// One open-loop run per rate, each with its own derived seed.
pub fn sweep(cfg: &SimConfig, rates: &[f64]) -> Result<Vec<(f64, SimOutput)>, SimError> {
    if rates.is_empty() {
        return Err(SimError::InvalidConfig("rate sweep needs at least one rate".into()));
    }
    rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let run = SimConfig {
                arrival: Arrival::Open { rate },
                seed: derive_seed(cfg.seed, i),
                ..cfg.clone()
            };
            simulate(&run).map(|out| (rate, out))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn fds(events: &[TraceEvent], kind: ProbeKind) -> Vec<(u64, u32)> {
        events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| match e.id {
                RequestId::FileDescriptor(fd) => (e.timestamp, fd),
                _ => panic!("fd expected"),
            })
            .collect()
    }

    #[test]
    fn sequential_requests_reuse_base_fd() {
        let cfg = SimConfig {
            workers: 1,
            arrival: Arrival::Explicit {
                times_ns: vec![0, 100_000_000, 200_000_000],
            },
            service: ServiceTime::Constant { ns: 10_000_000 },
            aux_events: false,
            ..Default::default()
        };
        let out = simulate(&cfg).unwrap();
        let got: Vec<_> = out.events.iter().map(|e| (e.kind, e.timestamp, e.id)).collect();
        let fd = RequestId::FileDescriptor(63);
        assert_eq!(
            got,
            vec![
                (ProbeKind::AcceptReturn, 0, fd),
                (ProbeKind::CloseEntry, 10_000_000, fd),
                (ProbeKind::AcceptReturn, 100_000_000, fd),
                (ProbeKind::CloseEntry, 110_000_000, fd),
                (ProbeKind::AcceptReturn, 200_000_000, fd),
                (ProbeKind::CloseEntry, 210_000_000, fd),
            ]
        );
    }

    #[test]
    fn simultaneous_arrivals_take_lowest_fds() {
        let cfg = SimConfig {
            workers: 2,
            arrival: Arrival::Explicit { times_ns: vec![0, 0] },
            service: ServiceTime::LogNormal {
                median_ns: 1_000_000,
                sigma: 0.5,
            },
            aux_events: false,
            seed: 3,
            ..Default::default()
        };
        let out = simulate(&cfg).unwrap();
        assert_eq!(fds(&out.events, ProbeKind::AcceptReturn), vec![(0, 63), (0, 64)]);
        let closes = fds(&out.events, ProbeKind::CloseEntry);
        let mut by_end: Vec<_> = out.truth.entries.iter().map(|e| (e.end, e.id)).collect();
        by_end.sort();
        let expected: Vec<_> = by_end
            .iter()
            .map(|(t, id)| match id {
                RequestId::FileDescriptor(fd) => (*t, *fd),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(closes, expected);
    }

    #[test]
    fn grpc_stream_ids_are_odd_and_unique() {
        let cfg = SimConfig {
            protocol: ProtocolPattern::GrpcMultiplexed,
            workers: 4,
            stop: Stop::Requests { count: 50 },
            ..Default::default()
        };
        let out = simulate(&cfg).unwrap();
        let streams: Vec<u32> = out
            .events
            .iter()
            .filter(|e| e.kind == ProbeKind::StreamCtor)
            .map(|e| match e.id {
                RequestId::Stream { stream, .. } => stream,
                _ => unreachable!(),
            })
            .collect();
        let expected: Vec<u32> = (0..50).map(|i| 1 + 2 * i).collect();
        assert_eq!(streams, expected);
    }

    #[test]
    fn keepalive_bulk_close() {
        let cfg = SimConfig {
            protocol: ProtocolPattern::Http1ReadSendmsg,
            workers: 1,
            stop: Stop::Requests { count: 20 },
            keepalive: KeepaliveConfig {
                reads_per_request: 3,
                bulk_close: true,
            },
            ..Default::default()
        };
        let out = simulate(&cfg).unwrap();
        let count = |k| out.events.iter().filter(|e| e.kind == k).count();
        assert_eq!(count(ProbeKind::AcceptReturn), 1);
        assert_eq!(count(ProbeKind::ReadEntry), 60);
        assert_eq!(count(ProbeKind::SendmsgEntry), 20);
        assert_eq!(count(ProbeKind::CloseEntry), 1);
        let close = out.events.iter().find(|e| e.kind == ProbeKind::CloseEntry).unwrap();
        assert_eq!(close.timestamp, out.events.last().unwrap().timestamp);
    }

    #[test]
    fn reuse_discipline_holds() {
        for protocol in ProtocolPattern::CONCRETE {
            let cfg = SimConfig {
                protocol,
                workers: 16,
                arrival: Arrival::Open { rate: 2_000.0 },
                stop: Stop::Requests { count: 3_000 },
                jitter_ns: 0,
                ..Default::default()
            };
            let out = simulate(&cfg).unwrap();
            let (start, end) = match protocol {
                ProtocolPattern::Http1ReadSendmsg => (ProbeKind::ReadEntry, ProbeKind::SendmsgEntry),
                ProtocolPattern::GrpcMultiplexed => (ProbeKind::StreamCtor, ProbeKind::TrailingMetaDone),
                _ => (ProbeKind::AcceptReturn, ProbeKind::CloseEntry),
            };
            let mut open: HashMap<RequestId, bool> = HashMap::new();
            for e in &out.events {
                if e.kind == start {
                    let busy = open.insert(e.id, true).unwrap_or(false);
                    // Extra reads inside one keep-alive request are allowed.
                    assert!(!busy || protocol == ProtocolPattern::Http1ReadSendmsg, "{protocol}: {} reused", e.id);
                } else if e.kind == end {
                    open.insert(e.id, false);
                }
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = SimConfig {
            stop: Stop::Requests { count: 500 },
            jitter_ns: 50_000,
            ..Default::default()
        };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.events, b.events);
        let c = simulate(&SimConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn closed_loop_respects_concurrency() {
        let cfg = SimConfig {
            workers: 32,
            arrival: Arrival::Closed {
                concurrency: 4,
                think_ns: 0,
            },
            stop: Stop::Requests { count: 200 },
            ..Default::default()
        };
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.truth.len(), 200);
        // Four clients never occupy more than four workers at once.
        let max_worker = out.truth.entries.iter().map(|e| e.worker).max().unwrap();
        assert!(max_worker < 4);
    }

    #[test]
    fn queued_requests_wait_for_workers() {
        let cfg = SimConfig {
            workers: 1,
            arrival: Arrival::Explicit { times_ns: vec![0, 1, 2] },
            service: ServiceTime::Constant { ns: 100 },
            handoff_ns: 5,
            ..Default::default()
        };
        let out = simulate(&cfg).unwrap();
        let starts: Vec<u64> = out.truth.entries.iter().map(|e| e.start).collect();
        assert_eq!(starts, vec![0, 105, 210]);
        assert!(out.truth.entries.iter().all(|e| e.end >= e.start));
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SimConfig {
                workers: 0,
                ..Default::default()
            },
            SimConfig {
                arrival: Arrival::Open { rate: 0.0 },
                ..Default::default()
            },
            SimConfig {
                arrival: Arrival::Closed {
                    concurrency: 0,
                    think_ns: 0,
                },
                ..Default::default()
            },
            SimConfig {
                protocol: ProtocolPattern::Auto,
                ..Default::default()
            },
            SimConfig {
                service: ServiceTime::LogNormal {
                    median_ns: 10,
                    sigma: f64::NAN,
                },
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(simulate(&cfg), Err(SimError::InvalidConfig(_))));
        }
        assert!(sweep(&SimConfig::default(), &[]).is_err());
    }

    #[test]
    fn sweep_counts_track_rate() {
        let cfg = SimConfig {
            stop: Stop::Duration { ns: 5_000_000_000 },
            ..Default::default()
        };
        let runs = sweep(&cfg, &[100.0, 200.0, 400.0]).unwrap();
        assert_eq!(runs.len(), 3);
        for (rate, out) in runs {
            let expected = rate * 5.0;
            let sigma = expected.sqrt();
            assert!((out.truth.len() as f64 - expected).abs() < 5.0 * sigma, "{rate}: {}", out.truth.len());
        }
        assert_eq!(sweep(&cfg, &[10.0]).unwrap().len(), 1);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig {
            protocol: ProtocolPattern::GrpcMultiplexed,
            arrival: Arrival::Closed {
                concurrency: 64,
                think_ns: 10,
            },
            ..Default::default()
        };
        let text = cfg.to_toml();
        assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg);
        let partial = SimConfig::from_toml("protocol = \"http1-read-sendmsg\"\nworkers = 3\n").unwrap();
        assert_eq!(partial.workers, 3);
        assert_eq!(partial.protocol, ProtocolPattern::Http1ReadSendmsg);
        assert!(SimConfig::from_toml("bogus = 1").is_err());
    }
}
