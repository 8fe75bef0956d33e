mod common;

use std::collections::HashMap;

use common::{brute, pairs_of};
use reqlens::disambiguator::{disambiguate, DisambiguatorConfig};
use reqlens::sim::{Arrival, KeepaliveConfig, ServiceTime, Stop};
use reqlens::{simulate, ProbeKind, ProtocolPattern, RequestId, SimConfig};

fn config(protocol: ProtocolPattern, seed: u64) -> SimConfig {
    SimConfig {
        protocol,
        workers: 12,
        arrival: Arrival::Open { rate: 1_500.0 },
        stop: Stop::Requests { count: 2_000 },
        seed,
        ..Default::default()
    }
}

#[test]
fn matcher_recovers_ground_truth_for_every_pattern() {
    for protocol in ProtocolPattern::CONCRETE {
        for seed in 1..=3 {
            for jitter in [0, 2_000_000, 10_000_000] {
                let cfg = SimConfig {
                    jitter_ns: jitter,
                    ..config(protocol, seed)
                };
                let out = simulate(&cfg).unwrap();
                let (records, stats) = disambiguate(DisambiguatorConfig::with_pattern(protocol), out.events);
                assert_eq!(pairs_of(&records), out.truth.pairs(), "{protocol} seed {seed} jitter {jitter}");
                assert_eq!(stats.matched as usize, out.truth.len());
                assert_eq!(stats.unmatched_end, 0);
                assert_eq!(stats.duplicate_start, 0);
                assert_eq!(stats.dropped_reorder, 0);
            }
        }
    }
}

#[test]
fn brute_force_agrees_with_ground_truth() {
    for protocol in ProtocolPattern::CONCRETE {
        let cfg = SimConfig {
            stop: Stop::Requests { count: 300 },
            ..config(protocol, 9)
        };
        let out = simulate(&cfg).unwrap();
        let want = brute(protocol, &out.events);
        assert_eq!(want.pairs, out.truth.pairs(), "{protocol}");
        assert_eq!(want.unmatched_end, 0);
    }
}

#[test]
fn auto_matches_forced_pattern() {
    for protocol in ProtocolPattern::CONCRETE {
        let out = simulate(&config(protocol, 4)).unwrap();
        let (records, _) = disambiguate(DisambiguatorConfig::with_pattern(ProtocolPattern::Auto), out.events);
        assert_eq!(pairs_of(&records), out.truth.pairs(), "{protocol}");
    }
}

/// A descriptor is never handed out again before its close, and stream ids
/// are never reused on a transport.
#[test]
fn identifiers_obey_reuse_rule() {
    for protocol in ProtocolPattern::CONCRETE {
        let out = simulate(&SimConfig {
            workers: 64,
            arrival: Arrival::Closed {
                concurrency: 64,
                think_ns: 0,
            },
            stop: Stop::Requests { count: 5_000 },
            ..config(protocol, 2)
        })
        .unwrap();
        let mut open_fds: HashMap<u32, bool> = HashMap::new();
        let mut seen_streams: HashMap<RequestId, usize> = HashMap::new();
        for e in &out.events {
            match (e.kind, e.id) {
                (ProbeKind::AcceptReturn, RequestId::FileDescriptor(fd)) => {
                    assert!(!open_fds.insert(fd, true).unwrap_or(false), "{protocol}: fd {fd} reused while open");
                }
                (ProbeKind::CloseEntry, RequestId::FileDescriptor(fd)) => {
                    assert_eq!(open_fds.insert(fd, false), Some(true), "{protocol}: close of fd {fd} not open");
                }
                (ProbeKind::StreamCtor, id) => {
                    *seen_streams.entry(id).or_default() += 1;
                }
                _ => {}
            }
        }
        assert!(seen_streams.values().all(|&n| n == 1));
    }
}

#[test]
fn truth_log_is_consistent() {
    for protocol in ProtocolPattern::CONCRETE {
        let out = simulate(&config(protocol, 5)).unwrap();
        let t = &out.truth;
        assert_eq!(t.len(), 2_000);
        for e in &t.entries {
            assert!(e.arrival <= e.start && e.start <= e.end);
        }
        // A worker serves one request at a time.
        let mut by_worker: HashMap<usize, Vec<(u64, u64)>> = HashMap::new();
        for e in &t.entries {
            by_worker.entry(e.worker).or_default().push((e.start, e.end));
        }
        for spans in by_worker.values_mut() {
            spans.sort_unstable();
            assert!(spans.windows(2).all(|w| w[0].1 <= w[1].0));
        }
        assert_eq!(out.events.iter().filter(|e| e.pid != 4242).count(), 0);
    }
}

#[test]
fn client_offset_shifts_client_latency_only() {
    let cfg = SimConfig {
        client_offset_ns: 250_000,
        ..config(ProtocolPattern::Http1AcceptClose, 6)
    };
    let out = simulate(&cfg).unwrap();
    let server: Vec<u64> = out.truth.entries.iter().map(|e| e.latency()).collect();
    let client = out.truth.client_latencies();
    assert!(server.iter().zip(&client).all(|(s, c)| c - s == 250_000));
}

#[test]
fn keepalive_without_bulk_close_leaves_connections_open() {
    let cfg = SimConfig {
        keepalive: KeepaliveConfig {
            reads_per_request: 1,
            bulk_close: false,
        },
        service: ServiceTime::Constant { ns: 1_000 },
        ..config(ProtocolPattern::Http1ReadSendmsg, 1)
    };
    let out = simulate(&cfg).unwrap();
    assert_eq!(out.events.iter().filter(|e| e.kind == ProbeKind::CloseEntry).count(), 0);
    let (records, _) = disambiguate(DisambiguatorConfig::with_pattern(ProtocolPattern::Http1ReadSendmsg), out.events);
    assert_eq!(pairs_of(&records), out.truth.pairs());
}
