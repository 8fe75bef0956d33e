//! Independent reference matchers used as test oracles. They work on a whole
//! trace at once by scanning, never by maintaining incremental state.

#![allow(dead_code)]

use reqlens::{ProbeKind, ProtocolPattern, RequestId, TraceEvent};

/// What a matcher is expected to produce for a trace.
#[derive(Debug, Default, PartialEq)]
pub struct Expected {
    /// Sorted `(start, latency)` pairs.
    pub pairs: Vec<(u64, u64)>,
    pub unmatched_end: u64,
    pub duplicate_start: u64,
}

fn kinds(pattern: ProtocolPattern) -> (ProbeKind, ProbeKind) {
    match pattern {
        ProtocolPattern::GrpcMultiplexed => (ProbeKind::StreamCtor, ProbeKind::TrailingMetaDone),
        ProtocolPattern::Http1ReadSendmsg => (ProbeKind::ReadEntry, ProbeKind::SendmsgEntry),
        _ => (ProbeKind::AcceptReturn, ProbeKind::CloseEntry),
    }
}

/// Stable sort by timestamp, so equal timestamps keep their input order.
pub fn by_time(events: &[TraceEvent]) -> Vec<TraceEvent> {
    let mut v = events.to_vec();
    v.sort_by_key(|e| e.timestamp);
    v
}

/// Brute force for start/end patterns: each end pairs with the nearest
/// earlier event of the same key if and only if that event is a start.
pub fn brute_keyed(pattern: ProtocolPattern, events: &[TraceEvent]) -> Expected {
    let (start, end) = kinds(pattern);
    let sorted = by_time(events);
    let key = |e: &TraceEvent| (e.pid, e.id);
    let relevant = |e: &TraceEvent| e.kind == start || e.kind == end;
    let mut out = Expected::default();
    for (j, e) in sorted.iter().enumerate() {
        if !relevant(e) {
            continue;
        }
        let prev = sorted[..j].iter().rev().find(|p| relevant(p) && key(p) == key(e));
        if e.kind == end {
            match prev {
                Some(p) if p.kind == start => out.pairs.push((p.timestamp, e.timestamp - p.timestamp)),
                _ => out.unmatched_end += 1,
            }
        } else if matches!(prev, Some(p) if p.kind == start) {
            out.duplicate_start += 1;
        }
    }
    out.pairs.sort_unstable();
    out
}

/// Brute force for read/sendmsg: a sendmsg pairs with the earliest read since
/// the last sendmsg, close or accept on the same fd.
pub fn brute_read_sendmsg(events: &[TraceEvent]) -> Expected {
    let sorted = by_time(events);
    let boundary = |k: ProbeKind| matches!(k, ProbeKind::SendmsgEntry | ProbeKind::CloseEntry | ProbeKind::AcceptReturn);
    let mut out = Expected::default();
    for (j, e) in sorted.iter().enumerate() {
        if e.kind != ProbeKind::SendmsgEntry {
            continue;
        }
        let same = |p: &&TraceEvent| p.pid == e.pid && p.id == e.id;
        let since = sorted[..j]
            .iter()
            .rposition(|p| same(&p) && boundary(p.kind))
            .map_or(0, |b| b + 1);
        match sorted[since..j].iter().find(|p| same(p) && p.kind == ProbeKind::ReadEntry) {
            Some(r) => out.pairs.push((r.timestamp, e.timestamp - r.timestamp)),
            None => out.unmatched_end += 1,
        }
    }
    out.pairs.sort_unstable();
    out
}

pub fn brute(pattern: ProtocolPattern, events: &[TraceEvent]) -> Expected {
    match pattern {
        ProtocolPattern::Http1ReadSendmsg => brute_read_sendmsg(events),
        _ => brute_keyed(pattern, events),
    }
}

pub fn pairs_of(records: &[reqlens::RequestRecord]) -> Vec<(u64, u64)> {
    let mut v: Vec<_> = records.iter().map(|r| (r.start_ts, r.latency)).collect();
    v.sort_unstable();
    v
}

pub fn fd_of(e: &TraceEvent) -> Option<u32> {
    match e.id {
        RequestId::FileDescriptor(fd) => Some(fd),
        _ => None,
    }
}

/// Nearest-rank percentile by sorting a copy. The rank is computed in
/// integers, so `p` must have at most three decimals.
pub fn sort_percentile(values: &[u64], p: f64) -> u64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    v[exact_rank(p, v.len()) - 1]
}

/// `ceil(p / 100 * n)` clamped to `1..=n`, without floating point rounding.
pub fn exact_rank(p: f64, n: usize) -> usize {
    let milli = (p * 1000.0).round() as u128;
    assert!((milli as f64 - p * 1000.0).abs() < 1e-6, "p has more than three decimals");
    let rank = (milli * n as u128).div_ceil(100_000) as usize;
    rank.clamp(1, n)
}
