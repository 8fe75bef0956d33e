//! Three overlapping requests that finish in a different order than they
//! arrived. Pairing by fd recovers each latency; pairing by arrival order
//! would not.

use reqlens::{Disambiguator, ProbeKind, ProtocolPattern, TraceEvent};

const PID: u32 = 7;

fn main() {
    let ms = 1_000_000;
    let events = [
        TraceEvent::fd(0, PID, ProbeKind::AcceptReturn, 10),
        TraceEvent::fd(ms, PID, ProbeKind::AcceptReturn, 11),
        TraceEvent::fd(2 * ms, PID, ProbeKind::AcceptReturn, 12),
        TraceEvent::fd(3 * ms, PID, ProbeKind::CloseEntry, 12),
        TraceEvent::fd(9 * ms, PID, ProbeKind::CloseEntry, 10),
        TraceEvent::fd(5 * ms, PID, ProbeKind::CloseEntry, 11), // arrives late
    ];

    let mut matcher = Disambiguator::with_pattern(ProtocolPattern::Http1AcceptClose);
    let mut records = Vec::new();
    for ev in events {
        records.extend(matcher.ingest(ev));
        println!("after ts={:>8}: {} buffered, {} open", ev.timestamp, matcher.buffered(), matcher.open_requests());
    }
    records.extend(matcher.flush());

    for r in &records {
        println!("start={:>8} latency={} ms", r.start_ts, r.latency / ms);
    }
    println!("{:?}", matcher.stats());
}
