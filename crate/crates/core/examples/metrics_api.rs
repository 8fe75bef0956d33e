//! The per-PID tracing and query API.

use reqlens::metrics::TracingOptions;
use reqlens::{MetricsEngine, MetricsError, ProbeKind, RequestRecord, TraceEvent};

fn main() -> Result<(), MetricsError> {
    let engine = MetricsEngine::new();
    let pid = 1234;
    let mut tracer = engine.start_tracing_with(pid, TracingOptions { history_capacity: 1_000, ..Default::default() })?;

    // Nothing absorbed yet.
    println!("before: {:?}", engine.get_rps(pid));

    // Raw events go through the matcher...
    tracer.feed(TraceEvent::fd(0, pid, ProbeKind::AcceptReturn, 5));
    tracer.feed(TraceEvent::fd(4_000_000, pid, ProbeKind::CloseEntry, 5));
    tracer.finish();
    // ...finished records and 24-byte wire records go straight to the ring.
    for i in 1..=99u64 {
        tracer.push_record(&RequestRecord::new(i * 10_000_000, 1_000_000 + i * 50_000, pid));
    }
    tracer.push_wire(&RequestRecord::new(1_000_000_000, 9_000_000, pid).to_wire()).expect("24 bytes");

    let absorbed = engine.poll_loop_step(pid)?;
    println!("absorbed {absorbed}, history {}", engine.history_len(pid)?);
    println!("rps     {:.2}", engine.get_rps(pid)?);
    println!("latest  {} ns", engine.get_latest_latency(pid)?);
    println!("average {:.0} ns", engine.get_average_latency(pid)?);
    for p in [50.0, 90.0, 99.0, 100.0] {
        println!("p{p:<5} {} ns", engine.get_latency_percentile(pid, p)?);
    }
    println!("{:?}", engine.get_match_stats(pid)?);

    let state = engine.stop_tracing(pid)?;
    println!("final snapshot: {} records", state.len());
    println!("after stop: {:?}", engine.get_rps(pid));
    Ok(())
}
