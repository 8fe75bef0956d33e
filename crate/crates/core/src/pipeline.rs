//! One-shot run of an event sequence through matcher, ring and engine.

use crate::disambiguator::{DisambiguatorConfig, MatchStats, ProtocolPattern};
use crate::event::{TraceEvent, WIRE_RECORD_LEN};
use crate::metrics::{MetricsEngine, MetricsError, MetricsState, TracingOptions};

/// Final metrics for one process after its events were replayed.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub pid: u32,
    pub pattern: Option<ProtocolPattern>,
    pub stats: MatchStats,
    pub ring_drops: u64,
    /// Query results as `get_*` returned them at the end of the run.
    pub rps: Result<f64, MetricsError>,
    pub average: Result<f64, MetricsError>,
    pub p50: Result<u64, MetricsError>,
    pub p95: Result<u64, MetricsError>,
    pub p99: Result<u64, MetricsError>,
    pub state: MetricsState,
}

/// Feed `events` for `pid` through a fresh engine, polling the ring whenever
/// it is half full so a single-threaded run never drops records.
pub fn measure<I>(pid: u32, matcher: DisambiguatorConfig, events: I) -> Result<Measurement, MetricsError>
where
    I: IntoIterator<Item = TraceEvent>,
{
    let opts = TracingOptions {
        matcher,
        ..Default::default()
    };
    measure_with(&MetricsEngine::new(), pid, opts, events)
}

pub fn measure_with<I>(
    engine: &MetricsEngine,
    pid: u32,
    opts: TracingOptions,
    events: I,
) -> Result<Measurement, MetricsError>
where
    I: IntoIterator<Item = TraceEvent>,
{
    let ring_bytes = opts.ring_bytes.unwrap_or_else(|| engine.ring_capacity());
    let high_water = (ring_bytes / WIRE_RECORD_LEN / 2).max(1);
    let mut tracer = engine.start_tracing_with(pid, opts)?;
    for ev in events {
        tracer.feed(ev);
        if tracer.ring_len() >= high_water {
            engine.poll_loop_step(pid)?;
        }
    }
    tracer.finish_with(|| {
        let _ = engine.poll_loop_step(pid);
    });
    while tracer.ring_len() > 0 {
        engine.poll_loop_step(pid)?;
    }
    let m = Measurement {
        pid,
        pattern: tracer.pattern(),
        stats: tracer.stats(),
        ring_drops: tracer.ring_dropped(),
        rps: engine.get_rps(pid),
        average: engine.get_average_latency(pid),
        p50: engine.get_latency_percentile(pid, 50.0),
        p95: engine.get_latency_percentile(pid, 95.0),
        p99: engine.get_latency_percentile(pid, 99.0),
        state: engine.stop_tracing(pid)?,
    };
    Ok(m)
}
