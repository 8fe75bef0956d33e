//! A control loop polling the engine on a fixed period while a workload
//! runs on another thread, as an autoscaler or admission controller would.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use reqlens::sim::Stop;
use reqlens::{DisambiguatorConfig, MetricsEngine, SimConfig, TracingOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        stop: Stop::Duration { ns: 3_000_000_000 },
        ..Default::default()
    };
    let out = reqlens::simulate(&cfg)?;
    let engine = Arc::new(MetricsEngine::new());
    let opts = TracingOptions {
        matcher: DisambiguatorConfig::with_pattern(cfg.protocol),
        ..Default::default()
    };
    let mut tracer = engine.start_tracing_with(cfg.pid, opts)?;

    // Replay the trace at wall-clock speed.
    let feeder = thread::spawn(move || {
        let began = Instant::now();
        for ev in out.events {
            let due = Duration::from_nanos(ev.timestamp);
            if let Some(wait) = due.checked_sub(began.elapsed()) {
                thread::sleep(wait);
            }
            tracer.feed(ev);
        }
        tracer.finish();
    });

    let period = Duration::from_millis(500);
    let began = Instant::now();
    loop {
        thread::sleep(period);
        let done = feeder.is_finished();
        engine.poll_loop_step(cfg.pid)?;
        let fmt = |r: Result<f64, _>| r.map(|v| format!("{v:.2}")).unwrap_or_else(|_| "-".into());
        println!(
            "t={:.1}s rps={} avg_ms={} p99_ms={}",
            began.elapsed().as_secs_f64(),
            fmt(engine.get_rps(cfg.pid)),
            fmt(engine.get_average_latency(cfg.pid).map(|v| v / 1e6)),
            fmt(engine.get_latency_percentile(cfg.pid, 99.0).map(|v| v as f64 / 1e6)),
        );
        if done {
            break;
        }
    }
    feeder.join().unwrap();
    let state = engine.stop_tracing(cfg.pid)?;
    println!("{} records absorbed", state.len());
    Ok(())
}
