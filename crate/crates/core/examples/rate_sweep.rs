//! Measured RPS and tail latency against simulator ground truth across
//! offered loads.
//!
//! Eight workers at roughly 6 ms each saturate near 1300 RPS. Past that the
//! measured rate is what the server completes, not what clients offer.

use reqlens::sim::Stop;
use reqlens::{measure, sweep, DisambiguatorConfig, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        stop: Stop::Duration { ns: 5_000_000_000 },
        seed: 17,
        ..Default::default()
    };
    let rates = [50.0, 100.0, 200.0, 400.0, 800.0, 1600.0];
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "offered", "measured", "truth", "p99 ms", "true p99");
    for (rate, out) in sweep(&cfg, &rates)? {
        let mut lat = out.truth.latencies_by_completion();
        lat.sort_unstable();
        let true_p99 = lat[(lat.len() * 99).div_ceil(100) - 1];
        let m = measure(cfg.pid, DisambiguatorConfig::with_pattern(cfg.protocol), out.events)?;
        println!(
            "{rate:>8} {:>10.2} {:>10.2} {:>10.3} {:>10.3}",
            m.rps?,
            out.truth.rate().unwrap_or(f64::NAN),
            m.p99? as f64 / 1e6,
            true_p99 as f64 / 1e6
        );
    }
    Ok(())
}
