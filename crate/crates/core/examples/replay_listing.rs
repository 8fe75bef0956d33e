//! Parse a captured `bpf_trace_printk` listing and match it.
//!
//! Run: `cargo run --example replay_listing [path]`

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use reqlens::trace_io::read_trace;
use reqlens::{disambiguate, DisambiguatorConfig, ProtocolPattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tritonserver_http1.trace")
    });
    let events = read_trace(BufReader::new(File::open(&path)?))?;
    println!("{} events from {}", events.len(), path.display());

    let cfg = DisambiguatorConfig::with_pattern(ProtocolPattern::Http1AcceptClose);
    let (records, stats) = disambiguate(cfg, events);
    for r in &records {
        println!(
            "pid={} start={}ns latency={:.3} ms",
            r.pid,
            r.start_ts,
            r.latency as f64 / 1e6
        );
    }
    // Closes of sockets accepted before the capture began have no start.
    println!("{stats:?}");
    Ok(())
}
