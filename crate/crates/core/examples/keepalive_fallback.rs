//! A keep-alive server closes its sockets only at shutdown. Pairing
//! accept with close then measures connection lifetime, not requests;
//! read/sendmsg cycles give the real latencies, and `Auto` finds them.

use reqlens::sim::{Arrival, Stop};
use reqlens::{disambiguate, DisambiguatorConfig, ProtocolPattern, SimConfig};

fn mean_ms(latencies: impl Iterator<Item = u64>) -> f64 {
    let v: Vec<u64> = latencies.collect();
    v.iter().sum::<u64>() as f64 / v.len().max(1) as f64 / 1e6
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        protocol: ProtocolPattern::Http1ReadSendmsg,
        arrival: Arrival::Open { rate: 300.0 },
        stop: Stop::Duration { ns: 5_000_000_000 },
        ..Default::default()
    };
    let out = reqlens::simulate(&cfg)?;
    println!("{} requests, true mean {:.2} ms", out.truth.len(), mean_ms(out.truth.entries.iter().map(|e| e.latency())));

    for pattern in [ProtocolPattern::Http1AcceptClose, ProtocolPattern::Auto] {
        let mut matcher = reqlens::Disambiguator::new(DisambiguatorConfig::with_pattern(pattern));
        let mut records = Vec::new();
        for ev in out.events.iter().copied() {
            matcher.ingest_into(ev, &mut records);
        }
        matcher.flush_into(&mut records);
        println!(
            "{:>20}: {:>5} records, mean {:>9.2} ms, chosen {:?}",
            pattern.as_str(),
            records.len(),
            mean_ms(records.iter().map(|r| r.latency)),
            matcher.pattern_for(cfg.pid)
        );
    }

    let (records, _) = disambiguate(DisambiguatorConfig::with_pattern(ProtocolPattern::Auto), out.events);
    assert_eq!(records.len(), out.truth.len());
    Ok(())
}

