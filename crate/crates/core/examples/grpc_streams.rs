//! Many gRPC calls in flight on one HTTP/2 transport. The stream id alone
//! repeats across transports, so the key is `(transport, stream)`.

use reqlens::disambiguator::StreamKey;
use reqlens::sim::{Arrival, GrpcConfig, Stop};
use reqlens::{disambiguate, DisambiguatorConfig, ProtocolPattern, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        protocol: ProtocolPattern::GrpcMultiplexed,
        workers: 32,
        arrival: Arrival::Closed { concurrency: 32, think_ns: 0 },
        stop: Stop::Requests { count: 5_000 },
        grpc: GrpcConfig { transports: 2, ..Default::default() },
        ..Default::default()
    };
    let out = reqlens::simulate(&cfg)?;
    let mut truth: Vec<(u64, u64)> = out.truth.pairs();
    truth.sort_unstable();

    for key in [StreamKey::TransportAndStream, StreamKey::StreamOnly] {
        let matcher = DisambiguatorConfig {
            stream_key: key,
            ..DisambiguatorConfig::with_pattern(ProtocolPattern::GrpcMultiplexed)
        };
        let (records, stats) = disambiguate(matcher, out.events.clone());
        let mut got: Vec<(u64, u64)> = records.iter().map(|r| (r.start_ts, r.latency)).collect();
        got.sort_unstable();
        println!("{key:?}: exact={} {stats:?}", got == truth);
    }
    Ok(())
}
