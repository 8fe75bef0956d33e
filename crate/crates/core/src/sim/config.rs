use serde::{Deserialize, Serialize};

use super::SimError;
use crate::disambiguator::ProtocolPattern;

/// How requests arrive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Arrival {
    /// Poisson arrivals at `rate` requests per second.
    Open { rate: f64 },
    /// `concurrency` clients, each sending its next request `think_ns`
    /// after the previous response.
    Closed { concurrency: usize, think_ns: u64 },
    /// Fixed arrival times; the stop condition is ignored.
    Explicit { times_ns: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ServiceTime {
    Constant { ns: u64 },
    LogNormal { median_ns: u64, sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Stop {
    /// Generate arrivals while arrival time is below `ns`.
    Duration { ns: u64 },
    Requests { count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeepaliveConfig {
    pub reads_per_request: u32,
    /// Close every connection once, after the last response.
    pub bulk_close: bool,
}

impl Default for KeepaliveConfig {
    fn default() -> Self {
        KeepaliveConfig {
            reads_per_request: 2,
            bulk_close: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpcConfig {
    pub transports: usize,
    pub first_stream: u32,
    pub stride: u32,
    /// Opaque id of the first transport; later ones step by 0x1000.
    pub transport_base: u64,
}

impl Default for GrpcConfig {
    fn default() -> Self {
        GrpcConfig {
            transports: 1,
            first_stream: 1,
            stride: 2,
            transport_base: 0x7f3a_0000_1000,
        }
    }
}

/// Everything needed to generate one synthetic trace.
///
/// Defaults describe a synthetic server, not any measured workload: 8
/// workers, Poisson arrivals at 100 RPS for 10 s, lognormal service times
/// with a 5 ms median.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    #[serde(with = "pattern_name")]
    pub protocol: ProtocolPattern,
    pub pid: u32,
    pub workers: usize,
    pub arrival: Arrival,
    pub service: ServiceTime,
    pub stop: Stop,
    /// Lowest fd handed out by the pool.
    pub base_fd: u32,
    pub keepalive: KeepaliveConfig,
    pub grpc: GrpcConfig,
    /// Maximum delay, in ns, between an event's timestamp and its place in
    /// the output order. Events sharing an identifier keep their relative
    /// order. Zero keeps output in timestamp order.
    pub jitter_ns: u64,
    /// Gap between a worker finishing and picking up a queued request.
    pub handoff_ns: u64,
    /// Emit recv/writev/readv/close-return events alongside the boundary events.
    pub aux_events: bool,
    /// Constant network delay added to client-observed latency.
    pub client_offset_ns: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            protocol: ProtocolPattern::Http1AcceptClose,
            pid: 4242,
            workers: 8,
            arrival: Arrival::Open { rate: 100.0 },
            service: ServiceTime::LogNormal {
                median_ns: 5_000_000,
                sigma: 0.6,
            },
            stop: Stop::Duration { ns: 10_000_000_000 },
            base_fd: 63,
            keepalive: KeepaliveConfig::default(),
            grpc: GrpcConfig::default(),
            jitter_ns: 0,
            handoff_ns: 1_000,
            aux_events: true,
            client_offset_ns: 0,
            seed: 1,
        }
    }
}

mod pattern_name {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::disambiguator::ProtocolPattern;

    pub fn serialize<S: Serializer>(p: &ProtocolPattern, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(p.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ProtocolPattern, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidConfig(msg.to_string()));
        if self.protocol == ProtocolPattern::Auto {
            return bad("protocol must be a concrete pattern, not auto");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        match &self.arrival {
            Arrival::Open { rate } if !(rate.is_finite() && *rate > 0.0) => return bad("arrival rate must be positive"),
            Arrival::Closed { concurrency: 0, .. } => return bad("closed-loop concurrency must be at least 1"),
            _ => {}
        }
        match &self.service {
            ServiceTime::Constant { ns: 0 } => return bad("constant service time must be positive"),
            ServiceTime::LogNormal { median_ns, sigma } if *median_ns == 0 || !(sigma.is_finite() && *sigma > 0.0) => {
                return bad("lognormal median and sigma must be positive")
            }
            _ => {}
        }
        match self.stop {
            Stop::Duration { ns: 0 } => return bad("duration must be positive"),
            Stop::Requests { count: 0 } => return bad("request count must be positive"),
            _ => {}
        }
        if self.keepalive.reads_per_request == 0 {
            return bad("reads_per_request must be at least 1");
        }
        if self.grpc.transports == 0 || self.grpc.stride == 0 {
            return bad("grpc transports and stride must be positive");
        }
        Ok(())
    }
}
