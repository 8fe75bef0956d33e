//! Per-request latency and throughput from syscall and uprobe events.
//!
//! A server handling many requests at once leaves an interleaved stream of
//! `accept4`/`close`, `read`/`sendmsg` or gRPC stream events. This crate
//! pairs each request's start and end by the identifier both events carry
//! (a socket fd, or a transport and stream id), then keeps running RPS,
//! average and percentile latency per traced process.
//!
//! The pieces, bottom up:
//!
//! - [`event`]: probe kinds, request ids, and the 24-byte record wire format.
//! - [`trace_io`]: reading and writing text traces and a compact binary form.
//! - [`disambiguator`]: identifier-keyed matching, reorder repair, and
//!   protocol auto-detection.
//! - [`ring`]: a lock-free single-producer ring carrying finished records.
//! - [`metrics`]: the per-PID engine and its query API.
//! - [`sim`]: synthetic servers with known ground truth.
//! - [`cli`]: the `reqlens` command line.
//!
//! Runnable examples live under `examples/`:
//!
//! | example | shows |
//! |---|---|
//! | `replay_listing` | parsing a captured text trace and matching it |
//! | `disambiguate_interleaved` | concurrent requests completing out of order |
//! | `keepalive_fallback` | read/sendmsg cycles on persistent connections |
//! | `grpc_streams` | multiplexed gRPC streams on one transport |
//! | `metrics_api` | the tracing and query API |
//! | `ring_transport` | producer and consumer threads sharing a ring |
//! | `rate_sweep` | measured against true latency across load levels |
//! | `smr_polling` | periodic polling while a workload runs |

pub mod cli;
pub mod disambiguator;
pub mod event;
pub mod live;
pub mod metrics;
pub mod pipeline;
pub mod ring;
pub mod sim;
pub mod trace_io;

pub use disambiguator::{disambiguate, Disambiguator, DisambiguatorConfig, MatchStats, ProtocolPattern};
pub use event::{ProbeKind, RequestId, RequestRecord, TraceEvent, WIRE_RECORD_LEN};
pub use metrics::{MetricsEngine, MetricsError, MetricsState, Tracer, TracingOptions};
pub use pipeline::{measure, Measurement};
pub use sim::{simulate, sweep, GroundTruthLog, SimConfig, SimOutput};
