//! Event and record types shared by every stage of the pipeline.
//!
//! A [`TraceEvent`] is one probe firing as seen from outside the server
//! process. A [`RequestRecord`] is what the matcher produces once a start
//! and an end event with the same identifier have been paired; it is the
//! only thing that crosses the ring transport, in the fixed 24-byte layout
//! implemented by [`RequestRecord::to_wire`] / [`RequestRecord::from_wire`].

use std::fmt;

use thiserror::Error;

/// Size in bytes of one encoded [`RequestRecord`].
pub const WIRE_RECORD_LEN: usize = 24;

/// Which probe produced an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProbeKind {
    /// Return of `accept4`; the returned fd opens a connection.
    AcceptReturn,
    /// Entry of `close`; carries the fd being released.
    CloseEntry,
    /// Return of `close`; carries only the return value.
    CloseReturn,
    ReadEntry,
    SendmsgEntry,
    /// `recvfrom`.
    RecvEntry,
    /// `sendto`.
    SendEntry,
    WritevEntry,
    ReadvEntry,
    /// gRPC core stream construction (uprobe).
    StreamCtor,
    /// gRPC core trailing-metadata completion (uprobe).
    TrailingMetaDone,
}

/// Role a probe kind plays in the probe/boundary table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeRole {
    Start,
    End,
    Auxiliary,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 11] = [
        ProbeKind::AcceptReturn,
        ProbeKind::CloseEntry,
        ProbeKind::CloseReturn,
        ProbeKind::ReadEntry,
        ProbeKind::SendmsgEntry,
        ProbeKind::RecvEntry,
        ProbeKind::SendEntry,
        ProbeKind::WritevEntry,
        ProbeKind::ReadvEntry,
        ProbeKind::StreamCtor,
        ProbeKind::TrailingMetaDone,
    ];

    pub fn role(self) -> ProbeRole {
        match self {
            ProbeKind::AcceptReturn | ProbeKind::ReadEntry | ProbeKind::StreamCtor => ProbeRole::Start,
            ProbeKind::CloseEntry | ProbeKind::SendmsgEntry | ProbeKind::TrailingMetaDone => {
                ProbeRole::End
            }
            ProbeKind::CloseReturn
            | ProbeKind::RecvEntry
            | ProbeKind::SendEntry
            | ProbeKind::WritevEntry
            | ProbeKind::ReadvEntry => ProbeRole::Auxiliary,
        }
    }

    /// True for the uprobe kinds keyed by transport and stream.
    pub fn is_stream_kind(self) -> bool {
        matches!(self, ProbeKind::StreamCtor | ProbeKind::TrailingMetaDone)
    }
}

/// Identifier that ties a request's start event to its end event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RequestId {
    /// A socket file descriptor. Never negative: a `-1` return is an error
    /// value, not an identifier, and is rejected before this point.
    FileDescriptor(u32),
    /// An HTTP/2 stream inside a gRPC transport.
    Stream { transport: u64, stream: u32 },
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RequestId::FileDescriptor(fd) => write!(f, "fd {fd}"),
            RequestId::Stream { transport, stream } => {
                write!(f, "transport {transport:#x} stream {stream}")
            }
        }
    }
}

/// One probe firing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    /// Nanoseconds since the capture epoch.
    pub timestamp: u64,
    pub pid: u32,
    /// Thread id, when the source knows it. The matcher never looks at it.
    pub tid: Option<u32>,
    pub kind: ProbeKind,
    pub id: RequestId,
    pub payload_len: Option<u32>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("{kind:?} events must carry a {expected} identifier, got {id}")]
    IdKindMismatch {
        kind: ProbeKind,
        id: RequestId,
        expected: &'static str,
    },
}

impl TraceEvent {
    pub fn new(timestamp: u64, pid: u32, kind: ProbeKind, id: RequestId) -> Result<Self, EventError> {
        let consistent = match id {
            RequestId::FileDescriptor(_) => !kind.is_stream_kind(),
            RequestId::Stream { .. } => kind.is_stream_kind(),
        };
        if !consistent {
            return Err(EventError::IdKindMismatch {
                kind,
                id,
                expected: if kind.is_stream_kind() { "stream" } else { "file-descriptor" },
            });
        }
        Ok(TraceEvent {
            timestamp,
            pid,
            tid: None,
            kind,
            id,
            payload_len: None,
        })
    }

    /// Socket event keyed by `fd`. Panics if `kind` is a stream kind.
    pub fn fd(timestamp: u64, pid: u32, kind: ProbeKind, fd: u32) -> Self {
        Self::new(timestamp, pid, kind, RequestId::FileDescriptor(fd)).expect("socket probe kind")
    }

    /// Stream event keyed by `(transport, stream)`. Panics if `kind` is a socket kind.
    pub fn stream(timestamp: u64, pid: u32, kind: ProbeKind, transport: u64, stream: u32) -> Self {
        Self::new(timestamp, pid, kind, RequestId::Stream { transport, stream })
            .expect("stream probe kind")
    }

    pub fn with_tid(mut self, tid: u32) -> Self {
        self.tid = Some(tid);
        self
    }

    pub fn with_payload_len(mut self, len: u32) -> Self {
        self.payload_len = Some(len);
        self
    }
}

/// A completed request: when it started on the server, how long it took,
/// and which process served it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RequestRecord {
    pub start_ts: u64,
    pub latency: u64,
    pub pid: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed record: expected {WIRE_RECORD_LEN} bytes, got {0}")]
    Length(usize),
}

impl RequestRecord {
    pub fn new(start_ts: u64, latency: u64, pid: u32) -> Self {
        RequestRecord {
            start_ts,
            latency,
            pid,
        }
    }

    pub fn end_ts(&self) -> u64 {
        self.start_ts.saturating_add(self.latency)
    }

    /// Little-endian `start_ts: u64 | latency: u64 | pid: u32 | reserved: u32 = 0`.
    pub fn to_wire(&self) -> [u8; WIRE_RECORD_LEN] {
        let mut out = [0u8; WIRE_RECORD_LEN];
        out[0..8].copy_from_slice(&self.start_ts.to_le_bytes());
        out[8..16].copy_from_slice(&self.latency.to_le_bytes());
        out[16..20].copy_from_slice(&self.pid.to_le_bytes());
        out
    }

    /// Inverse of [`to_wire`](Self::to_wire). The reserved word is ignored.
    pub fn from_wire(bytes: &[u8]) -> Result<Self, WireError> {
        let bytes: &[u8; WIRE_RECORD_LEN] = bytes.try_into().map_err(|_| WireError::Length(bytes.len()))?;
        Ok(RequestRecord {
            start_ts: u64::from_le_bytes(bytes[0..8].try_into().unwrap()),
            latency: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            pid: u32::from_le_bytes(bytes[16..20].try_into().unwrap()),
        })
    }
}
