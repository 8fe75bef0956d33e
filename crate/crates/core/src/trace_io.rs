//! Reading and writing trace-pipe text.
//!
//! Grammar, one event per line:
//!
//! ```text
//! <comm>-<tid> [<cpu>] <flags> <secs>.<frac>: bpf_trace_printk: <name>: pid=<n> (fd=<n>|retval=<n>)[ len=<n>][ buf="..."]
//! ```
//!
//! `<name>` is a syscall (`accept4`, `close`, `close return`, `read`, `readv`,
//! `recvfrom`, `sendto`, `sendmsg`, `writev`) or one of the gRPC uprobe names
//! `chttp2_stream` / `trailing_metadata_completion`, which take
//! `transport=<hex> stream=<n>` instead of an fd. Whitespace around `=` is
//! tolerated. Lines that do not match, or that name an unknown probe, are
//! skipped. Events keep arrival order; nothing here sorts.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::event::{ProbeKind, RequestId, TraceEvent};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("binary trace: {0}")]
    Binary(String),
}

fn line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*(?P<comm>.+)-(?P<tid>\d+)\s+\[(?P<cpu>\d+)\]\s+(?P<flags>\S+)\s+(?P<ts>\d+(?:\.\d+)?):\s+bpf_trace_printk:\s+(?P<name>[A-Za-z0-9_]+(?: return)?):\s*(?P<attrs>.*)$",
        )
        .unwrap()
    })
}

fn attr_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"(?P<key>[A-Za-z_]+)\s*=\s*(?P<val>"(?:[^"\\]|\\.)*"|\S+)"#).unwrap())
}

/// Decimal seconds to integer nanoseconds, rounding half up past the ninth digit.
fn parse_seconds(text: &str) -> Option<u64> {
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    let secs: u64 = whole.parse().ok()?;
    if !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut nanos: u64 = 0;
    for i in 0..9 {
        let digit = frac.as_bytes().get(i).map_or(0, |b| u64::from(b - b'0'));
        nanos = nanos * 10 + digit;
    }
    if frac.as_bytes().get(9).is_some_and(|b| *b >= b'5') {
        nanos += 1;
    }
    secs.checked_mul(1_000_000_000)?.checked_add(nanos)
}

fn kind_for(name: &str) -> Option<ProbeKind> {
    Some(match name {
        "accept4" | "accept" => ProbeKind::AcceptReturn,
        "close" => ProbeKind::CloseEntry,
        "close return" => ProbeKind::CloseReturn,
        "read" => ProbeKind::ReadEntry,
        "readv" => ProbeKind::ReadvEntry,
        "recvfrom" => ProbeKind::RecvEntry,
        "sendto" => ProbeKind::SendEntry,
        "sendmsg" => ProbeKind::SendmsgEntry,
        "writev" => ProbeKind::WritevEntry,
        "chttp2_stream" => ProbeKind::StreamCtor,
        "trailing_metadata_completion" => ProbeKind::TrailingMetaDone,
        _ => return None,
    })
}

fn name_for(kind: ProbeKind) -> &'static str {
    match kind {
        ProbeKind::AcceptReturn => "accept4",
        ProbeKind::CloseEntry => "close",
        ProbeKind::CloseReturn => "close return",
        ProbeKind::ReadEntry => "read",
        ProbeKind::ReadvEntry => "readv",
        ProbeKind::RecvEntry => "recvfrom",
        ProbeKind::SendEntry => "sendto",
        ProbeKind::SendmsgEntry => "sendmsg",
        ProbeKind::WritevEntry => "writev",
        ProbeKind::StreamCtor => "chttp2_stream",
        ProbeKind::TrailingMetaDone => "trailing_metadata_completion",
    }
}

fn num<T: std::str::FromStr>(attrs: &HashMap<&str, &str>, key: &str, line: usize) -> Result<Option<T>, TraceError> {
    match attrs.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| TraceError::Parse {
            line,
            reason: format!("bad {key} value {v:?}"),
        }),
    }
}

fn required<T>(value: Option<T>, key: &str, line: usize) -> Result<T, TraceError> {
    value.ok_or_else(|| TraceError::Parse {
        line,
        reason: format!("missing {key}"),
    })
}

fn parse_hex_or_dec(v: &str) -> Option<u64> {
    match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => v.parse().ok(),
    }
}

/// Parse one line. `Ok(None)` means the line is not a recognized event.
///
/// `line_no` is only used in error messages.
pub fn parse_line(text: &str, line_no: usize) -> Result<Option<TraceEvent>, TraceError> {
    let Some(caps) = line_re().captures(text) else {
        return Ok(None);
    };
    let Some(kind) = kind_for(&caps["name"]) else {
        return Ok(None);
    };
    let bad = |reason: String| TraceError::Parse { line: line_no, reason };

    let timestamp = parse_seconds(&caps["ts"]).ok_or_else(|| bad(format!("bad timestamp {:?}", &caps["ts"])))?;
    let tid: u32 = caps["tid"].parse().map_err(|_| bad(format!("bad tid {:?}", &caps["tid"])))?;

    let attrs: HashMap<&str, &str> = attr_re()
        .captures_iter(caps.name("attrs").unwrap().as_str())
        .map(|c| (c.name("key").unwrap().as_str(), c.name("val").unwrap().as_str()))
        .collect();

    let pid: u32 = required(num(&attrs, "pid", line_no)?, "pid", line_no)?;
    let payload_len: Option<u32> = num(&attrs, "len", line_no)?;

    let id = if kind.is_stream_kind() {
        let transport_text = required(attrs.get("transport"), "transport", line_no)?;
        let transport =
            parse_hex_or_dec(transport_text).ok_or_else(|| bad(format!("bad transport value {transport_text:?}")))?;
        let stream: u32 = required(num(&attrs, "stream", line_no)?, "stream", line_no)?;
        RequestId::Stream { transport, stream }
    } else {
        let fd: i64 = match kind {
            ProbeKind::AcceptReturn | ProbeKind::CloseReturn => {
                required(num(&attrs, "retval", line_no)?, "retval", line_no)?
            }
            _ => required(num(&attrs, "fd", line_no)?, "fd", line_no)?,
        };
        // A negative return is a failed call, not an identifier.
        if fd < 0 {
            return Ok(None);
        }
        let fd = u32::try_from(fd).map_err(|_| bad(format!("fd {fd} out of range")))?;
        RequestId::FileDescriptor(fd)
    };

    Ok(Some(TraceEvent {
        timestamp,
        pid,
        tid: Some(tid),
        kind,
        id,
        payload_len,
    }))
}

/// Parse every line of `source`, dropping skipped lines. Line numbers in
/// errors are 1-based.
pub fn read_trace<R: BufRead>(source: R) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events = Vec::new();
    for (i, line) in source.lines().enumerate() {
        if let Some(ev) = parse_line(&line?, i + 1)? {
            events.push(ev);
        }
    }
    Ok(events)
}

/// Same as [`read_trace`] over an in-memory string.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>, TraceError> {
    read_trace(text.as_bytes())
}

/// Render one event as a trace-pipe line. `comm`, cpu and flags are synthesized.
pub fn format_line(ev: &TraceEvent) -> String {
    let secs = ev.timestamp / 1_000_000_000;
    let nanos = ev.timestamp % 1_000_000_000;
    let tid = ev.tid.unwrap_or(ev.pid);
    let mut line = format!(
        "server-{tid} [000] d...1 {secs}.{nanos:09}: bpf_trace_printk: {}: pid={}",
        name_for(ev.kind),
        ev.pid
    );
    match (ev.kind, ev.id) {
        (_, RequestId::Stream { transport, stream }) => {
            line.push_str(&format!(" transport={transport:#x} stream={stream}"));
        }
        (ProbeKind::AcceptReturn | ProbeKind::CloseReturn, RequestId::FileDescriptor(fd)) => {
            line.push_str(&format!(" retval={fd}"));
        }
        (_, RequestId::FileDescriptor(fd)) => line.push_str(&format!(" fd={fd}")),
    }
    if let Some(len) = ev.payload_len {
        line.push_str(&format!(" len={len}"));
    }
    line
}

pub fn write_trace<W: Write>(mut out: W, events: &[TraceEvent]) -> io::Result<()> {
    for ev in events {
        writeln!(out, "{}", format_line(ev))?;
    }
    Ok(())
}

/// Size of one event in the raw binary trace format.
pub const BINARY_EVENT_LEN: usize = 32;

fn kind_code(kind: ProbeKind) -> u8 {
    ProbeKind::ALL.iter().position(|k| *k == kind).unwrap() as u8
}

/// Raw binary event layout, little-endian, 32 bytes:
/// `timestamp u64 | pid u32 | kind u8 | id_tag u8 | pad u16 | fd-or-transport u64 | stream u32 | len u32`.
/// `len = u32::MAX` encodes an absent payload length. Thread ids are not kept.
pub fn encode_event(ev: &TraceEvent) -> [u8; BINARY_EVENT_LEN] {
    let mut out = [0u8; BINARY_EVENT_LEN];
    out[0..8].copy_from_slice(&ev.timestamp.to_le_bytes());
    out[8..12].copy_from_slice(&ev.pid.to_le_bytes());
    out[12] = kind_code(ev.kind);
    let (tag, a, b) = match ev.id {
        RequestId::FileDescriptor(fd) => (0u8, u64::from(fd), 0u32),
        RequestId::Stream { transport, stream } => (1u8, transport, stream),
    };
    out[13] = tag;
    out[16..24].copy_from_slice(&a.to_le_bytes());
    out[24..28].copy_from_slice(&b.to_le_bytes());
    out[28..32].copy_from_slice(&ev.payload_len.unwrap_or(u32::MAX).to_le_bytes());
    out
}

pub fn decode_event(bytes: &[u8; BINARY_EVENT_LEN]) -> Result<TraceEvent, TraceError> {
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let kind = *ProbeKind::ALL
        .get(bytes[12] as usize)
        .ok_or_else(|| TraceError::Binary(format!("unknown probe kind {}", bytes[12])))?;
    let id = match bytes[13] {
        0 => RequestId::FileDescriptor(
            u32::try_from(u64_at(16)).map_err(|_| TraceError::Binary("fd out of range".into()))?,
        ),
        1 => RequestId::Stream {
            transport: u64_at(16),
            stream: u32_at(24),
        },
        t => return Err(TraceError::Binary(format!("unknown id tag {t}"))),
    };
    let len = u32_at(28);
    let mut ev = TraceEvent::new(u64_at(0), u32_at(8), kind, id).map_err(|e| TraceError::Binary(e.to_string()))?;
    ev.payload_len = (len != u32::MAX).then_some(len);
    Ok(ev)
}

pub fn write_binary<W: Write>(mut out: W, events: &[TraceEvent]) -> io::Result<()> {
    for ev in events {
        out.write_all(&encode_event(ev))?;
    }
    Ok(())
}

pub fn read_binary(bytes: &[u8]) -> Result<Vec<TraceEvent>, TraceError> {
    if !bytes.len().is_multiple_of(BINARY_EVENT_LEN) {
        return Err(TraceError::Binary(format!(
            "length {} is not a multiple of {BINARY_EVENT_LEN}",
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(BINARY_EVENT_LEN)
        .map(|c| decode_event(c.try_into().unwrap()))
        .collect()
}
