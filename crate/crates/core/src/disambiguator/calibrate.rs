use std::collections::HashSet;

use thiserror::Error;

use super::ProtocolPattern;
use crate::event::{ProbeKind, ProbeRole, RequestId, TraceEvent};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalibrationError {
    #[error("calibration window holds no start-kind events")]
    Inconclusive,
}

/// Pick a matching pattern from a window of timestamp-ordered events.
///
/// - Any `StreamCtor` selects [`ProtocolPattern::GrpcMultiplexed`].
/// - Otherwise, for fds opened by `AcceptReturn` inside the window, count
///   completed `ReadEntry -> SendmsgEntry` cycles with no `CloseEntry` in
///   between, and completed `AcceptReturn -> CloseEntry` pairs. More cycles
///   than pairs is the deferred-close signature and selects
///   [`ProtocolPattern::Http1ReadSendmsg`].
/// - Everything else is [`ProtocolPattern::Http1AcceptClose`].
pub fn calibrate(window: &[TraceEvent]) -> Result<ProtocolPattern, CalibrationError> {
    if window.iter().any(|e| e.kind == ProbeKind::StreamCtor) {
        return Ok(ProtocolPattern::GrpcMultiplexed);
    }
    if !window.iter().any(|e| e.kind.role() == ProbeRole::Start) {
        return Err(CalibrationError::Inconclusive);
    }

    let mut accepted: HashSet<(u32, u32)> = HashSet::new();
    let mut open: HashSet<(u32, u32)> = HashSet::new();
    let mut reading: HashSet<(u32, u32)> = HashSet::new();
    let mut cycles = 0usize;
    let mut pairs = 0usize;

    for ev in window {
        let RequestId::FileDescriptor(fd) = ev.id else { continue };
        let key = (ev.pid, fd);
        match ev.kind {
            ProbeKind::AcceptReturn => {
                accepted.insert(key);
                open.insert(key);
                reading.remove(&key);
            }
            ProbeKind::ReadEntry if accepted.contains(&key) => {
                reading.insert(key);
            }
            ProbeKind::SendmsgEntry => {
                if reading.remove(&key) {
                    cycles += 1;
                }
            }
            ProbeKind::CloseEntry => {
                if open.remove(&key) {
                    pairs += 1;
                }
                reading.remove(&key);
            }
            _ => {}
        }
    }

    log::debug!("calibration: {cycles} read/sendmsg cycles, {pairs} accept/close pairs");
    Ok(if cycles > pairs {
        ProtocolPattern::Http1ReadSendmsg
    } else {
        ProtocolPattern::Http1AcceptClose
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ProbeKind::*;

    fn fd(ts: u64, kind: ProbeKind, fd: u32) -> TraceEvent {
        TraceEvent::fd(ts, 1, kind, fd)
    }

    #[test]
    fn accept_close_pairs() {
        let w: Vec<_> = (0..10)
            .flat_map(|i| [fd(i * 10, AcceptReturn, 5), fd(i * 10 + 5, CloseEntry, 5)])
            .collect();
        assert_eq!(calibrate(&w), Ok(ProtocolPattern::Http1AcceptClose));
    }

    #[test]
    fn keepalive_without_closes() {
        let mut w = vec![fd(0, AcceptReturn, 7), fd(0, AcceptReturn, 8)];
        for i in 1..50 {
            let f = 7 + (i % 2) as u32;
            w.push(fd(i * 10, ReadEntry, f));
            w.push(fd(i * 10 + 1, ReadEntry, f));
            w.push(fd(i * 10 + 5, SendmsgEntry, f));
        }
        assert_eq!(calibrate(&w), Ok(ProtocolPattern::Http1ReadSendmsg));
    }

    #[test]
    fn per_request_read_sendmsg_inside_accept_close_stays_accept_close() {
        let w: Vec<_> = (0..10)
            .flat_map(|i| {
                [
                    fd(i * 10, AcceptReturn, 5),
                    fd(i * 10 + 1, ReadEntry, 5),
                    fd(i * 10 + 2, SendmsgEntry, 5),
                    fd(i * 10 + 3, CloseEntry, 5),
                ]
            })
            .collect();
        assert_eq!(calibrate(&w), Ok(ProtocolPattern::Http1AcceptClose));
    }

    #[test]
    fn stream_ctor_wins() {
        let w = vec![fd(0, AcceptReturn, 3), TraceEvent::stream(1, 1, StreamCtor, 9, 1)];
        assert_eq!(calibrate(&w), Ok(ProtocolPattern::GrpcMultiplexed));
    }

    #[test]
    fn no_starts_is_inconclusive() {
        let w = vec![fd(0, CloseEntry, 3), fd(1, RecvEntry, 3)];
        assert_eq!(calibrate(&w), Err(CalibrationError::Inconclusive));
        assert_eq!(calibrate(&[]), Err(CalibrationError::Inconclusive));
    }

    #[test]
    fn reads_on_unaccepted_fds_are_not_counted() {
        let mut w = vec![fd(0, AcceptReturn, 3), fd(1, CloseEntry, 3)];
        for i in 0..20 {
            w.push(fd(10 + i * 3, ReadEntry, 99));
            w.push(fd(11 + i * 3, SendmsgEntry, 99));
        }
        assert_eq!(calibrate(&w), Ok(ProtocolPattern::Http1AcceptClose));
    }
}
