//! Bounded single-producer/single-consumer ring of 24-byte request records.
//!
//! Slots hold the encoded wire form, so a kernel-side producer writing the
//! same layout can stand in for [`RingProducer`]. Overflow drops the newest
//! record and counts it, the same as a failed reservation on a full kernel
//! ring.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::event::{RequestRecord, WireError, WIRE_RECORD_LEN};

pub const DEFAULT_RING_BYTES: usize = 128 * 1024;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RingError {
    #[error("ring capacity of {0} bytes cannot hold a single {WIRE_RECORD_LEN}-byte record")]
    TooSmall(usize),
}

#[repr(align(64))]
struct Padded<T>(T);

struct Shared {
    slots: Box<[UnsafeCell<[u8; WIRE_RECORD_LEN]>]>,
    capacity_bytes: usize,
    /// Next slot to read. Written only by the consumer.
    head: Padded<AtomicUsize>,
    /// Next slot to write. Written only by the producer.
    tail: Padded<AtomicUsize>,
    dropped: AtomicU64,
}

// Slots are only touched by the side that owns them according to head/tail;
// release stores publish the bytes before the cursor moves.
unsafe impl Sync for Shared {}
unsafe impl Send for Shared {}

impl Shared {
    fn slot(&self, pos: usize) -> *mut [u8; WIRE_RECORD_LEN] {
        self.slots[pos % self.slots.len()].get()
    }
}

/// Writing half. Exactly one exists per ring.
pub struct RingProducer {
    shared: Arc<Shared>,
}

/// Reading half. Exactly one exists per ring.
pub struct RingConsumer {
    shared: Arc<Shared>,
}

/// Allocate a ring of `capacity_bytes`, giving `capacity_bytes / 24` slots.
pub fn record_ring(capacity_bytes: usize) -> Result<(RingProducer, RingConsumer), RingError> {
    let slots = capacity_bytes / WIRE_RECORD_LEN;
    if slots == 0 {
        return Err(RingError::TooSmall(capacity_bytes));
    }
    let shared = Arc::new(Shared {
        slots: (0..slots).map(|_| UnsafeCell::new([0u8; WIRE_RECORD_LEN])).collect(),
        capacity_bytes,
        head: Padded(AtomicUsize::new(0)),
        tail: Padded(AtomicUsize::new(0)),
        dropped: AtomicU64::new(0),
    });
    Ok((
        RingProducer {
            shared: Arc::clone(&shared),
        },
        RingConsumer { shared },
    ))
}

impl RingProducer {
    /// Enqueue `record`; false (and one more drop) if the ring is full.
    pub fn push(&mut self, record: &RequestRecord) -> bool {
        self.push_bytes(&record.to_wire())
    }

    /// Enqueue an already-encoded record, e.g. one read from a kernel ring.
    pub fn push_wire(&mut self, bytes: &[u8]) -> Result<bool, WireError> {
        let bytes: &[u8; WIRE_RECORD_LEN] = bytes.try_into().map_err(|_| WireError::Length(bytes.len()))?;
        Ok(self.push_bytes(bytes))
    }

    fn push_bytes(&mut self, bytes: &[u8; WIRE_RECORD_LEN]) -> bool {
        let s = &*self.shared;
        let tail = s.tail.0.load(Ordering::Relaxed);
        let head = s.head.0.load(Ordering::Acquire);
        if tail.wrapping_sub(head) == s.slots.len() {
            s.dropped.fetch_add(1, Ordering::Relaxed);
            return false;
        }
        // SAFETY: the slot at `tail` is outside [head, tail) so the consumer
        // will not read it until the release store below.
        unsafe { *s.slot(tail) = *bytes };
        s.tail.0.store(tail.wrapping_add(1), Ordering::Release);
        true
    }

    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }

    pub fn capacity_slots(&self) -> usize {
        self.shared.slots.len()
    }

    pub fn len(&self) -> usize {
        len(&self.shared)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn len(s: &Shared) -> usize {
    let tail = s.tail.0.load(Ordering::Acquire);
    let head = s.head.0.load(Ordering::Acquire);
    tail.wrapping_sub(head)
}

impl RingConsumer {
    /// Remove and return up to `max` of the oldest records.
    pub fn poll(&mut self, max: usize) -> Vec<RequestRecord> {
        let mut out = Vec::new();
        self.poll_into(max, &mut out);
        out
    }

    /// Like [`poll`](Self::poll), appending to `out`. Returns how many were taken.
    pub fn poll_into(&mut self, max: usize, out: &mut Vec<RequestRecord>) -> usize {
        let s = &*self.shared;
        let head = s.head.0.load(Ordering::Relaxed);
        let tail = s.tail.0.load(Ordering::Acquire);
        let n = tail.wrapping_sub(head).min(max);
        out.reserve(n);
        for i in 0..n {
            // SAFETY: slots in [head, tail) were published by the producer's
            // release store and are not rewritten until head moves past them.
            let bytes = unsafe { *s.slot(head.wrapping_add(i)) };
            out.push(RequestRecord::from_wire(&bytes).expect("slot is exactly one record"));
        }
        s.head.0.store(head.wrapping_add(n), Ordering::Release);
        n
    }

    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }

    pub fn capacity_slots(&self) -> usize {
        self.shared.slots.len()
    }

    pub fn capacity_bytes(&self) -> usize {
        self.shared.capacity_bytes
    }

    pub fn len(&self) -> usize {
        len(&self.shared)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
