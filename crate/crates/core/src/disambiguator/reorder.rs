use std::collections::BTreeMap;

use crate::event::TraceEvent;

/// Bounded reorder window over event time.
///
/// Events are held until the newest timestamp seen is more than `window_ns`
/// ahead of them, then released in `(timestamp, arrival)` order. Ties keep
/// arrival order.
#[derive(Debug)]
pub struct ReorderBuffer {
    window_ns: u64,
    pending: BTreeMap<(u64, u64), TraceEvent>,
    seq: u64,
    newest: Option<u64>,
}

impl ReorderBuffer {
    pub fn new(window_ns: u64) -> Self {
        ReorderBuffer {
            window_ns,
            pending: BTreeMap::new(),
            seq: 0,
            newest: None,
        }
    }

    pub fn window_ns(&self) -> u64 {
        self.window_ns
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Buffer `ev` and pass every event that is now safe to release to `out`.
    pub fn push(&mut self, ev: TraceEvent, mut out: impl FnMut(TraceEvent)) {
        let newest = self.newest.map_or(ev.timestamp, |n| n.max(ev.timestamp));
        self.newest = Some(newest);
        self.pending.insert((ev.timestamp, self.seq), ev);
        self.seq += 1;
        while let Some(entry) = self.pending.first_entry() {
            let ts = entry.key().0;
            if newest - ts > self.window_ns {
                out(entry.remove());
            } else {
                break;
            }
        }
    }

    /// Release everything still buffered.
    pub fn drain(&mut self, mut out: impl FnMut(TraceEvent)) {
        while let Some((_, ev)) = self.pending.pop_first() {
            out(ev);
        }
    }
}
