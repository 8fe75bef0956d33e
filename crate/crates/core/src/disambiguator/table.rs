use std::collections::{HashMap, VecDeque};

use crate::event::RequestId;

/// Key of an in-flight request.
pub type OpenKey = (u32, RequestId);

/// In-flight requests: identifier to start timestamp, with a capacity bound.
///
/// When full, inserting a new key evicts the entry that was inserted
/// earliest. Eviction order is tracked with a lazily-pruned queue so every
/// operation stays amortized O(1).
#[derive(Debug)]
pub struct OpenRequestTable {
    entries: HashMap<OpenKey, (u64, u64)>,
    order: VecDeque<(u64, OpenKey)>,
    next_gen: u64,
    capacity: usize,
}

/// Outcome of [`OpenRequestTable::insert`].
#[derive(Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// The key was already in flight; its start was overwritten.
    Replaced { previous_start: u64 },
    /// Inserted after evicting the oldest entry to respect the capacity.
    Evicted { key: OpenKey, start: u64 },
}

pub const DEFAULT_TABLE_CAPACITY: usize = 65_536;

impl Default for OpenRequestTable {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_TABLE_CAPACITY)
    }
}

impl OpenRequestTable {
    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "open-request table capacity must be positive");
        OpenRequestTable {
            entries: HashMap::new(),
            order: VecDeque::new(),
            next_gen: 0,
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, key: &OpenKey) -> Option<u64> {
        self.entries.get(key).map(|(start, _)| *start)
    }

    pub fn contains(&self, key: &OpenKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn insert(&mut self, key: OpenKey, start: u64) -> InsertOutcome {
        let gen = self.next_gen;
        self.next_gen += 1;
        if let Some(slot) = self.entries.get_mut(&key) {
            let previous_start = slot.0;
            *slot = (start, gen);
            self.order.push_back((gen, key));
            self.compact();
            return InsertOutcome::Replaced { previous_start };
        }
        let evicted = if self.entries.len() >= self.capacity {
            self.evict_oldest()
        } else {
            None
        };
        self.entries.insert(key, (start, gen));
        self.order.push_back((gen, key));
        self.compact();
        match evicted {
            Some((key, start)) => InsertOutcome::Evicted { key, start },
            None => InsertOutcome::Inserted,
        }
    }

    pub fn remove(&mut self, key: &OpenKey) -> Option<u64> {
        let start = self.entries.remove(key).map(|(start, _)| start);
        self.compact();
        start
    }

    fn evict_oldest(&mut self) -> Option<(OpenKey, u64)> {
        while let Some((gen, key)) = self.order.pop_front() {
            if let Some(&(start, live_gen)) = self.entries.get(&key) {
                if live_gen == gen {
                    self.entries.remove(&key);
                    return Some((key, start));
                }
            }
        }
        None
    }

    // Dead queue entries accumulate on every remove/replace; rebuild once
    // they outnumber the live ones.
    fn compact(&mut self) {
        if self.order.len() > 2 * self.entries.len() + 64 {
            let entries = &self.entries;
            self.order
                .retain(|(gen, key)| entries.get(key).is_some_and(|(_, live)| live == gen));
        }
    }
}
