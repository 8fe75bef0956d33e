use std::collections::BTreeMap;

/// Ordered multiset of latencies, stored as value -> multiplicity.
#[derive(Clone, Debug, Default)]
pub struct Multiset {
    counts: BTreeMap<u64, u32>,
    len: usize,
}

impl Multiset {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, v: u64) {
        *self.counts.entry(v).or_insert(0) += 1;
        self.len += 1;
    }

    /// Remove one copy of `v`; false if absent.
    pub fn remove(&mut self, v: u64) -> bool {
        match self.counts.get_mut(&v) {
            Some(c) if *c > 1 => *c -= 1,
            Some(_) => {
                self.counts.remove(&v);
            }
            None => return false,
        }
        self.len -= 1;
        true
    }

    pub fn contains(&self, v: u64) -> bool {
        self.counts.contains_key(&v)
    }

    pub fn min(&self) -> Option<u64> {
        self.counts.first_key_value().map(|(v, _)| *v)
    }

    pub fn max(&self) -> Option<u64> {
        self.counts.last_key_value().map(|(v, _)| *v)
    }

    pub fn pop_min(&mut self) -> Option<u64> {
        let v = self.min()?;
        self.remove(v);
        Some(v)
    }

    pub fn pop_max(&mut self) -> Option<u64> {
        let v = self.max()?;
        self.remove(v);
        Some(v)
    }

    pub fn clear(&mut self) {
        self.counts.clear();
        self.len = 0;
    }

    /// All elements in ascending order, repeats included.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts
            .iter()
            .flat_map(|(v, c)| std::iter::repeat_n(*v, *c as usize))
    }
}
