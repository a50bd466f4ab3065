//! Private SRAM caches above the LLC: plain LRU, tags only.

#[derive(Debug, Clone, Copy, Default)]
struct Entry {
    line: u64,
    valid: bool,
    dirty: bool,
    stamp: u64,
}

#[derive(Debug, Clone)]
pub struct UpperCache {
    sets: usize,
    ways: usize,
    entries: Vec<Entry>,
    stamp: u64,
}

impl UpperCache {
    /// `None` when `bytes` is zero (level disabled).
    pub fn new(bytes: u64, line_bytes: u32, ways: u32) -> Option<Self> {
        if bytes == 0 {
            return None;
        }
        let ways = ways.max(1) as usize;
        let sets = ((bytes / u64::from(line_bytes)) as usize / ways).max(1);
        Some(Self { sets, ways, entries: vec![Entry::default(); sets * ways], stamp: 0 })
    }

    fn set_range(&self, line: u64) -> std::ops::Range<usize> {
        let s = (line % self.sets as u64) as usize;
        s * self.ways..(s + 1) * self.ways
    }

    fn find(&self, line: u64) -> Option<usize> {
        self.set_range(line).find(|&i| self.entries[i].valid && self.entries[i].line == line)
    }

    pub fn contains(&self, line: u64) -> bool {
        self.find(line).is_some()
    }

    pub fn is_dirty(&self, line: u64) -> bool {
        self.find(line).is_some_and(|i| self.entries[i].dirty)
    }

    /// Probe and update recency on a hit.
    pub fn probe(&mut self, line: u64) -> bool {
        match self.find(line) {
            Some(i) => {
                self.stamp += 1;
                self.entries[i].stamp = self.stamp;
                true
            }
            None => false,
        }
    }

    pub fn mark_dirty(&mut self, line: u64) {
        if let Some(i) = self.find(line) {
            self.entries[i].dirty = true;
        }
    }

    /// Install a line that is not present; returns the victim `(line, dirty)`.
    pub fn insert(&mut self, line: u64, dirty: bool) -> Option<(u64, bool)> {
        debug_assert!(!self.contains(line));
        let range = self.set_range(line);
        let slot = range
            .clone()
            .find(|&i| !self.entries[i].valid)
            .or_else(|| range.min_by_key(|&i| self.entries[i].stamp))
            .expect("non-empty set");
        let old = self.entries[slot];
        self.stamp += 1;
        self.entries[slot] = Entry { line, valid: true, dirty, stamp: self.stamp };
        old.valid.then_some((old.line, old.dirty))
    }

    /// Drop a line; returns whether it was dirty.
    pub fn invalidate(&mut self, line: u64) -> Option<bool> {
        let i = self.find(line)?;
        let dirty = self.entries[i].dirty;
        self.entries[i] = Entry::default();
        Some(dirty)
    }

    pub fn lines(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().filter(|e| e.valid).map(|e| e.line)
    }
}
