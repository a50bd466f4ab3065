//! Write wear, ECC-limited line death and lifetime extrapolation.
//!
//! Every line write drives all cells of the line, so the per-cell write count
//! of a domain equals the row's write count for that domain. Only the per-cell
//! endurance limits differ, which keeps per-cell tracking exact with one
//! counter per row and domain plus a sorted limit list.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::device::Domain;

/// Physical layout of a cache row, which decides how domains map to lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowLayout {
    /// One line in the hard domains, one in the soft domains.
    Stripped,
    /// Single-level cells: one line, tracked as the soft domain.
    Slc,
    /// One line spread over both domains of half as many cells.
    Stacked,
}

impl RowLayout {
    pub fn ways_per_row(self) -> usize {
        match self {
            RowLayout::Stripped => 2,
            RowLayout::Slc | RowLayout::Stacked => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnduranceConfig {
    /// Correctable faulty bits per line.
    pub ecc_bits: u32,
    /// A set fails once it has more than this many dead ways.
    pub dead_ways_to_fail: u32,
    /// Lognormal sigma of per-cell limits; 0 makes every cell identical.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for EnduranceConfig {
    fn default() -> Self {
        Self { ecc_bits: 5, dead_ways_to_fail: 4, sigma: 0.0, seed: 1 }
    }
}

/// ECC gives up once more than `ecc_bits` bits of a line are faulty.
pub fn line_dead(faulty_bits: u32, ecc_bits: u32) -> bool {
    faulty_bits > ecc_bits
}

/// Endurance limits of the cells of one row domain.
#[derive(Debug, Clone, PartialEq)]
pub enum CellLimits {
    Uniform(u64),
    /// Sorted ascending, one entry per cell.
    Sampled(Vec<u64>),
}

impl CellLimits {
    /// Cells whose write count exceeds their limit.
    pub fn faulty(&self, writes: u64, cells: u32) -> u32 {
        match self {
            CellLimits::Uniform(limit) => {
                if writes > *limit {
                    cells
                } else {
                    0
                }
            }
            CellLimits::Sampled(limits) => limits.partition_point(|&l| l < writes) as u32,
        }
    }

    /// `n`-th smallest limit (0-based).
    fn nth(&self, n: usize) -> Option<u64> {
        match self {
            CellLimits::Uniform(limit) => Some(*limit),
            CellLimits::Sampled(limits) => limits.get(n).copied(),
        }
    }

    fn sample(median: u64, cells: u32, sigma: f64, rng: &mut ChaCha8Rng) -> Self {
        if sigma <= 0.0 {
            return CellLimits::Uniform(median);
        }
        let dist = LogNormal::new((median as f64).ln(), sigma).expect("sigma is positive");
        let mut limits: Vec<u64> =
            (0..cells).map(|_| (dist.sample(rng).round() as u64).max(1)).collect();
        limits.sort_unstable();
        CellLimits::Sampled(limits)
    }
}

#[derive(Debug, Clone)]
struct RowWear {
    hard_writes: u64,
    soft_writes: u64,
    hard: CellLimits,
    soft: CellLimits,
    dead: [bool; 2],
}

/// Dead lines and failed sets observed so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub dead_lines: BTreeSet<(usize, usize)>,
    pub failed_sets: BTreeSet<usize>,
    /// Total domain writes in the array when the first set failed.
    pub first_failure_write_count: Option<u64>,
}

/// Line-death notification from [`WearTracker::record_write`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineDeath {
    pub set: usize,
    pub way: usize,
    /// This death pushed the set past the failure threshold.
    pub set_failed: bool,
}

/// Linear time-to-failure projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeEstimate {
    /// `None` when nothing is being written (unbounded lifetime).
    pub seconds: Option<f64>,
    pub limiting_set: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct WearTracker {
    layout: RowLayout,
    rows_per_set: usize,
    line_bits: u32,
    config: EnduranceConfig,
    rows: Vec<RowWear>,
    dead_per_set: Vec<u32>,
    failure: FailureRecord,
    total_writes: u64,
}

impl WearTracker {
    /// `hard_limit` / `soft_limit` are the median per-cell endurances; for
    /// [`RowLayout::Slc`] pass the SLC endurance as `soft_limit`.
    pub fn new(
        layout: RowLayout,
        sets: usize,
        rows_per_set: usize,
        line_bits: u32,
        hard_limit: u64,
        soft_limit: u64,
        config: EnduranceConfig,
    ) -> Self {
        let cells = cells_per_domain(layout, line_bits);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let rows = (0..sets * rows_per_set)
            .map(|_| RowWear {
                hard_writes: 0,
                soft_writes: 0,
                hard: CellLimits::sample(hard_limit, cells, config.sigma, &mut rng),
                soft: CellLimits::sample(soft_limit, cells, config.sigma, &mut rng),
                dead: [false; 2],
            })
            .collect();
        Self {
            layout,
            rows_per_set,
            line_bits,
            config,
            rows,
            dead_per_set: vec![0; sets],
            failure: FailureRecord::default(),
            total_writes: 0,
        }
    }

    pub fn config(&self) -> &EnduranceConfig {
        &self.config
    }

    pub fn layout(&self) -> RowLayout {
        self.layout
    }

    /// Replace the limits of one row domain, e.g. to stage a failure.
    pub fn set_cell_limits(&mut self, set: usize, row: usize, domain: Domain, mut limits: Vec<u64>) {
        limits.sort_unstable();
        let r = &mut self.rows[set * self.rows_per_set + row];
        match domain {
            Domain::Hard => r.hard = CellLimits::Sampled(limits),
            Domain::Soft => r.soft = CellLimits::Sampled(limits),
        }
    }

    /// Count one line write on `domain` of `row`; returns lines that died.
    pub fn record_write(&mut self, set: usize, row: usize, domain: Domain) -> Vec<LineDeath> {
        self.total_writes += 1;
        let idx = set * self.rows_per_set + row;
        {
            let r = &mut self.rows[idx];
            match domain {
                Domain::Hard => r.hard_writes += 1,
                Domain::Soft => r.soft_writes += 1,
            }
        }
        let mut deaths = Vec::new();
        for slot in 0..self.layout.ways_per_row() {
            if self.rows[idx].dead[slot] {
                continue;
            }
            let faulty = self.row_faulty(idx, slot);
            if line_dead(faulty, self.config.ecc_bits) {
                self.rows[idx].dead[slot] = true;
                let way = row * self.layout.ways_per_row() + slot;
                self.failure.dead_lines.insert((set, way));
                self.dead_per_set[set] += 1;
                let set_failed = self.dead_per_set[set] == self.config.dead_ways_to_fail + 1;
                if set_failed {
                    self.failure.failed_sets.insert(set);
                    self.failure.first_failure_write_count.get_or_insert(self.total_writes);
                }
                deaths.push(LineDeath { set, way, set_failed });
            }
        }
        deaths
    }

    fn row_faulty(&self, idx: usize, slot: usize) -> u32 {
        let r = &self.rows[idx];
        let cells = cells_per_domain(self.layout, self.line_bits);
        match (self.layout, slot) {
            (RowLayout::Stripped, 0) => r.hard.faulty(r.hard_writes, cells),
            (RowLayout::Stripped, _) | (RowLayout::Slc, _) => r.soft.faulty(r.soft_writes, cells),
            (RowLayout::Stacked, _) => {
                r.hard.faulty(r.hard_writes, cells) + r.soft.faulty(r.soft_writes, cells)
            }
        }
    }

    pub fn faulty_bits(&self, set: usize, way: usize) -> u32 {
        let per = self.layout.ways_per_row();
        self.row_faulty(set * self.rows_per_set + way / per, way % per)
    }

    pub fn way_dead(&self, set: usize, way: usize) -> bool {
        let per = self.layout.ways_per_row();
        self.rows[set * self.rows_per_set + way / per].dead[way % per]
    }

    pub fn dead_ways(&self, set: usize) -> u32 {
        self.dead_per_set[set]
    }

    pub fn set_failed(&self, set: usize) -> bool {
        self.failure.failed_sets.contains(&set)
    }

    pub fn failure(&self) -> &FailureRecord {
        &self.failure
    }

    /// `(hard, soft)` writes of a row.
    pub fn row_writes(&self, set: usize, row: usize) -> (u64, u64) {
        let r = &self.rows[set * self.rows_per_set + row];
        (r.hard_writes, r.soft_writes)
    }

    pub fn total_writes(&self) -> u64 {
        self.total_writes
    }

    pub fn domain_totals(&self) -> (u64, u64) {
        self.rows
            .iter()
            .fold((0, 0), |(h, s), r| (h + r.hard_writes, s + r.soft_writes))
    }

    /// Write count at which a line dies, and the write count it has now.
    fn death_point(&self, idx: usize, slot: usize) -> Option<(u64, u64)> {
        let r = &self.rows[idx];
        let ecc = self.config.ecc_bits as usize;
        match (self.layout, slot) {
            (RowLayout::Stripped, 0) => r.hard.nth(ecc).map(|l| (l + 1, r.hard_writes)),
            (RowLayout::Stripped, _) | (RowLayout::Slc, _) => {
                r.soft.nth(ecc).map(|l| (l + 1, r.soft_writes))
            }
            (RowLayout::Stacked, _) => {
                // Both domains take every write, so merge the two limit lists.
                let mut merged: Vec<u64> = (0..=ecc)
                    .flat_map(|i| [r.hard.nth(i), r.soft.nth(i)])
                    .flatten()
                    .collect();
                merged.sort_unstable();
                merged.get(ecc).map(|l| (l + 1, r.hard_writes.max(r.soft_writes)))
            }
        }
    }

    /// Project when the first set fails if every line keeps its average
    /// write rate over `elapsed_ns`.
    pub fn estimate_lifetime(&self, elapsed_ns: f64) -> LifetimeEstimate {
        let mut best: Option<(f64, usize)> = None;
        if elapsed_ns <= 0.0 {
            return LifetimeEstimate { seconds: None, limiting_set: None };
        }
        let per = self.layout.ways_per_row();
        let fail_index = self.config.dead_ways_to_fail as usize;
        let sets = self.dead_per_set.len();
        let mut times = Vec::with_capacity(self.rows_per_set * per);
        for set in 0..sets {
            times.clear();
            for row in 0..self.rows_per_set {
                let idx = set * self.rows_per_set + row;
                for slot in 0..per {
                    if self.rows[idx].dead[slot] {
                        times.push(elapsed_ns);
                        continue;
                    }
                    let Some((death, writes)) = self.death_point(idx, slot) else { continue };
                    if writes == 0 {
                        continue;
                    }
                    let rate = writes as f64 / elapsed_ns;
                    times.push(elapsed_ns + death.saturating_sub(writes) as f64 / rate);
                }
            }
            if times.len() <= fail_index {
                continue;
            }
            times.sort_by(f64::total_cmp);
            let t = times[fail_index];
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, set));
            }
        }
        LifetimeEstimate {
            seconds: best.map(|(t, _)| t * 1e-9),
            limiting_set: best.map(|(_, s)| s),
        }
    }
}

fn cells_per_domain(layout: RowLayout, line_bits: u32) -> u32 {
    match layout {
        RowLayout::Stacked => line_bits / 2,
        RowLayout::Stripped | RowLayout::Slc => line_bits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracker(layout: RowLayout, limit: u64) -> WearTracker {
        WearTracker::new(layout, 2, 4, 512, limit, limit, EnduranceConfig::default())
    }

    #[test]
    fn threshold_crossing() {
        let mut t = tracker(RowLayout::Slc, 3);
        for _ in 0..3 {
            assert!(t.record_write(0, 0, Domain::Soft).is_empty());
        }
        assert_eq!(t.faulty_bits(0, 0), 0);
        let deaths = t.record_write(0, 0, Domain::Soft);
        assert_eq!(t.faulty_bits(0, 0), 512);
        assert_eq!(deaths, vec![LineDeath { set: 0, way: 0, set_failed: false }]);
    }

    #[test]
    fn ecc_capacity() {
        assert!(!line_dead(0, 5));
        assert!(!line_dead(5, 5));
        assert!(line_dead(6, 5));
    }

    #[test]
    fn stripped_domains_map_to_ways() {
        let mut t = tracker(RowLayout::Stripped, 1);
        t.record_write(0, 1, Domain::Soft);
        let deaths = t.record_write(0, 1, Domain::Soft);
        assert_eq!(deaths.len(), 1);
        assert_eq!(deaths[0].way, 3);
        assert!(t.way_dead(0, 3));
        assert!(!t.way_dead(0, 2));
    }

    #[test]
    fn staged_limits_kill_on_sixth_fault() {
        let mut t = tracker(RowLayout::Slc, 1_000);
        t.set_cell_limits(0, 0, Domain::Soft, (0..512).map(|i| 100 + i).collect());
        for w in 1..=105 {
            assert!(t.record_write(0, 0, Domain::Soft).is_empty(), "write {w}");
        }
        assert_eq!(t.faulty_bits(0, 0), 5);
        assert_eq!(t.record_write(0, 0, Domain::Soft).len(), 1);
        assert_eq!(t.faulty_bits(0, 0), 6);
    }

    #[test]
    fn set_fails_on_fifth_dead_way() {
        let mut t = WearTracker::new(RowLayout::Slc, 1, 8, 64, 0, 0, EnduranceConfig::default());
        for row in 0..4 {
            let d = t.record_write(0, row, Domain::Soft);
            assert!(!d[0].set_failed);
        }
        assert!(!t.set_failed(0));
        let d = t.record_write(0, 4, Domain::Soft);
        assert!(d[0].set_failed);
        assert!(t.set_failed(0));
        assert_eq!(t.failure().first_failure_write_count, Some(5));
    }

    #[test]
    fn lifetime_is_linear_in_rate() {
        let mut a = WearTracker::new(RowLayout::Slc, 1, 8, 512, 10_000, 10_000, EnduranceConfig::default());
        for row in 0..5 {
            for _ in 0..100 {
                a.record_write(0, row, Domain::Soft);
            }
        }
        // 100 writes per line in 1 ms: death at write 10_001
        let est = a.estimate_lifetime(1e6).seconds.unwrap();
        assert!((est - 10_001.0 / 100.0 * 1e-3).abs() < 1e-12);
        let est_fast = a.estimate_lifetime(0.5e6).seconds.unwrap();
        assert!((est / est_fast - 2.0).abs() < 1e-9);
    }

    #[test]
    fn no_writes_is_unbounded() {
        let t = tracker(RowLayout::Stripped, 10);
        assert_eq!(t.estimate_lifetime(1e6).seconds, None);
    }

    #[test]
    fn sampled_limits_are_deterministic() {
        let cfg = EnduranceConfig { sigma: 0.2, seed: 9, ..Default::default() };
        let a = WearTracker::new(RowLayout::Stripped, 1, 1, 64, 1000, 1000, cfg);
        let b = WearTracker::new(RowLayout::Stripped, 1, 1, 64, 1000, 1000, cfg);
        assert_eq!(a.rows[0].hard, b.rows[0].hard);
        if let CellLimits::Sampled(v) = &a.rows[0].soft {
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
        } else {
            panic!("expected sampled limits");
        }
    }
}
