//! Per-block read/write dominance.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::trace::{AccessEvent, Op};

pub const DOMINANCE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    Read,
    Write,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStat {
    pub line: u64,
    pub reads: u64,
    pub writes: u64,
    pub class: Dominance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub blocks: Vec<BlockStat>,
    pub read_dominated: u64,
    pub write_dominated: u64,
    pub non_dominated: u64,
}

impl DominanceReport {
    pub fn total(&self) -> u64 {
        self.read_dominated + self.write_dominated + self.non_dominated
    }

    fn frac(&self, n: u64) -> f64 {
        if self.total() == 0 { 0.0 } else { n as f64 / self.total() as f64 }
    }

    pub fn read_fraction(&self) -> f64 {
        self.frac(self.read_dominated)
    }

    pub fn write_fraction(&self) -> f64 {
        self.frac(self.write_dominated)
    }

    pub fn non_fraction(&self) -> f64 {
        self.frac(self.non_dominated)
    }

    /// One row per block: `line,reads,writes,class`.
    pub fn blocks_csv(&self) -> String {
        let mut out = String::from("line,reads,writes,class\n");
        for b in &self.blocks {
            let class = match b.class {
                Dominance::Read => "read",
                Dominance::Write => "write",
                Dominance::None => "none",
            };
            let _ = writeln!(out, "{:#x},{},{},{}", b.line, b.reads, b.writes, class);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("class,blocks,fraction\n");
        for (name, n) in [
            ("read_dominated", self.read_dominated),
            ("write_dominated", self.write_dominated),
            ("non_dominated", self.non_dominated),
        ] {
            let _ = writeln!(out, "{name},{n},{:.6}", self.frac(n));
        }
        out
    }
}

pub fn classify(reads: u64, writes: u64) -> Dominance {
    let total = (reads + writes) as f64;
    if total == 0.0 {
        Dominance::None
    } else if reads as f64 >= DOMINANCE_THRESHOLD * total {
        Dominance::Read
    } else if writes as f64 >= DOMINANCE_THRESHOLD * total {
        Dominance::Write
    } else {
        Dominance::None
    }
}

pub fn classify_blocks(events: &[AccessEvent], line_bytes: u32) -> DominanceReport {
    let shift = line_bytes.trailing_zeros();
    let mut counts: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for ev in events {
        let entry = counts.entry(ev.addr >> shift).or_default();
        match ev.op {
            Op::Read => entry.0 += 1,
            Op::Write => entry.1 += 1,
        }
    }
    let mut report =
        DominanceReport { blocks: Vec::with_capacity(counts.len()), read_dominated: 0, write_dominated: 0, non_dominated: 0 };
    for (line, (reads, writes)) in counts {
        let class = classify(reads, writes);
        match class {
            Dominance::Read => report.read_dominated += 1,
            Dominance::Write => report.write_dominated += 1,
            Dominance::None => report.non_dominated += 1,
        }
        report.blocks.push(BlockStat { line, reads, writes, class });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(op: Op, addr: u64) -> AccessEvent {
        AccessEvent::new(0, 0, op, addr, 8)
    }

    #[test]
    fn all_reads_are_read_dominated() {
        let events: Vec<_> = (0..100).map(|i| ev(Op::Read, (i % 7) * 64)).collect();
        let r = classify_blocks(&events, 64);
        assert_eq!(r.read_fraction(), 1.0);
    }

    #[test]
    fn even_mix_is_non_dominated() {
        let events: Vec<_> =
            (0..100).map(|i| ev(if i % 2 == 0 { Op::Read } else { Op::Write }, (i / 2 % 5) * 64)).collect();
        let r = classify_blocks(&events, 64);
        assert_eq!(r.non_fraction(), 1.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(classify(9, 1), Dominance::Read);
        assert_eq!(classify(1, 9), Dominance::Write);
        assert_eq!(classify(8, 2), Dominance::None);
    }

    proptest! {
        #[test]
        fn fractions_sum_to_one(raw in prop::collection::vec((any::<bool>(), 0u64..32), 1..300)) {
            let events: Vec<_> = raw.iter()
                .map(|&(w, line)| ev(if w { Op::Write } else { Op::Read }, line * 64))
                .collect();
            let r = classify_blocks(&events, 64);
            prop_assert!((r.read_fraction() + r.write_fraction() + r.non_fraction() - 1.0).abs() < 1e-12);
            prop_assert_eq!(r.blocks.iter().map(|b| b.reads + b.writes).sum::<u64>(), events.len() as u64);
        }
    }
}
