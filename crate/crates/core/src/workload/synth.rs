//! Parametric trace generator with skewed set pressure and per-block
//! read/write dominance.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use super::trace::{AccessEvent, Op};
use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_events: u64,
    /// Zipf exponent over set ranks; 0 is uniform.
    pub set_skew: f64,
    /// Fraction of sets (the highest-ranked ones) that are hot.
    pub hot_set_fraction: f64,
    pub working_lines_per_hot_set: u32,
    pub cold_lines_per_set: u32,
    /// Probability that a dominated block is write-dominated.
    pub write_ratio: f64,
    /// Probability that a block is dominated by one operation.
    pub dominance_fraction: f64,
    pub seed: u64,
    /// Target cache shape; line addresses are laid out so that
    /// `line % total_sets` is the set.
    pub total_sets: u32,
    pub line_bytes: u32,
    pub access_bytes: u32,
    pub cores: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_events: 100_000,
            set_skew: 1.0,
            hot_set_fraction: 0.1,
            working_lines_per_hot_set: 12,
            cold_lines_per_set: 4,
            write_ratio: 0.5,
            dominance_fraction: 0.33,
            seed: 1,
            total_sets: 1024,
            line_bytes: 64,
            access_bytes: 8,
            cores: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    /// Every access is this op.
    Dominated(Op),
    /// Alternates between reads and writes, starting with the given op.
    Mixed(Op),
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, p) in [
            ("hot_set_fraction", self.hot_set_fraction),
            ("write_ratio", self.write_ratio),
            ("dominance_fraction", self.dominance_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::invalid(key, "must be in [0, 1]"));
            }
        }
        if !(self.set_skew.is_finite() && self.set_skew >= 0.0) {
            return Err(ConfigError::invalid("set_skew", "must be finite and non-negative"));
        }
        for (key, n) in [
            ("n_events", self.n_events),
            ("working_lines_per_hot_set", u64::from(self.working_lines_per_hot_set)),
            ("cold_lines_per_set", u64::from(self.cold_lines_per_set)),
            ("total_sets", u64::from(self.total_sets)),
            ("cores", u64::from(self.cores)),
            ("access_bytes", u64::from(self.access_bytes)),
        ] {
            if n == 0 {
                return Err(ConfigError::invalid(key, "must be positive"));
            }
        }
        if !self.line_bytes.is_power_of_two() {
            return Err(ConfigError::invalid("line_bytes", "must be a power of two"));
        }
        if self.access_bytes > self.line_bytes || self.line_bytes % self.access_bytes != 0 {
            return Err(ConfigError::invalid("access_bytes", "must divide line_bytes"));
        }
        Ok(())
    }

    pub fn hot_sets(&self) -> u32 {
        (f64::from(self.total_sets) * self.hot_set_fraction).round() as u32
    }
}

/// Set indices ordered by rank (rank 0 carries the most traffic) and the
/// hot flag per set.
fn rank_sets(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> (Vec<u32>, Vec<bool>) {
    let mut order: Vec<u32> = (0..spec.total_sets).collect();
    order.shuffle(rng);
    let mut hot = vec![false; spec.total_sets as usize];
    for &set in order.iter().take(spec.hot_sets() as usize) {
        hot[set as usize] = true;
    }
    (order, hot)
}

pub fn generate(spec: &SynthSpec) -> Result<Vec<AccessEvent>, ConfigError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (order, hot) = rank_sets(spec, &mut rng);

    let weights: Vec<f64> =
        (0..order.len()).map(|rank| 1.0 / ((rank + 1) as f64).powf(spec.set_skew)).collect();
    let set_dist = WeightedIndex::new(&weights).map_err(|e| ConfigError::invalid("set_skew", e.to_string()))?;

    let blocks: Vec<Vec<BlockKind>> = (0..spec.total_sets as usize)
        .map(|set| {
            let n = if hot[set] { spec.working_lines_per_hot_set } else { spec.cold_lines_per_set };
            (0..n)
                .map(|_| {
                    let dominated = rng.random_bool(spec.dominance_fraction);
                    let write = rng.random_bool(if dominated { spec.write_ratio } else { 0.5 });
                    let op = if write { Op::Write } else { Op::Read };
                    if dominated { BlockKind::Dominated(op) } else { BlockKind::Mixed(op) }
                })
                .collect()
        })
        .collect();
    let mut touches: Vec<Vec<u64>> = blocks.iter().map(|b| vec![0; b.len()]).collect();

    let words = u64::from(spec.line_bytes / spec.access_bytes);
    let mut events = Vec::with_capacity(spec.n_events as usize);
    for tick in 0..spec.n_events {
        let set = order[set_dist.sample(&mut rng)] as usize;
        let j = rng.random_range(0..blocks[set].len());
        let op = match blocks[set][j] {
            BlockKind::Dominated(op) => op,
            BlockKind::Mixed(first) => {
                if touches[set][j] % 2 == 0 {
                    first
                } else {
                    flip(first)
                }
            }
        };
        touches[set][j] += 1;
        let line = j as u64 * u64::from(spec.total_sets) + set as u64;
        let word = rng.random_range(0..words);
        let addr = line * u64::from(spec.line_bytes) + word * u64::from(spec.access_bytes);
        let core = rng.random_range(0..spec.cores);
        events.push(AccessEvent::new(tick, core, op, addr, spec.access_bytes));
    }
    Ok(events)
}

fn flip(op: Op) -> Op {
    match op {
        Op::Read => Op::Write,
        Op::Write => Op::Read,
    }
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;
    use crate::workload::classify::classify_blocks;
    use crate::workload::trace::trace_to_string;

    fn per_set(events: &[AccessEvent], spec: &SynthSpec) -> Vec<u64> {
        let mut counts = vec![0u64; spec.total_sets as usize];
        for ev in events {
            counts[((ev.addr / u64::from(spec.line_bytes)) % u64::from(spec.total_sets)) as usize] += 1;
        }
        counts
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec { n_events: 5_000, ..SynthSpec::default() };
        let a = trace_to_string(&generate(&spec).unwrap());
        let b = trace_to_string(&generate(&spec).unwrap());
        assert_eq!(a, b);
        let c = trace_to_string(&generate(&SynthSpec { seed: 2, ..spec }).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn zero_skew_is_uniform_within_three_sigma() {
        let spec = SynthSpec { n_events: 64_000, set_skew: 0.0, total_sets: 64, ..SynthSpec::default() };
        let counts = per_set(&generate(&spec).unwrap(), &spec);
        let n = spec.n_events as f64;
        let p = 1.0 / 64.0;
        let mean = n * p;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sigma + 1e-9, "count {c} vs {mean}±{sigma}");
        }
    }

    #[test]
    fn hot_sets_hold_exactly_their_working_lines() {
        let spec = SynthSpec {
            n_events: 50_000,
            total_sets: 128,
            hot_set_fraction: 0.125,
            working_lines_per_hot_set: 12,
            cold_lines_per_set: 4,
            ..SynthSpec::default()
        };
        let events = generate(&spec).unwrap();
        let mut lines: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
        for ev in &events {
            let line = ev.addr / 64;
            lines.entry(line % 128).or_default().insert(line);
        }
        let hot: Vec<usize> = lines.values().map(BTreeSet::len).filter(|&n| n > 4).collect();
        assert_eq!(hot.len(), spec.hot_sets() as usize);
        assert!(hot.iter().all(|&n| n == 12));
        assert!(lines.values().all(|l| l.len() == 12 || l.len() <= 4));
    }

    #[test]
    fn skew_concentrates_traffic() {
        let spec = SynthSpec { n_events: 20_000, set_skew: 1.2, total_sets: 256, ..SynthSpec::default() };
        let mut counts = per_set(&generate(&spec).unwrap(), &spec);
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let head: u64 = counts[..16].iter().sum();
        assert!(head as f64 > 0.5 * spec.n_events as f64);
    }

    #[test]
    fn dominance_fraction_round_trips_through_classifier() {
        let spec = SynthSpec {
            n_events: 200_000,
            set_skew: 0.0,
            total_sets: 512,
            hot_set_fraction: 0.0,
            cold_lines_per_set: 4,
            dominance_fraction: 0.33,
            ..SynthSpec::default()
        };
        let report = classify_blocks(&generate(&spec).unwrap(), 64);
        let dominated = report.read_fraction() + report.write_fraction();
        // 2048 blocks, binomial sd ~ 0.0104
        assert!((dominated - 0.33).abs() < 0.04, "dominated fraction {dominated}");
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(SynthSpec { write_ratio: 1.5, ..SynthSpec::default() }.validate().is_err());
        assert!(SynthSpec { n_events: 0, ..SynthSpec::default() }.validate().is_err());
    }
}
