//! Last-level cache: data array, optional adaptive policy and the global
//! epoch counter.

use serde::{Deserialize, Serialize};

use crate::cache::{CacheArray, Evicted, FillOutcome, Organization, Role, SlotId};
use crate::device::TransactionCost;
use crate::policy::{AdaptivePolicy, GrowAction, PolicyParams, ShrinkAction, SwapAction};
use crate::workload::Op;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Fixed row modes, no swapping.
    #[default]
    Off,
    /// Grow/shrink and swap, each subject to its toggle.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub index: u64,
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub grows: u64,
    pub shrinks: u64,
    pub swaps: u64,
    /// Associativity after the epoch-boundary actions.
    pub min_active_ways: u32,
    pub max_active_ways: u32,
    pub mean_active_ways: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub record: EpochRecord,
    pub shrinks: Vec<ShrinkAction>,
}

/// Everything one LLC access did to the array.
#[derive(Debug, Clone, PartialEq)]
pub struct LlcAccess {
    pub set: usize,
    pub hit: bool,
    pub role: Option<Role>,
    pub slot: Option<SlotId>,
    pub lookup_cycles: u64,
    /// Data transaction of a hit; zero on a miss.
    pub data: TransactionCost,
    /// Lines that died while the hit wrote them.
    pub worn_out: Vec<Evicted>,
    pub fill: Option<FillOutcome>,
    pub swap: Option<SwapAction>,
    pub grow: Option<GrowAction>,
    pub epoch: Option<EpochOutcome>,
}

impl LlcAccess {
    /// Every line that left the array during this access.
    pub fn evicted(&self) -> Vec<Evicted> {
        let mut out = self.worn_out.clone();
        if let Some(f) = &self.fill {
            out.extend(f.evicted.iter().cloned());
        }
        if let Some(s) = &self.swap {
            out.extend(s.change.evicted.iter().cloned());
        }
        if let Some(e) = &self.epoch {
            for s in &e.shrinks {
                out.extend(s.change.evicted.iter().cloned());
            }
        }
        out
    }

    /// Array work beyond the lookup and the data transaction.
    pub fn background_cost(&self) -> TransactionCost {
        let mut c = TransactionCost::default();
        if let Some(f) = &self.fill {
            c += f.cost;
        }
        if let Some(s) = &self.swap {
            c += s.change.cost;
        }
        if let Some(e) = &self.epoch {
            for s in &e.shrinks {
                c += s.change.cost;
            }
        }
        c
    }

    pub fn total_energy_nj(&self) -> f64 {
        self.data.energy_nj + self.background_cost().energy_nj
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Totals {
    accesses: u64,
    hits: u64,
    misses: u64,
    grows: u64,
    shrinks: u64,
    swaps: u64,
}

#[derive(Debug, Clone)]
pub struct Llc {
    array: CacheArray,
    policy: Option<AdaptivePolicy>,
    epoch_len: u64,
    in_epoch: u64,
    epoch_start: Totals,
    log: Vec<EpochRecord>,
}

impl Llc {
    pub fn new(mut array: CacheArray, kind: PolicyKind, params: PolicyParams) -> Self {
        let policy = match (kind, array.organization()) {
            (PolicyKind::Dynamic, Organization::Stripped) => Some(AdaptivePolicy::new(params, &mut array)),
            _ => None,
        };
        Self { array, policy, epoch_len: params.epoch_len, in_epoch: 0, epoch_start: Totals::default(), log: Vec::new() }
    }

    pub fn array(&self) -> &CacheArray {
        &self.array
    }

    pub fn array_mut(&mut self) -> &mut CacheArray {
        &mut self.array
    }

    pub fn policy(&self) -> Option<&AdaptivePolicy> {
        self.policy.as_ref()
    }

    pub fn epoch_log(&self) -> &[EpochRecord] {
        &self.log
    }

    pub fn epoch_len(&self) -> u64 {
        self.epoch_len
    }

    /// Look up `tag` in `set`; on a miss the block is allocated (dirty for
    /// writes). Policy hooks and epoch boundaries run here.
    pub fn access(&mut self, set: usize, tag: u64, op: Op) -> LlcAccess {
        let out = self.array.access(set, tag, op);
        let lookup = self.array.costs().lookup_cycles;
        let mut result = LlcAccess {
            set,
            hit: out.hit,
            role: out.role_hit,
            slot: out.slot,
            lookup_cycles: lookup,
            data: out.role_hit.map(|r| self.array.costs().kind(r.kind(op))).unwrap_or_default(),
            worn_out: out.evicted,
            fill: None,
            swap: None,
            grow: None,
            epoch: None,
        };
        if out.hit {
            if let (Some(policy), Some(id), Some(role)) = (self.policy.as_mut(), out.slot, out.role_hit) {
                result.swap = policy.on_hit(&mut self.array, set, id.pair, role, op);
            }
        } else {
            let fill = self.array.fill(set, tag, op == Op::Write);
            if let Some(policy) = self.policy.as_mut() {
                if let Some(id) = fill.slot {
                    policy.on_pair_miss_reset(&mut self.array, set, id.pair);
                }
                result.grow = policy.on_miss(&mut self.array, set);
            }
            result.fill = Some(fill);
        }
        self.in_epoch += 1;
        if self.in_epoch == self.epoch_len {
            result.epoch = Some(self.end_epoch());
        }
        result
    }

    fn totals(&self) -> Totals {
        let s = self.array.stats();
        let mut t = Totals { accesses: s.accesses, hits: s.hits, misses: s.misses, ..Totals::default() };
        for i in 0..self.array.num_sets() {
            let st = &self.array.set(i).stats;
            t.grows += st.grows;
            t.shrinks += st.shrinks;
            t.swaps += st.swaps;
        }
        t
    }

    fn end_epoch(&mut self) -> EpochOutcome {
        let mut shrinks = Vec::new();
        if let Some(policy) = self.policy.as_mut() {
            for set in 0..self.array.num_sets() {
                if let Some(s) = policy.on_epoch_end(&mut self.array, set) {
                    shrinks.push(s);
                }
                policy.on_epoch_start(&mut self.array, set);
            }
        }
        let now = self.totals();
        let start = self.epoch_start;
        let ways: Vec<u32> = (0..self.array.num_sets()).map(|s| self.array.active_ways(s)).collect();
        let record = EpochRecord {
            index: self.log.len() as u64,
            accesses: now.accesses - start.accesses,
            hits: now.hits - start.hits,
            misses: now.misses - start.misses,
            grows: now.grows - start.grows,
            shrinks: now.shrinks - start.shrinks,
            swaps: now.swaps - start.swaps,
            min_active_ways: ways.iter().copied().min().unwrap_or(0),
            max_active_ways: ways.iter().copied().max().unwrap_or(0),
            mean_active_ways: if ways.is_empty() {
                0.0
            } else {
                ways.iter().map(|&w| f64::from(w)).sum::<f64>() / ways.len() as f64
            },
        };
        self.log.push(record.clone());
        self.epoch_start = now;
        self.in_epoch = 0;
        EpochOutcome { record, shrinks }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{CacheGeometry, InitialMode};
    use crate::device::{ArrayCosts, DeviceProfile, LineCostProfile};
    use crate::endurance::EnduranceConfig;

    fn llc(kind: PolicyKind, params: PolicyParams, initial: InitialMode) -> Llc {
        let geo = CacheGeometry::new(4 * 64 * 8, 64, 4, 8, 1);
        let profile = DeviceProfile::default();
        let costs = ArrayCosts::new(&profile, 512, Some(&LineCostProfile::stripped_mlc()), 3, 0.0);
        let array =
            CacheArray::with_profile(Organization::Stripped, geo, costs, &profile, EnduranceConfig::default(), initial);
        Llc::new(array, kind, params)
    }

    #[test]
    fn epochs_close_every_epoch_len_accesses() {
        let mut l = llc(PolicyKind::Dynamic, PolicyParams { epoch_len: 10, ..PolicyParams::default() }, InitialMode::MinWays);
        for i in 0..35u64 {
            let r = l.access((i % 4) as usize, i % 3, Op::Read);
            assert_eq!(r.epoch.is_some(), (i + 1) % 10 == 0);
        }
        assert_eq!(l.epoch_log().len(), 3);
        assert!(l.epoch_log().iter().all(|e| e.accesses == 10 && e.hits + e.misses == 10));
    }

    #[test]
    fn misses_allocate() {
        let mut l = llc(PolicyKind::Off, PolicyParams::default(), InitialMode::MaxWays);
        let r = l.access(0, 5, Op::Write);
        assert!(!r.hit);
        assert!(r.fill.as_ref().unwrap().slot.is_some());
        let r = l.access(0, 5, Op::Read);
        assert!(r.hit);
        assert!(r.fill.is_none());
    }

    #[test]
    fn idle_sets_shrink_at_epoch_end() {
        let params = PolicyParams { epoch_len: 8, n_assoc: 1, ..PolicyParams::default() };
        let mut l = llc(PolicyKind::Dynamic, params, InitialMode::MaxWays);
        // hits only in set 0 after warm-up; every set starts at 8 ways
        l.access(0, 1, Op::Read);
        for _ in 0..7 {
            l.access(0, 1, Op::Read);
        }
        let rec = &l.epoch_log()[0];
        assert_eq!(rec.shrinks, 4);
        assert_eq!(rec.max_active_ways, 7);
    }
}
