//! On-demand associativity and read/write-aware swapping for a stripped
//! array.
//!
//! Each set has a miss counter (`mcnt`) armed to `wcnt * n_assoc` at the
//! start of every epoch. When it runs out, one SLC row is switched to MLC
//! mode, adding a way. At the end of an epoch a set whose `mcnt` is still
//! above `min_ways * n_assoc` merges one MLC row back into SLC mode.
//!
//! Each MLC row has a swap counter (`scnt`) that counts writes to its FRHE
//! line and reads of its SRLE line. When it runs out the two lines trade
//! places, and the swap weight (`swcnt`) grows by one, raising the next
//! threshold.

use serde::{Deserialize, Serialize};

use crate::cache::{ArrayChange, CacheArray, Organization, PairMode, Role, Slot, SlotId};
use crate::error::ConfigError;
use crate::workload::Op;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// LLC array accesses per epoch.
    pub epoch_len: u64,
    pub n_assoc: u32,
    pub n_swap: u32,
    /// Saturation value of `swcnt`.
    pub m_swap: u32,
    pub grow: bool,
    pub shrink: bool,
    pub swap: bool,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self { epoch_len: 100_000, n_assoc: 4, n_swap: 4, m_swap: 256, grow: true, shrink: true, swap: true }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, v) in [
            ("epoch_len", self.epoch_len),
            ("n_assoc", u64::from(self.n_assoc)),
            ("n_swap", u64::from(self.n_swap)),
            ("m_swap", u64::from(self.m_swap)),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(key, "must be positive"));
            }
        }
        Ok(())
    }

    /// All adaptive behavior switched off.
    pub fn frozen(self) -> Self {
        Self { grow: false, shrink: false, swap: false, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetControl {
    pub mcnt: u64,
    pub wcnt: u32,
    pub grow_ptr: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowAction {
    pub set: usize,
    pub pair: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkAction {
    pub set: usize,
    pub pair: usize,
    pub change: ArrayChange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapAction {
    pub set: usize,
    pub pair: usize,
    pub change: ArrayChange,
}

#[derive(Debug, Clone)]
pub struct AdaptivePolicy {
    params: PolicyParams,
    min_ways: u32,
    max_ways: u32,
    sets: Vec<SetControl>,
}

impl AdaptivePolicy {
    /// Controller for `array`, which must be stripped. Counters start as if
    /// an epoch had just begun.
    pub fn new(params: PolicyParams, array: &mut CacheArray) -> Self {
        assert_eq!(array.organization(), Organization::Stripped, "adaptive policy needs a stripped array");
        let geo = *array.geometry();
        let sets = (0..array.num_sets())
            .map(|s| {
                let wcnt = array.active_ways(s);
                SetControl { mcnt: u64::from(wcnt) * u64::from(params.n_assoc), wcnt, grow_ptr: 0 }
            })
            .collect();
        let policy = Self { params, min_ways: geo.min_ways, max_ways: geo.max_ways, sets };
        for s in 0..array.num_sets() {
            for p in 0..array.pairs_per_set() {
                policy.reset_pair(array, s, p);
            }
        }
        policy
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn control(&self, set: usize) -> &SetControl {
        &self.sets[set]
    }

    pub fn controls(&self) -> &[SetControl] {
        &self.sets
    }

    /// `mcnt := wcnt * n_assoc`; per row `scnt := swcnt * n_swap`, then
    /// `swcnt := 1`; epoch read/write counts cleared.
    pub fn on_epoch_start(&mut self, array: &mut CacheArray, set: usize) {
        let c = &mut self.sets[set];
        c.mcnt = u64::from(c.wcnt) * u64::from(self.params.n_assoc);
        for p in 0..array.pairs_per_set() {
            let pair = array.pair_mut(set, p);
            pair.scnt = pair.swcnt.saturating_mul(self.params.n_swap);
            pair.swcnt = 1;
        }
        array.clear_epoch_counts(set);
    }

    /// Called after a miss in `set` has been filled. Counts the miss and
    /// adds a way when the counter runs out.
    pub fn on_miss(&mut self, array: &mut CacheArray, set: usize) -> Option<GrowAction> {
        let n_assoc = u64::from(self.params.n_assoc);
        let c = &mut self.sets[set];
        c.mcnt = c.mcnt.saturating_sub(1);
        if c.mcnt > 0 {
            return None;
        }
        let mut action = None;
        if self.params.grow && array.active_ways(set) < self.max_ways {
            let pairs = array.pairs_per_set();
            let pick = (0..pairs)
                .map(|i| (c.grow_ptr + i) % pairs)
                .find(|&p| {
                    array.pair(set, p).mode == PairMode::Slc
                        && !array.slot_dead(set, SlotId { pair: p, slot: Slot::Hard })
                });
            if let Some(p) = pick {
                array.activate_pair(set, p);
                c.grow_ptr = (p + 1) % pairs;
                c.wcnt += 1;
                action = Some(GrowAction { set, pair: p });
            }
        }
        c.mcnt = u64::from(c.wcnt) * n_assoc;
        action
    }

    /// Merge one MLC row if the set saw few misses this epoch.
    pub fn on_epoch_end(&mut self, array: &mut CacheArray, set: usize) -> Option<ShrinkAction> {
        let c = &mut self.sets[set];
        let threshold = u64::from(self.min_ways) * u64::from(self.params.n_assoc);
        if !self.params.shrink || c.mcnt <= threshold || array.active_ways(set) <= self.min_ways {
            return None;
        }
        let pair = array
            .lru_slot(set, |id| array.pair(set, id.pair).mode == PairMode::Mlc)
            .map(|id| id.pair)
            .or_else(|| (0..array.pairs_per_set()).find(|&p| array.pair(set, p).mode == PairMode::Mlc))?;
        let change = array.merge_pair(set, pair);
        c.wcnt -= 1;
        Some(ShrinkAction { set, pair, change })
    }

    /// Count a hit on an MLC row and swap its lines when due.
    pub fn on_hit(&mut self, array: &mut CacheArray, set: usize, pair: usize, role: Role, op: Op) -> Option<SwapAction> {
        if !self.params.swap || array.pair(set, pair).mode != PairMode::Mlc {
            return None;
        }
        let qualifies = matches!((role, op), (Role::Frhe, Op::Write) | (Role::Srle, Op::Read));
        if !qualifies {
            return None;
        }
        let p = array.pair_mut(set, pair);
        p.scnt = p.scnt.saturating_sub(1);
        if p.scnt > 0 {
            return None;
        }
        p.swcnt = (p.swcnt + 1).min(self.params.m_swap);
        p.scnt = p.swcnt.saturating_mul(self.params.n_swap);
        let change = array.swap_pair(set, pair);
        Some(SwapAction { set, pair, change })
    }

    /// A block was filled into this row: `swcnt := 1`, `scnt := n_swap`.
    pub fn on_pair_miss_reset(&mut self, array: &mut CacheArray, set: usize, pair: usize) {
        self.reset_pair(array, set, pair);
    }

    fn reset_pair(&self, array: &mut CacheArray, set: usize, pair: usize) {
        let p = array.pair_mut(set, pair);
        p.swcnt = 1;
        p.scnt = self.params.n_swap;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{CacheGeometry, InitialMode};
    use crate::device::{ArrayCosts, DeviceProfile, LineCostProfile};
    use crate::endurance::EnduranceConfig;

    fn array(sets: u64, max_ways: u32, initial: InitialMode) -> CacheArray {
        let geo = CacheGeometry::new(sets * 64 * u64::from(max_ways), 64, max_ways / 2, max_ways, 1);
        let profile = DeviceProfile::default();
        let costs = ArrayCosts::new(&profile, 512, Some(&LineCostProfile::stripped_mlc()), 3, 0.0);
        CacheArray::with_profile(Organization::Stripped, geo, costs, &profile, EnduranceConfig::default(), initial)
    }

    fn miss(policy: &mut AdaptivePolicy, a: &mut CacheArray, set: usize, tag: u64) -> Option<GrowAction> {
        assert!(!a.access(set, tag, Op::Read).hit);
        let f = a.fill(set, tag, false);
        if let Some(id) = f.slot {
            policy.on_pair_miss_reset(a, set, id.pair);
        }
        policy.on_miss(a, set)
    }

    #[test]
    fn epoch_start_arms_counters() {
        let mut a = array(1, 16, InitialMode::MinWays);
        let params = PolicyParams { n_assoc: 4, n_swap: 2, ..PolicyParams::default() };
        let mut p = AdaptivePolicy::new(params, &mut a);
        assert_eq!(p.control(0).wcnt, 8);
        p.on_epoch_start(&mut a, 0);
        assert_eq!(p.control(0).mcnt, 32);
        a.pair_mut(0, 0).swcnt = 256;
        p.on_epoch_start(&mut a, 0);
        assert_eq!(a.pair(0, 0).scnt, 512);
        assert_eq!(a.pair(0, 0).swcnt, 1);
        p.on_epoch_start(&mut a, 0);
        assert_eq!(a.pair(0, 0).scnt, 2);
    }

    #[test]
    fn eighth_miss_grows_with_n_one() {
        let mut a = array(1, 16, InitialMode::MinWays);
        let mut p = AdaptivePolicy::new(PolicyParams { n_assoc: 1, ..PolicyParams::default() }, &mut a);
        for tag in 0..7 {
            assert!(miss(&mut p, &mut a, 0, tag).is_none());
        }
        assert_eq!(miss(&mut p, &mut a, 0, 7), Some(GrowAction { set: 0, pair: 0 }));
        assert_eq!(a.active_ways(0), 9);
        assert_eq!(p.control(0).wcnt, 9);
        assert_eq!(p.control(0).mcnt, 9);
        // the new FRHE way is empty and takes the next fill
        assert!(!a.pair(0, 0).frhe().valid);
        assert!(!a.access(0, 100, Op::Read).hit);
        let f = a.fill(0, 100, false);
        assert_eq!(f.slot, Some(SlotId { pair: 0, slot: Slot::Hard }));
        assert!(f.evicted.is_empty());
    }

    #[test]
    fn consecutive_grows_pick_different_rows() {
        let mut a = array(1, 16, InitialMode::MinWays);
        let mut p = AdaptivePolicy::new(PolicyParams { n_assoc: 1, ..PolicyParams::default() }, &mut a);
        let mut grown = Vec::new();
        let mut tag = 0;
        while grown.len() < 2 {
            if let Some(g) = miss(&mut p, &mut a, 0, tag) {
                grown.push(g.pair);
            }
            tag += 1;
        }
        assert_ne!(grown[0], grown[1]);
    }

    #[test]
    fn no_growth_at_max_ways() {
        let mut a = array(1, 16, InitialMode::MaxWays);
        let mut p = AdaptivePolicy::new(PolicyParams { n_assoc: 1, ..PolicyParams::default() }, &mut a);
        assert_eq!(p.control(0).wcnt, 16);
        for tag in 0..40 {
            assert!(miss(&mut p, &mut a, 0, tag).is_none());
        }
        assert_eq!(a.active_ways(0), 16);
        assert!(p.control(0).mcnt > 0);
    }

    #[test]
    fn idle_epoch_shrinks_by_one() {
        let mut a = array(1, 16, InitialMode::MinWays);
        let mut p = AdaptivePolicy::new(PolicyParams { n_assoc: 4, ..PolicyParams::default() }, &mut a);
        a.activate_pair(0, 0);
        a.activate_pair(0, 1);
        p.sets[0].wcnt = 10;
        p.on_epoch_start(&mut a, 0);
        assert_eq!(p.control(0).mcnt, 40);
        let s = p.on_epoch_end(&mut a, 0).expect("shrink");
        assert_eq!(a.active_ways(0), 9);
        assert_eq!(p.control(0).wcnt, 9);
        assert_eq!(a.pair(0, s.pair).mode, PairMode::Slc);
    }

    #[test]
    fn never_shrinks_below_min() {
        let mut a = array(1, 16, InitialMode::MinWays);
        let mut p = AdaptivePolicy::new(PolicyParams::default(), &mut a);
        p.on_epoch_start(&mut a, 0);
        assert!(p.on_epoch_end(&mut a, 0).is_none());
    }

    #[test]
    fn merge_survivor_hits_as_slc() {
        let mut a = array(1, 4, InitialMode::MaxWays);
        let mut p = AdaptivePolicy::new(PolicyParams::default(), &mut a);
        for tag in 0..4 {
            a.access(0, tag, Op::Read);
            a.fill(0, tag, false);
        }
        // touch everything except tag 0 so the LRU line sits in row 0
        for tag in 1..4 {
            assert!(a.access(0, tag, Op::Read).hit);
        }
        let s = p.on_epoch_end(&mut a, 0).expect("shrink");
        assert_eq!(s.pair, 0);
        let survivor = a.pair(0, 0).srle().tag;
        let out = a.access(0, survivor, Op::Read);
        assert_eq!(out.role_hit, Some(Role::Slc));
    }

    #[test]
    fn srle_reads_swap_after_n_swap() {
        let mut a = array(1, 4, InitialMode::MaxWays);
        let mut p = AdaptivePolicy::new(PolicyParams { n_swap: 4, ..PolicyParams::default() }, &mut a);
        a.access(0, 1, Op::Read);
        a.fill(0, 1, false); // row 0 hard
        a.access(0, 2, Op::Read);
        a.fill(0, 2, false); // row 0 soft
        p.on_pair_miss_reset(&mut a, 0, 0);
        for i in 1..=4 {
            let out = a.access(0, 2, Op::Read);
            assert_eq!(out.role_hit, Some(Role::Srle));
            let swapped = p.on_hit(&mut a, 0, 0, Role::Srle, Op::Read);
            assert_eq!(swapped.is_some(), i == 4);
        }
        assert_eq!(a.pair(0, 0).swcnt, 2);
        assert_eq!(a.pair(0, 0).scnt, 8);
        assert_eq!(a.access(0, 2, Op::Read).role_hit, Some(Role::Frhe));
        // FRHE read hits never count
        assert!(p.on_hit(&mut a, 0, 0, Role::Frhe, Op::Read).is_none());
        assert_eq!(a.pair(0, 0).scnt, 8);
    }

    #[test]
    fn swcnt_saturates() {
        let mut a = array(1, 4, InitialMode::MaxWays);
        let mut p = AdaptivePolicy::new(PolicyParams { n_swap: 1, m_swap: 256, ..PolicyParams::default() }, &mut a);
        a.access(0, 1, Op::Read);
        a.fill(0, 1, false);
        let mut swaps = 0;
        while swaps < 300 {
            if p.on_hit(&mut a, 0, 0, Role::Srle, Op::Read).is_some() {
                swaps += 1;
                if swaps == 255 {
                    assert_eq!(a.pair(0, 0).swcnt, 256);
                }
            }
        }
        assert_eq!(a.pair(0, 0).swcnt, 256);
    }
}
