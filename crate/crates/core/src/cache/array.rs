//! Set-associative data array built from physical rows ("pairs").
//!
//! In a stripped array every row holds two logical lines: the FRHE line in the
//! hard domains and the SRLE line in the soft domains. A row can also be
//! merged into SLC mode, where only the soft domains hold data and the hard
//! domains are pinned to '0'. SLC and stacked arrays use one line per row,
//! kept in the soft slot.
//!
//! Replacement is LRU over the usable lines of a set. Lines in slots that are
//! disabled (merged away) or worn out are invisible to lookup and replacement.

use serde::{Deserialize, Serialize};

use super::geometry::{CacheGeometry, Organization};
use crate::device::{steps_for, ArrayCosts, DeviceProfile, Domain, Step, TransactionCost, TransactionKind};
use crate::endurance::{EnduranceConfig, LineDeath, RowLayout, WearTracker};
use crate::workload::Op;

/// Role of a logical line, which fixes its read and write transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Fast-read, high-energy-write line in the hard domains.
    Frhe,
    /// Slow-read, low-energy-write line in the soft domains.
    Srle,
    Slc,
    Stacked,
}

impl Role {
    pub fn kind(self, op: Op) -> TransactionKind {
        match (self, op) {
            (Role::Frhe, Op::Read) => TransactionKind::FrheRead,
            (Role::Frhe, Op::Write) => TransactionKind::FrheWrite,
            (Role::Srle, Op::Read) => TransactionKind::SrleRead,
            (Role::Srle, Op::Write) => TransactionKind::SrleWrite,
            (Role::Slc, Op::Read) => TransactionKind::SlcRead,
            (Role::Slc, Op::Write) => TransactionKind::SlcWrite,
            (Role::Stacked, Op::Read) => TransactionKind::StackedRead,
            (Role::Stacked, Op::Write) => TransactionKind::StackedWrite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Hard = 0,
    Soft = 1,
}

impl Slot {
    pub fn other(self) -> Slot {
        match self {
            Slot::Hard => Slot::Soft,
            Slot::Soft => Slot::Hard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    Mlc,
    Slc,
    Stacked,
}

/// Whether a stripped array starts at its minimum or maximum associativity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    /// Every row merged into SLC mode.
    #[default]
    MinWays,
    /// Every row in MLC mode.
    MaxWays,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LineState {
    pub valid: bool,
    pub dirty: bool,
    pub tag: u64,
    /// Reads and writes in the current epoch.
    pub read_count: u32,
    pub write_count: u32,
    pub last_touch: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub mode: PairMode,
    /// Indexed by [`Slot`]: hard (FRHE) then soft (SRLE / single line).
    pub lines: [LineState; 2],
    pub scnt: u32,
    pub swcnt: u32,
    /// Times this row was switched from SLC to MLC mode.
    pub activations: u64,
}

impl PairState {
    fn new(mode: PairMode) -> Self {
        Self { mode, lines: [LineState::default(); 2], scnt: 0, swcnt: 1, activations: 0 }
    }

    pub fn line(&self, slot: Slot) -> &LineState {
        &self.lines[slot as usize]
    }

    pub fn frhe(&self) -> &LineState {
        self.line(Slot::Hard)
    }

    pub fn srle(&self) -> &LineState {
        self.line(Slot::Soft)
    }

    /// Role of `slot` under the current mode, or `None` if the mode leaves
    /// the slot unused.
    pub fn role_of(&self, slot: Slot) -> Option<Role> {
        match (self.mode, slot) {
            (PairMode::Mlc, Slot::Hard) => Some(Role::Frhe),
            (PairMode::Mlc, Slot::Soft) => Some(Role::Srle),
            (PairMode::Slc, Slot::Soft) => Some(Role::Slc),
            (PairMode::Stacked, Slot::Soft) => Some(Role::Stacked),
            _ => None,
        }
    }

    /// Logical ways the mode provides.
    pub fn enabled_ways(&self) -> u32 {
        match self.mode {
            PairMode::Mlc => 2,
            PairMode::Slc | PairMode::Stacked => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotId {
    pub pair: usize,
    pub slot: Slot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvictReason {
    Replacement,
    Merge,
    WearOut,
}

/// A valid line that left the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evicted {
    pub set: usize,
    pub tag: u64,
    pub dirty: bool,
    pub role: Role,
    pub reason: EvictReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessOutcome {
    pub hit: bool,
    pub role_hit: Option<Role>,
    pub slot: Option<SlotId>,
    /// Lookup plus data-array cycles.
    pub latency_cycles: u64,
    pub energy_nj: f64,
    /// Lines lost to wear-out during this access.
    pub evicted: Vec<Evicted>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillOutcome {
    /// `None` when the set has no usable way left and the block bypasses.
    pub slot: Option<SlotId>,
    pub role: Option<Role>,
    pub evicted: Vec<Evicted>,
    pub cost: TransactionCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayChange {
    pub evicted: Vec<Evicted>,
    pub cost: TransactionCost,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub grows: u64,
    pub shrinks: u64,
    pub swaps: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub frhe: u64,
    pub srle: u64,
    pub slc: u64,
    pub stacked: u64,
}

impl RoleCounts {
    fn bump(&mut self, role: Role) {
        match role {
            Role::Frhe => self.frhe += 1,
            Role::Srle => self.srle += 1,
            Role::Slc => self.slc += 1,
            Role::Stacked => self.stacked += 1,
        }
    }
}

/// Dynamic energy by cause, in nJ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub read_nj: f64,
    pub write_nj: f64,
    pub fill_nj: f64,
    pub swap_nj: f64,
    pub merge_nj: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.read_nj + self.write_nj + self.fill_nj + self.swap_nj + self.merge_nj
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArrayStats {
    pub accesses: u64,
    pub reads: u64,
    pub writes: u64,
    pub hits: u64,
    pub misses: u64,
    pub read_hits: RoleCounts,
    pub write_hits: RoleCounts,
    pub fills: u64,
    pub bypasses: u64,
    pub evictions: u64,
    pub dirty_evictions: u64,
    pub wearout_evictions: u64,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetState {
    pub pairs: Vec<PairState>,
    pub stats: SetStats,
}

#[derive(Debug, Clone)]
pub struct CacheArray {
    org: Organization,
    geometry: CacheGeometry,
    costs: ArrayCosts,
    sets: Vec<SetState>,
    stamp: u64,
    wear: WearTracker,
    stats: ArrayStats,
}

impl CacheArray {
    pub fn new(
        org: Organization,
        geometry: CacheGeometry,
        costs: ArrayCosts,
        wear: WearTracker,
        initial: InitialMode,
    ) -> Self {
        let mode = match (org, initial) {
            (Organization::Slc, _) => PairMode::Slc,
            (Organization::Stacked, _) => PairMode::Stacked,
            (Organization::Stripped, InitialMode::MinWays) => PairMode::Slc,
            (Organization::Stripped, InitialMode::MaxWays) => PairMode::Mlc,
        };
        let rows = geometry.rows_per_set(org);
        let sets = (0..geometry.total_sets())
            .map(|_| SetState {
                pairs: (0..rows).map(|_| PairState::new(mode)).collect(),
                stats: SetStats::default(),
            })
            .collect();
        Self { org, geometry, costs, sets, stamp: 0, wear, stats: ArrayStats::default() }
    }

    /// Array with wear limits taken from `profile` for the given organization.
    pub fn with_profile(
        org: Organization,
        geometry: CacheGeometry,
        costs: ArrayCosts,
        profile: &DeviceProfile,
        endurance: EnduranceConfig,
        initial: InitialMode,
    ) -> Self {
        let (layout, hard, soft) = match org {
            Organization::Stripped => {
                (RowLayout::Stripped, profile.hard_endurance, profile.soft_endurance)
            }
            Organization::Slc => (RowLayout::Slc, profile.slc_endurance, profile.slc_endurance),
            Organization::Stacked => {
                (RowLayout::Stacked, profile.hard_endurance, profile.soft_endurance)
            }
        };
        let wear = WearTracker::new(
            layout,
            geometry.total_sets(),
            geometry.rows_per_set(org),
            geometry.line_bits(),
            hard,
            soft,
            endurance,
        );
        Self::new(org, geometry, costs, wear, initial)
    }

    pub fn organization(&self) -> Organization {
        self.org
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geometry
    }

    pub fn costs(&self) -> &ArrayCosts {
        &self.costs
    }

    pub fn stats(&self) -> &ArrayStats {
        &self.stats
    }

    pub fn wear(&self) -> &WearTracker {
        &self.wear
    }

    pub fn wear_mut(&mut self) -> &mut WearTracker {
        &mut self.wear
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, set: usize) -> &SetState {
        &self.sets[set]
    }

    pub fn pair(&self, set: usize, pair: usize) -> &PairState {
        &self.sets[set].pairs[pair]
    }

    pub fn pair_mut(&mut self, set: usize, pair: usize) -> &mut PairState {
        &mut self.sets[set].pairs[pair]
    }

    pub fn pairs_per_set(&self) -> usize {
        self.geometry.rows_per_set(self.org)
    }

    /// Logical way index used by the wear tracker.
    pub fn way_index(&self, id: SlotId) -> usize {
        match self.org {
            Organization::Stripped => id.pair * 2 + id.slot as usize,
            Organization::Slc | Organization::Stacked => id.pair,
        }
    }

    fn slot_of_way(&self, way: usize) -> SlotId {
        match self.org {
            Organization::Stripped => SlotId {
                pair: way / 2,
                slot: if way % 2 == 0 { Slot::Hard } else { Slot::Soft },
            },
            Organization::Slc | Organization::Stacked => SlotId { pair: way, slot: Slot::Soft },
        }
    }

    pub fn slot_dead(&self, set: usize, id: SlotId) -> bool {
        self.wear.way_dead(set, self.way_index(id))
    }

    /// Enabled by the row mode and not worn out.
    pub fn slot_usable(&self, set: usize, id: SlotId) -> bool {
        self.sets[set].pairs[id.pair].role_of(id.slot).is_some() && !self.slot_dead(set, id)
    }

    /// Ways provided by the row modes: 2 per MLC row, 1 per SLC row.
    pub fn active_ways(&self, set: usize) -> u32 {
        self.sets[set].pairs.iter().map(PairState::enabled_ways).sum()
    }

    /// Active ways that are not worn out.
    pub fn usable_ways(&self, set: usize) -> u32 {
        self.slots(set).filter(|&id| self.slot_usable(set, id)).count() as u32
    }

    fn slots(&self, set: usize) -> impl Iterator<Item = SlotId> + '_ {
        (0..self.sets[set].pairs.len())
            .flat_map(|pair| [Slot::Hard, Slot::Soft].map(|slot| SlotId { pair, slot }))
    }

    fn usable_slots(&self, set: usize) -> Vec<SlotId> {
        self.slots(set).filter(|&id| self.slot_usable(set, id)).collect()
    }

    pub fn line(&self, set: usize, id: SlotId) -> &LineState {
        self.sets[set].pairs[id.pair].line(id.slot)
    }

    fn line_mut(&mut self, set: usize, id: SlotId) -> &mut LineState {
        &mut self.sets[set].pairs[id.pair].lines[id.slot as usize]
    }

    fn role(&self, set: usize, id: SlotId) -> Role {
        self.sets[set].pairs[id.pair]
            .role_of(id.slot)
            .expect("slot enabled by its row mode")
    }

    fn touch(&mut self) -> u64 {
        self.stamp += 1;
        self.stamp
    }

    /// Scan the usable lines of `set` for `tag`.
    pub fn lookup(&self, set: usize, tag: u64) -> Option<(SlotId, Role)> {
        self.slots(set)
            .filter(|&id| self.slot_usable(set, id))
            .find(|&id| {
                let l = self.line(set, id);
                l.valid && l.tag == tag
            })
            .map(|id| (id, self.role(set, id)))
    }

    /// Probe and, on a hit, perform the data access. A miss only costs the
    /// tag lookup; filling is left to the caller.
    pub fn access(&mut self, set: usize, tag: u64, op: Op) -> AccessOutcome {
        self.stats.accesses += 1;
        match op {
            Op::Read => self.stats.reads += 1,
            Op::Write => self.stats.writes += 1,
        }
        self.sets[set].stats.accesses += 1;
        let lookup = self.costs.lookup_cycles;
        let Some((id, role)) = self.lookup(set, tag) else {
            self.stats.misses += 1;
            self.sets[set].stats.misses += 1;
            return AccessOutcome {
                hit: false,
                role_hit: None,
                slot: None,
                latency_cycles: lookup,
                energy_nj: 0.0,
                evicted: Vec::new(),
            };
        };
        self.stats.hits += 1;
        self.sets[set].stats.hits += 1;
        let stamp = self.touch();
        let kind = role.kind(op);
        {
            let line = self.line_mut(set, id);
            line.last_touch = stamp;
            match op {
                Op::Read => line.read_count = line.read_count.saturating_add(1),
                Op::Write => {
                    line.write_count = line.write_count.saturating_add(1);
                    line.dirty = true;
                }
            }
        }
        let (cost, evicted) = match op {
            Op::Read => {
                self.stats.read_hits.bump(role);
                let cost = self.costs.kind(kind);
                self.stats.energy.read_nj += cost.energy_nj;
                (cost, Vec::new())
            }
            Op::Write => {
                self.stats.write_hits.bump(role);
                let (cost, evicted) = self.charge_steps(set, id.pair, steps_for(kind));
                self.stats.energy.write_nj += cost.energy_nj;
                (cost, evicted)
            }
        };
        AccessOutcome {
            hit: true,
            role_hit: Some(role),
            slot: Some(id),
            latency_cycles: lookup + cost.cycles,
            energy_nj: cost.energy_nj,
            evicted,
        }
    }

    /// LRU victim among usable lines; invalid lines go first, in slot order.
    pub fn choose_victim(&self, set: usize) -> Option<SlotId> {
        let slots = self.usable_slots(set);
        slots
            .iter()
            .copied()
            .find(|&id| !self.line(set, id).valid)
            .or_else(|| slots.iter().copied().min_by_key(|&id| self.line(set, id).last_touch))
    }

    /// Allocate `tag` after a miss, evicting the LRU line.
    pub fn fill(&mut self, set: usize, tag: u64, dirty: bool) -> FillOutcome {
        debug_assert!(self.lookup(set, tag).is_none(), "fill of a resident tag");
        let Some(id) = self.choose_victim(set) else {
            self.stats.bypasses += 1;
            return FillOutcome {
                slot: None,
                role: None,
                evicted: Vec::new(),
                cost: TransactionCost::default(),
            };
        };
        let mut evicted = Vec::new();
        let role = self.role(set, id);
        let old = *self.line(set, id);
        if old.valid {
            evicted.push(self.record_eviction(set, old, role, EvictReason::Replacement));
        }
        let stamp = self.touch();
        *self.line_mut(set, id) = LineState {
            valid: true,
            dirty,
            tag,
            read_count: 0,
            write_count: 0,
            last_touch: stamp,
        };
        self.stats.fills += 1;
        let (cost, lost) = self.charge_steps(set, id.pair, steps_for(role.kind(Op::Write)));
        self.stats.energy.fill_nj += cost.energy_nj;
        evicted.extend(lost);
        FillOutcome { slot: Some(id), role: Some(role), evicted, cost }
    }

    /// Cost of writing a line back into a line of `role` at this level.
    pub fn write_back_cost(&self, role: Role, dirty: bool) -> TransactionCost {
        if dirty {
            self.costs.kind(role.kind(Op::Write))
        } else {
            TransactionCost::default()
        }
    }

    fn record_eviction(&mut self, set: usize, line: LineState, role: Role, reason: EvictReason) -> Evicted {
        self.stats.evictions += 1;
        if line.dirty {
            self.stats.dirty_evictions += 1;
        }
        if reason == EvictReason::WearOut {
            self.stats.wearout_evictions += 1;
        }
        Evicted { set, tag: line.tag, dirty: line.dirty, role, reason }
    }

    /// Charge `steps` on row `pair`, wear its domains and drop lines that die.
    fn charge_steps(&mut self, set: usize, pair: usize, steps: &[Step]) -> (TransactionCost, Vec<Evicted>) {
        let mut cost = TransactionCost::default();
        let mut evicted = Vec::new();
        for &step in steps {
            cost += self.costs.step(step);
            if let Some(domain) = step.wears() {
                let deaths = self.wear.record_write(set, pair, domain);
                evicted.extend(self.apply_deaths(&deaths));
            }
        }
        (cost, evicted)
    }

    fn apply_deaths(&mut self, deaths: &[LineDeath]) -> Vec<Evicted> {
        let mut evicted = Vec::new();
        for d in deaths {
            let id = self.slot_of_way(d.way);
            let line = *self.line(d.set, id);
            if line.valid {
                let role = self.sets[d.set].pairs[id.pair]
                    .role_of(id.slot)
                    .unwrap_or(Role::Frhe);
                evicted.push(self.record_eviction(d.set, line, role, EvictReason::WearOut));
            }
            *self.line_mut(d.set, id) = LineState::default();
        }
        evicted
    }

    /// Switch an SLC-mode row to MLC mode. The resident block stays in the
    /// soft domains and becomes the SRLE line; the FRHE way starts empty.
    pub fn activate_pair(&mut self, set: usize, pair: usize) {
        assert_eq!(self.org, Organization::Stripped, "only stripped rows change mode");
        let p = &mut self.sets[set].pairs[pair];
        assert_eq!(p.mode, PairMode::Slc, "row is already in MLC mode");
        p.mode = PairMode::Mlc;
        p.lines[Slot::Hard as usize] = LineState::default();
        p.activations += 1;
        self.sets[set].stats.grows += 1;
    }

    /// Merge an MLC row into SLC mode. The row's LRU line is evicted; the
    /// survivor ends up in the soft domains. Pinning the hard domains costs
    /// one hard-domain write, and relocating a hard-resident survivor one
    /// soft-domain write.
    pub fn merge_pair(&mut self, set: usize, pair: usize) -> ArrayChange {
        assert_eq!(self.sets[set].pairs[pair].mode, PairMode::Mlc, "row is not in MLC mode");
        let hard = *self.sets[set].pairs[pair].line(Slot::Hard);
        let soft = *self.sets[set].pairs[pair].line(Slot::Soft);
        let victim_slot = match (hard.valid, soft.valid) {
            (false, _) => Slot::Hard,
            (true, false) => Slot::Soft,
            (true, true) => {
                if hard.last_touch <= soft.last_touch {
                    Slot::Hard
                } else {
                    Slot::Soft
                }
            }
        };
        let mut evicted = Vec::new();
        let victim = if victim_slot == Slot::Hard { hard } else { soft };
        if victim.valid {
            let role = self.role(set, SlotId { pair, slot: victim_slot });
            evicted.push(self.record_eviction(set, victim, role, EvictReason::Merge));
        }
        let survivor = if victim_slot == Slot::Hard { soft } else { hard };
        let relocate = victim_slot == Slot::Soft && survivor.valid;
        {
            let p = &mut self.sets[set].pairs[pair];
            p.mode = PairMode::Slc;
            p.lines[Slot::Hard as usize] = LineState::default();
            p.lines[Slot::Soft as usize] = survivor;
        }
        let steps: &[Step] = if relocate { &[Step::WriteHard, Step::WriteSoft] } else { &[Step::WriteHard] };
        let (cost, lost) = self.charge_steps(set, pair, steps);
        evicted.extend(lost);
        self.stats.energy.merge_nj += cost.energy_nj;
        self.sets[set].stats.shrinks += 1;
        ArrayChange { evicted, cost }
    }

    /// Exchange the FRHE and SRLE lines of an MLC row. Each valid block is
    /// written into its new slot with that slot's write transaction.
    pub fn swap_pair(&mut self, set: usize, pair: usize) -> ArrayChange {
        assert_eq!(self.sets[set].pairs[pair].mode, PairMode::Mlc, "row is not in MLC mode");
        let p = &mut self.sets[set].pairs[pair];
        p.lines.swap(0, 1);
        let mut steps: Vec<Step> = Vec::new();
        for slot in [Slot::Hard, Slot::Soft] {
            let line = &mut p.lines[slot as usize];
            if line.valid {
                line.write_count = line.write_count.saturating_add(1);
                let role = if slot == Slot::Hard { Role::Frhe } else { Role::Srle };
                steps.extend_from_slice(steps_for(role.kind(Op::Write)));
            }
        }
        let (cost, evicted) = self.charge_steps(set, pair, &steps);
        self.stats.energy.swap_nj += cost.energy_nj;
        self.sets[set].stats.swaps += 1;
        ArrayChange { evicted, cost }
    }

    /// Reset per-line epoch read/write counts of a set.
    pub fn clear_epoch_counts(&mut self, set: usize) {
        for p in &mut self.sets[set].pairs {
            for l in &mut p.lines {
                l.read_count = 0;
                l.write_count = 0;
            }
        }
    }

    /// Usable line with the oldest recency stamp (invalid lines first).
    pub fn lru_slot(&self, set: usize, filter: impl Fn(SlotId) -> bool) -> Option<SlotId> {
        let slots: Vec<SlotId> = self.usable_slots(set).into_iter().filter(|&id| filter(id)).collect();
        slots
            .iter()
            .copied()
            .find(|&id| !self.line(set, id).valid)
            .or_else(|| slots.iter().copied().min_by_key(|&id| self.line(set, id).last_touch))
    }

    pub fn domain_writes(&self, set: usize, pair: usize, domain: Domain) -> u64 {
        let (h, s) = self.wear.row_writes(set, pair);
        match domain {
            Domain::Hard => h,
            Domain::Soft => s,
        }
    }

    /// Structural invariants; returns the first violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let s = &self.stats;
        if s.hits + s.misses != s.accesses {
            return Err(format!("hits {} + misses {} != accesses {}", s.hits, s.misses, s.accesses));
        }
        let (min, max) = (self.geometry.min_ways, self.geometry.max_ways);
        for (i, set) in self.sets.iter().enumerate() {
            let st = &set.stats;
            if st.hits + st.misses != st.accesses {
                return Err(format!("set {i}: hits + misses != accesses"));
            }
            let active = self.active_ways(i);
            if active < min || active > max {
                return Err(format!("set {i}: active ways {active} outside [{min}, {max}]"));
            }
            let mut tags = Vec::new();
            for (pi, p) in set.pairs.iter().enumerate() {
                if p.mode == PairMode::Slc && p.frhe().valid {
                    return Err(format!("set {i} row {pi}: SLC row with a valid hard-domain line"));
                }
                for slot in [Slot::Hard, Slot::Soft] {
                    let l = p.line(slot);
                    if l.dirty && !l.valid {
                        return Err(format!("set {i} row {pi}: dirty invalid line"));
                    }
                    if l.valid && self.slot_usable(i, SlotId { pair: pi, slot }) {
                        tags.push(l.tag);
                    }
                }
            }
            tags.sort_unstable();
            if tags.windows(2).any(|w| w[0] == w[1]) {
                return Err(format!("set {i}: duplicate tag"));
            }
        }
        Ok(())
    }

    /// JSON dump of every set for debugging.
    pub fn dump_json(&self) -> serde_json::Value {
        serde_json::json!({ "organization": self.org, "sets": self.sets })
    }
}
