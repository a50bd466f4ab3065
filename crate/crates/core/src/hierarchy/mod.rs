//! L1 -> L2 -> LLC -> memory.
//!
//! Functional state changes are applied in trace order. Timing is coarse:
//! each core issues in order, each LLC bank serves one request at a time
//! from its read and write queues, and memory has a fixed latency.

mod queues;
mod upper;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use queues::{BankQueues, Decision, QueueChoice, QueueFull, Request, Serviced, schedule_rule};
pub use upper::UpperCache;

use crate::cache::{CacheGeometry, Evicted};
use crate::error::{SimError, TraceError, TraceErrorKind};
use crate::llc::{Llc, LlcAccess};
use crate::workload::{AccessEvent, Op};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperLevel {
    /// Zero disables the level.
    pub bytes: u64,
    pub ways: u32,
    pub cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryTiming {
    pub row_hit_ns: f64,
    pub row_miss_ns: f64,
    /// Fraction of reads that hit the row buffer; 0 is always-miss.
    pub row_hit_ratio: f64,
}

impl Default for MemoryTiming {
    fn default() -> Self {
        Self { row_hit_ns: 36.0, row_miss_ns: 66.0, row_hit_ratio: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub cores: u32,
    pub l1: UpperLevel,
    pub l2: UpperLevel,
    pub l2_to_l3_cycles: u64,
    pub rdq_capacity: usize,
    pub wrq_capacity: usize,
    pub memory: MemoryTiming,
    pub clock_ghz: f64,
    /// Record each bank scheduling decision.
    pub log_decisions: bool,
    /// Keep one record per trace event.
    pub keep_records: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            cores: 1,
            l1: UpperLevel { bytes: 32 * 1024, ways: 4, cycles: 1 },
            l2: UpperLevel { bytes: 256 * 1024, ways: 16, cycles: 10 },
            l2_to_l3_cycles: 4,
            rdq_capacity: 8,
            wrq_capacity: 32,
            memory: MemoryTiming::default(),
            clock_ghz: 2.0,
            log_decisions: false,
            keep_records: true,
        }
    }
}

/// Where a request was satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    L1,
    L2,
    Llc,
    /// Read served from a pending LLC write.
    Wrq,
    Memory,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::Llc => "LLC",
            Level::Wrq => "WRQ",
            Level::Memory => "MEM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub tick: u64,
    pub issue: u64,
    pub core: u32,
    pub op: Op,
    pub addr: u64,
    pub level: Level,
    pub latency_cycles: u64,
    /// LLC dynamic energy caused by this event.
    pub energy_nj: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HierarchyStats {
    pub events: u64,
    pub reads: u64,
    pub writes: u64,
    pub l1: LevelCounts,
    pub l2: LevelCounts,
    pub served: ServedCounts,
    pub llc_reads: u64,
    pub llc_writes: u64,
    pub llc_writebacks_in: u64,
    pub wrq_forwards: u64,
    pub memory_reads: u64,
    pub memory_row_hits: u64,
    pub memory_writes: u64,
    pub back_invalidations: u64,
    pub forced_writes: u64,
    pub stall_cycles: u64,
    pub total_latency_cycles: u64,
    pub llc_energy_nj: f64,
    /// Cycle at which the last event completed.
    pub end_cycle: u64,
    /// Completion cycle of the event during which the first set failed.
    pub first_set_failure_cycle: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServedCounts {
    pub l1: u64,
    pub l2: u64,
    pub llc: u64,
    pub wrq: u64,
    pub memory: u64,
}

impl ServedCounts {
    fn bump(&mut self, level: Level) {
        match level {
            Level::L1 => self.l1 += 1,
            Level::L2 => self.l2 += 1,
            Level::Llc => self.llc += 1,
            Level::Wrq => self.wrq += 1,
            Level::Memory => self.memory += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amat {
    pub cycles: f64,
    pub ns: f64,
}

/// Mean latency of `records`.
pub fn amat(records: &[AccessRecord], clock_ghz: f64) -> Result<Amat, SimError> {
    if records.is_empty() {
        return Err(TraceError::Empty.into());
    }
    let total: u64 = records.iter().map(|r| r.latency_cycles).sum();
    let cycles = total as f64 / records.len() as f64;
    Ok(Amat { cycles, ns: cycles / clock_ghz })
}

/// Per-event log as CSV.
pub fn records_csv(records: &[AccessRecord]) -> String {
    let mut out = String::from("tick,core,op,addr,level,latency_cycles,energy_nj\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{:#x},{},{},{:e}",
            r.tick,
            r.core,
            r.op,
            r.addr,
            r.level.name(),
            r.latency_cycles,
            r.energy_nj
        );
    }
    out
}

struct Memory {
    timing: MemoryTiming,
    hit_cycles: u64,
    miss_cycles: u64,
    acc: f64,
}

impl Memory {
    fn new(timing: MemoryTiming, clock_ghz: f64) -> Self {
        let cyc = |ns: f64| (ns * clock_ghz - 1e-9).ceil().max(0.0) as u64;
        Self { timing, hit_cycles: cyc(timing.row_hit_ns), miss_cycles: cyc(timing.row_miss_ns), acc: 0.0 }
    }

    /// Latency of the next read; row hits are spread evenly by an
    /// accumulator so the sequence is deterministic.
    fn read(&mut self) -> (u64, bool) {
        self.acc += self.timing.row_hit_ratio;
        if self.acc >= 1.0 - 1e-12 {
            self.acc -= 1.0;
            (self.hit_cycles, true)
        } else {
            (self.miss_cycles, false)
        }
    }
}

struct Core {
    l1: Option<UpperCache>,
    l2: Option<UpperCache>,
    ready: u64,
}

/// Per-event accumulator.
#[derive(Default)]
struct EventCost {
    latency: u64,
    energy: f64,
}

pub struct Hierarchy {
    config: HierarchyConfig,
    geometry: CacheGeometry,
    llc: Llc,
    banks: Vec<BankQueues>,
    cores: Vec<Core>,
    memory: Memory,
    stats: HierarchyStats,
    records: Vec<AccessRecord>,
    event_no: usize,
}

impl Hierarchy {
    pub fn new(config: HierarchyConfig, llc: Llc) -> Self {
        let geometry = *llc.array().geometry();
        let banks = (0..geometry.banks)
            .map(|_| {
                let q = BankQueues::new(config.rdq_capacity, config.wrq_capacity);
                if config.log_decisions { q.with_decision_log() } else { q }
            })
            .collect();
        let cores = (0..config.cores)
            .map(|_| Core {
                l1: UpperCache::new(config.l1.bytes, geometry.line_bytes, config.l1.ways),
                l2: UpperCache::new(config.l2.bytes, geometry.line_bytes, config.l2.ways),
                ready: 0,
            })
            .collect();
        let memory = Memory::new(config.memory, config.clock_ghz);
        Self {
            config,
            geometry,
            llc,
            banks,
            cores,
            memory,
            stats: HierarchyStats::default(),
            records: Vec::new(),
            event_no: 0,
        }
    }

    pub fn llc(&self) -> &Llc {
        &self.llc
    }

    pub fn stats(&self) -> &HierarchyStats {
        &self.stats
    }

    pub fn records(&self) -> &[AccessRecord] {
        &self.records
    }

    pub fn banks(&self) -> &[BankQueues] {
        &self.banks
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.config
    }

    /// Consume the model, returning the LLC and the per-event records.
    pub fn into_parts(self) -> (Llc, HierarchyStats, Vec<AccessRecord>) {
        (self.llc, self.stats, self.records)
    }

    pub fn run(&mut self, events: &[AccessEvent]) -> Result<(), SimError> {
        for ev in events {
            self.process(ev)?;
        }
        Ok(())
    }

    pub fn process(&mut self, ev: &AccessEvent) -> Result<AccessRecord, SimError> {
        self.event_no += 1;
        if ev.core >= self.config.cores {
            return Err(TraceError::at(
                self.event_no,
                TraceErrorKind::CoreOutOfRange { core: ev.core, cores: self.config.cores },
            )
            .into());
        }
        ev.check_line(self.geometry.line_bytes).map_err(|k| TraceError::at(self.event_no, k))?;

        let core = ev.core as usize;
        let line = ev.addr >> self.geometry.offset_bits();
        let issue = ev.tick.max(self.cores[core].ready);
        let mut cost = EventCost::default();
        let level = self.walk(core, line, ev.op, issue, &mut cost);

        self.stats.events += 1;
        match ev.op {
            Op::Read => self.stats.reads += 1,
            Op::Write => self.stats.writes += 1,
        }
        self.stats.served.bump(level);
        self.stats.total_latency_cycles += cost.latency;
        self.stats.llc_energy_nj += cost.energy;
        let done = issue + cost.latency;
        self.cores[core].ready = done;
        self.stats.end_cycle = self.stats.end_cycle.max(done);
        if self.stats.first_set_failure_cycle.is_none() && !self.llc.array().wear().failure().failed_sets.is_empty() {
            self.stats.first_set_failure_cycle = Some(done);
        }
        let record = AccessRecord {
            tick: ev.tick,
            issue,
            core: ev.core,
            op: ev.op,
            addr: ev.addr,
            level,
            latency_cycles: cost.latency,
            energy_nj: cost.energy,
        };
        if self.config.keep_records {
            self.records.push(record);
        }
        Ok(record)
    }

    fn walk(&mut self, core: usize, line: u64, op: Op, issue: u64, cost: &mut EventCost) -> Level {
        let l1_cycles = self.config.l1.cycles;
        let l2_cycles = self.config.l2.cycles;

        if let Some(l1) = self.cores[core].l1.as_mut() {
            cost.latency += l1_cycles;
            let hit = l1.probe(line);
            if hit {
                self.stats.l1.hits += 1;
            } else {
                self.stats.l1.misses += 1;
            }
            // write-through: stores always continue down
            if hit && op == Op::Read {
                return Level::L1;
            }
        }

        if self.cores[core].l2.is_some() {
            cost.latency += l2_cycles;
            let l2 = self.cores[core].l2.as_mut().expect("checked");
            if l2.probe(line) {
                self.stats.l2.hits += 1;
                match op {
                    Op::Write => l2.mark_dirty(line),
                    Op::Read => self.fill_l1(core, line),
                }
                return Level::L2;
            }
            self.stats.l2.misses += 1;
            cost.latency += self.config.l2_to_l3_cycles;
            let t = issue + cost.latency;
            let level = self.llc_read(line, t, cost);
            let victim = self.cores[core].l2.as_mut().expect("checked").insert(line, op == Op::Write);
            if let Some((vline, vdirty)) = victim {
                if let Some(l1) = self.cores[core].l1.as_mut() {
                    l1.invalidate(vline);
                }
                if vdirty {
                    self.stats.llc_writebacks_in += 1;
                    let t = issue + cost.latency;
                    self.llc_write(vline, t, cost, false);
                }
            }
            if op == Op::Read {
                self.fill_l1(core, line);
            }
            return level;
        }

        let t = issue + cost.latency;
        match op {
            Op::Read => {
                let level = self.llc_read(line, t, cost);
                self.fill_l1(core, line);
                level
            }
            Op::Write => self.llc_write(line, t, cost, true),
        }
    }

    fn fill_l1(&mut self, core: usize, line: u64) {
        if let Some(l1) = self.cores[core].l1.as_mut() {
            if !l1.contains(line) {
                // write-through L1 never holds dirty data
                l1.insert(line, false);
            }
        }
    }

    fn bank_of(&self, line: u64) -> (usize, u64, usize) {
        let (set, tag) = self.geometry.split_line(line);
        (set, tag, self.geometry.bank_of_flat(set) as usize)
    }

    fn llc_read(&mut self, line: u64, t: u64, cost: &mut EventCost) -> Level {
        self.stats.llc_reads += 1;
        let (set, tag, bank) = self.bank_of(line);
        self.banks[bank].drain_idle(t);
        let lookup = self.llc.array().costs().lookup_cycles;
        if self.banks[bank].forward_from_wrq(line) && self.llc.array().lookup(set, tag).is_some() {
            self.stats.wrq_forwards += 1;
            cost.latency += lookup;
            return Level::Wrq;
        }
        let acc = self.llc.access(set, tag, Op::Read);
        cost.energy += acc.total_energy_nj();
        let occupancy = lookup + acc.data.cycles;
        self.banks[bank]
            .enqueue_read(Request { line, arrival: t, cycles: occupancy })
            .expect("reads are served one at a time");
        let served = loop {
            let s = self.banks[bank].service_next(t).expect("read pending");
            if s.choice == QueueChoice::Read {
                break s;
            }
        };
        cost.latency += served.end - t;
        if let Some(swap) = &acc.swap {
            self.banks[bank].occupy(served.end, swap.change.cost.cycles);
        }
        let level = if acc.hit {
            Level::Llc
        } else {
            let (mem, row_hit) = self.memory.read();
            self.stats.memory_reads += 1;
            if row_hit {
                self.stats.memory_row_hits += 1;
            }
            cost.latency += mem;
            let fill_cycles = acc.fill.as_ref().map_or(0, |f| f.cost.cycles);
            let arrival = served.end + mem;
            self.enqueue_write(bank, Request { line, arrival, cycles: fill_cycles }, t, cost);
            Level::Memory
        };
        self.after_llc(&acc, t);
        level
    }

    /// A store (`demand`) or an L2 write-back arriving at the LLC. A store
    /// hit waits for the full write-hit latency; a store miss fetches the
    /// line first. Write-backs are posted and only cost the lookup. Both wait
    /// for queue space.
    fn llc_write(&mut self, line: u64, t: u64, cost: &mut EventCost, demand: bool) -> Level {
        self.stats.llc_writes += 1;
        let (set, tag, bank) = self.bank_of(line);
        self.banks[bank].drain_idle(t);
        let lookup = self.llc.array().costs().lookup_cycles;
        let acc = self.llc.access(set, tag, Op::Write);
        cost.energy += acc.total_energy_nj();
        cost.latency += lookup;
        let level = if acc.hit {
            if demand {
                cost.latency += acc.data.cycles;
            }
            let cycles = lookup + acc.data.cycles;
            self.enqueue_write(bank, Request { line, arrival: t, cycles }, t, cost);
            if let Some(swap) = &acc.swap {
                self.banks[bank].occupy(t, swap.change.cost.cycles);
            }
            Level::Llc
        } else {
            let mut arrival = t + lookup;
            if demand {
                let (mem, row_hit) = self.memory.read();
                self.stats.memory_reads += 1;
                if row_hit {
                    self.stats.memory_row_hits += 1;
                }
                cost.latency += mem;
                arrival += mem;
            }
            let cycles = lookup + acc.fill.as_ref().map_or(0, |f| f.cost.cycles);
            self.enqueue_write(bank, Request { line, arrival, cycles }, t, cost);
            Level::Memory
        };
        self.after_llc(&acc, t);
        level
    }

    fn enqueue_write(&mut self, bank: usize, req: Request, now: u64, cost: &mut EventCost) {
        let q = &mut self.banks[bank];
        if q.wrq_len() >= q.wrq_cap() {
            let s = q.force_write(now).expect("full queue has a write");
            self.stats.forced_writes += 1;
            let stall = s.end.saturating_sub(now);
            self.stats.stall_cycles += stall;
            cost.latency += stall;
        }
        q.enqueue_write(req).expect("space was made");
    }

    /// Evictions, back-invalidation and epoch-boundary merge occupancy.
    fn after_llc(&mut self, acc: &LlcAccess, t: u64) {
        for e in acc.evicted() {
            self.evict_upper(&e);
        }
        if let Some(epoch) = &acc.epoch {
            for s in &epoch.shrinks {
                let bank = self.geometry.bank_of_flat(s.set) as usize;
                self.banks[bank].occupy(t, s.change.cost.cycles);
            }
        }
    }

    fn evict_upper(&mut self, e: &Evicted) {
        let line = self.geometry.line_of(e.set, e.tag);
        let mut dirty = e.dirty;
        for c in &mut self.cores {
            let mut present = false;
            if let Some(l1) = c.l1.as_mut() {
                present |= l1.invalidate(line).is_some();
            }
            if let Some(l2) = c.l2.as_mut() {
                if let Some(d) = l2.invalidate(line) {
                    present = true;
                    dirty |= d;
                }
            }
            if present {
                self.stats.back_invalidations += 1;
            }
        }
        if dirty {
            self.stats.memory_writes += 1;
        }
    }

    /// Every line held by an L1 or L2 is resident in the LLC.
    pub fn check_inclusion(&self) -> Result<(), String> {
        for (i, c) in self.cores.iter().enumerate() {
            for cache in [c.l1.as_ref(), c.l2.as_ref()].into_iter().flatten() {
                for line in cache.lines() {
                    let (set, tag) = self.geometry.split_line(line);
                    if self.llc.array().lookup(set, tag).is_none() {
                        return Err(format!("core {i}: line {line:#x} above the LLC but not in it"));
                    }
                }
            }
        }
        Ok(())
    }
}
