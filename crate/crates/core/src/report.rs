//! Running simulations and shaping their results.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cache::{EnergyBreakdown, Organization, RoleCounts};
use crate::config::{LinePreset, PolicyMode, SimConfig};
use crate::device::leakage_energy;
use crate::error::{SimError, TraceError};
use crate::hierarchy::{Amat, AccessRecord, Decision, Hierarchy, LevelCounts, ServedCounts, amat};
use crate::llc::EpochRecord;
use crate::workload::{AccessEvent, trace_checksum};

/// Relative tolerance when comparing summed energies.
pub const ENERGY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceInfo {
    pub events: u64,
    pub sha256: String,
}

impl TraceInfo {
    pub fn of(events: &[AccessEvent]) -> Self {
        Self { events: events.len() as u64, sha256: trace_checksum(events) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlcSummary {
    pub accesses: u64,
    pub reads: u64,
    pub writes: u64,
    pub hits: u64,
    pub misses: u64,
    pub read_hits: RoleCounts,
    pub write_hits: RoleCounts,
    pub fills: u64,
    pub evictions: u64,
    pub dirty_evictions: u64,
    pub wearout_evictions: u64,
    pub wrq_forwards: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySummary {
    pub reads: u64,
    pub row_hits: u64,
    pub writes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub l1: LevelCounts,
    pub l2: LevelCounts,
    pub llc: LlcSummary,
    pub memory: MemorySummary,
    pub served: ServedCounts,
}

/// LLC energy. Upper-level SRAM energy is not modeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub dynamic: EnergyBreakdown,
    pub dynamic_nj: f64,
    pub leakage_w: f64,
    pub leakage_nj: f64,
    pub total_nj: f64,
    pub elapsed_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub grows: u64,
    pub shrinks: u64,
    pub swaps: u64,
    pub mean_active_ways: f64,
    pub min_active_ways: u32,
    pub max_active_ways: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRow {
    pub set: usize,
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub grows: u64,
    pub shrinks: u64,
    pub swaps: u64,
    pub active_ways: u32,
    pub dead_ways: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WearSummary {
    pub hard_writes: u64,
    pub soft_writes: u64,
    pub dead_lines: u64,
    pub failed_sets: u64,
    pub first_set_failure_cycle: Option<u64>,
    /// Linear projection of the time to the first set failure.
    pub lifetime_s: Option<f64>,
    pub limiting_set: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSummary {
    pub forced_writes: u64,
    pub stall_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResults {
    pub levels: LevelSummary,
    pub amat: Amat,
    pub llc_mpki: f64,
    pub llc_hpki: f64,
    pub energy: EnergySummary,
    pub policy: PolicySummary,
    pub queues: QueueSummary,
    pub wear: WearSummary,
    pub epochs: Vec<EpochRecord>,
    pub sets: Vec<SetRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub trace: TraceInfo,
    pub results: SimResults,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_s: Option<f64>,
}

/// A finished run: the report plus the per-event log.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub report: SimReport,
    pub records: Vec<AccessRecord>,
    /// Scheduling decisions per bank, when `log_decisions` is set.
    pub decisions: Vec<Vec<Decision>>,
}

fn invariant(msg: impl Into<String>) -> SimError {
    SimError::Invariant(msg.into())
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn run_simulation(config: &SimConfig, events: &[AccessEvent]) -> Result<SimRun, SimError> {
    if events.is_empty() {
        return Err(TraceError::Empty.into());
    }
    let started = Instant::now();
    let llc = config.build_llc()?;
    let mut h = Hierarchy::new(config.hierarchy_config(), llc);
    h.run(events)?;

    h.llc().array().check_invariants().map_err(invariant)?;
    h.check_inclusion().map_err(invariant)?;
    let decisions: Vec<Vec<Decision>> = h.banks().iter().map(|b| b.decisions().to_vec()).collect();
    let clock_ghz = config.clock_hz / 1e9;
    let (llc, stats, records) = h.into_parts();
    let array = llc.array();
    let a = array.stats();

    let logged: f64 = records.iter().map(|r| r.energy_nj).sum();
    let dynamic_nj = a.energy.total();
    if !relative_close(logged, dynamic_nj, ENERGY_REL_TOL) {
        return Err(invariant(format!("per-access energy {logged} nJ != array energy {dynamic_nj} nJ")));
    }
    if stats.served.l1 + stats.served.l2 + stats.served.llc + stats.served.wrq + stats.served.memory != stats.events {
        return Err(invariant("served counts do not cover every event"));
    }

    let elapsed_ns = stats.end_cycle as f64 / clock_ghz;
    let leakage_w = array.costs().leakage_w;
    let leakage_nj = leakage_energy(leakage_w, elapsed_ns);
    let kilo_instr = stats.events as f64 * config.instructions_per_access / 1000.0;

    let sets: Vec<SetRow> = (0..array.num_sets())
        .map(|i| {
            let s = &array.set(i).stats;
            SetRow {
                set: i,
                accesses: s.accesses,
                hits: s.hits,
                misses: s.misses,
                grows: s.grows,
                shrinks: s.shrinks,
                swaps: s.swaps,
                active_ways: array.active_ways(i),
                dead_ways: array.wear().dead_ways(i),
            }
        })
        .collect();
    let ways: Vec<u32> = sets.iter().map(|s| s.active_ways).collect();
    let policy = PolicySummary {
        grows: sets.iter().map(|s| s.grows).sum(),
        shrinks: sets.iter().map(|s| s.shrinks).sum(),
        swaps: sets.iter().map(|s| s.swaps).sum(),
        mean_active_ways: ways.iter().map(|&w| f64::from(w)).sum::<f64>() / ways.len().max(1) as f64,
        min_active_ways: ways.iter().copied().min().unwrap_or(0),
        max_active_ways: ways.iter().copied().max().unwrap_or(0),
    };
    let wear = array.wear();
    let (hard_writes, soft_writes) = wear.domain_totals();
    let estimate = wear.estimate_lifetime(elapsed_ns);

    let results = SimResults {
        levels: LevelSummary {
            l1: stats.l1,
            l2: stats.l2,
            llc: LlcSummary {
                accesses: a.accesses,
                reads: a.reads,
                writes: a.writes,
                hits: a.hits,
                misses: a.misses,
                read_hits: a.read_hits,
                write_hits: a.write_hits,
                fills: a.fills,
                evictions: a.evictions,
                dirty_evictions: a.dirty_evictions,
                wearout_evictions: a.wearout_evictions,
                wrq_forwards: stats.wrq_forwards,
            },
            memory: MemorySummary { reads: stats.memory_reads, row_hits: stats.memory_row_hits, writes: stats.memory_writes },
            served: stats.served,
        },
        amat: amat(&records, clock_ghz)?,
        llc_mpki: a.misses as f64 / kilo_instr,
        llc_hpki: a.hits as f64 / kilo_instr,
        energy: EnergySummary {
            dynamic: a.energy,
            dynamic_nj,
            leakage_w,
            leakage_nj,
            total_nj: dynamic_nj + leakage_nj,
            elapsed_ns,
        },
        policy,
        queues: QueueSummary { forced_writes: stats.forced_writes, stall_cycles: stats.stall_cycles },
        wear: WearSummary {
            hard_writes,
            soft_writes,
            dead_lines: wear.failure().dead_lines.len() as u64,
            failed_sets: wear.failure().failed_sets.len() as u64,
            first_set_failure_cycle: stats.first_set_failure_cycle,
            lifetime_s: estimate.seconds,
            limiting_set: estimate.limiting_set,
        },
        epochs: llc.epoch_log().to_vec(),
        sets,
    };
    let report = SimReport {
        config: config.clone(),
        trace: TraceInfo::of(events),
        results,
        wall_clock_s: Some(started.elapsed().as_secs_f64()),
    };
    Ok(SimRun { report, records, decisions })
}

impl SimReport {
    /// Pretty JSON; wall-clock time only when `timing` is set, so that
    /// repeated runs produce identical bytes.
    pub fn to_json(&self, timing: bool) -> String {
        let mut r = self.clone();
        if !timing {
            r.wall_clock_s = None;
        }
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    pub fn results_json(&self) -> String {
        serde_json::to_string_pretty(&self.results).expect("results serialize")
    }

    /// `metric,value` lines.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in self.summary_pairs() {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "LLC {:?} {} KB, {}-{} ways, {} banks, policy {:?}",
            self.config.organization,
            self.config.total_bytes / 1024,
            self.config.min_ways,
            self.config.max_ways,
            self.config.banks,
            self.config.policy
        );
        let _ = writeln!(out, "trace {} events, sha256 {}", self.trace.events, self.trace.sha256);
        for (k, v) in self.summary_pairs() {
            let _ = writeln!(out, "  {k:<28} {v}");
        }
        out
    }

    fn summary_pairs(&self) -> Vec<(&'static str, String)> {
        let r = &self.results;
        let llc = &r.levels.llc;
        vec![
            ("events", self.trace.events.to_string()),
            ("l1_hits", r.levels.l1.hits.to_string()),
            ("l1_misses", r.levels.l1.misses.to_string()),
            ("l2_hits", r.levels.l2.hits.to_string()),
            ("l2_misses", r.levels.l2.misses.to_string()),
            ("llc_accesses", llc.accesses.to_string()),
            ("llc_hits", llc.hits.to_string()),
            ("llc_misses", llc.misses.to_string()),
            ("llc_wrq_forwards", llc.wrq_forwards.to_string()),
            ("llc_mpki", format!("{:.4}", r.llc_mpki)),
            ("amat_cycles", format!("{:.4}", r.amat.cycles)),
            ("amat_ns", format!("{:.4}", r.amat.ns)),
            ("llc_dynamic_nj", format!("{:.4}", r.energy.dynamic_nj)),
            ("llc_leakage_nj", format!("{:.4}", r.energy.leakage_nj)),
            ("llc_total_nj", format!("{:.4}", r.energy.total_nj)),
            ("grows", r.policy.grows.to_string()),
            ("shrinks", r.policy.shrinks.to_string()),
            ("swaps", r.policy.swaps.to_string()),
            ("mean_active_ways", format!("{:.3}", r.policy.mean_active_ways)),
            ("hard_domain_writes", r.wear.hard_writes.to_string()),
            ("soft_domain_writes", r.wear.soft_writes.to_string()),
            ("dead_lines", r.wear.dead_lines.to_string()),
            ("failed_sets", r.wear.failed_sets.to_string()),
            ("lifetime_s", r.wear.lifetime_s.map_or("unbounded".into(), |s| format!("{s:.6e}"))),
        ]
    }
}

/// Per-set distribution: one row per set, zero rows included.
pub fn histogram_csv(results: &SimResults) -> String {
    let mut out = String::from("set,accesses,misses,grows,shrinks,swaps,active_ways\n");
    for s in &results.sets {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.set, s.accesses, s.misses, s.grows, s.shrinks, s.swaps, s.active_ways
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Iso-area SLC: half the capacity and half the ways.
    Slc,
    StackedMlc,
    StrippedStatic,
    StrippedDynamic,
    /// SLC with the full capacity and ways (twice the area).
    SlcDouble,
}

impl Baseline {
    pub const STANDARD: [Baseline; 4] =
        [Baseline::Slc, Baseline::StackedMlc, Baseline::StrippedStatic, Baseline::StrippedDynamic];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Slc => "slc",
            Baseline::StackedMlc => "stacked_mlc",
            Baseline::StrippedStatic => "stripped_static",
            Baseline::StrippedDynamic => "stripped_dynamic",
            Baseline::SlcDouble => "slc_double",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Baseline::Slc, Baseline::StackedMlc, Baseline::StrippedStatic, Baseline::StrippedDynamic, Baseline::SlcDouble]
            .into_iter()
            .find(|b| b.name() == name)
    }
}

/// Config for `baseline`, sized from the stripped MLC capacity and maximum
/// associativity of `base`.
pub fn baseline_config(base: &SimConfig, baseline: Baseline) -> SimConfig {
    let mlc_bytes = base.total_bytes;
    let ways = base.max_ways;
    let mut c = base.clone();
    c.line_preset = LinePreset::Auto;
    match baseline {
        Baseline::Slc => {
            c.organization = Organization::Slc;
            c.total_bytes = mlc_bytes / 2;
            c.min_ways = ways / 2;
            c.max_ways = ways / 2;
            c.policy = PolicyMode::Off;
        }
        Baseline::StackedMlc => {
            c.organization = Organization::Stacked;
            c.min_ways = ways;
            c.policy = PolicyMode::Off;
        }
        Baseline::StrippedStatic => {
            c.organization = Organization::Stripped;
            c.min_ways = ways / 2;
            c.policy = PolicyMode::Static;
        }
        Baseline::StrippedDynamic => {
            c.organization = Organization::Stripped;
            c.min_ways = ways / 2;
            c.policy = PolicyMode::Dynamic;
        }
        Baseline::SlcDouble => {
            c.organization = Organization::Slc;
            c.min_ways = ways;
            c.policy = PolicyMode::Off;
            c.line_preset = LinePreset::SlcDoubleArea;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub misses: Option<f64>,
    pub amat: Option<f64>,
    pub energy: Option<f64>,
    pub lifetime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub baseline: Baseline,
    pub trace_sha256: String,
    pub misses: u64,
    pub amat_cycles: f64,
    pub llc_energy_nj: f64,
    pub lifetime_s: Option<f64>,
    /// Each column divided by the `slc` row.
    pub normalized: Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub trace: TraceInfo,
    pub rows: Vec<ComparisonRow>,
}

fn ratio(x: f64, base: f64) -> Option<f64> {
    (base != 0.0 && base.is_finite() && x.is_finite()).then(|| x / base)
}

/// Run every baseline on the same events, concurrently.
pub fn compare(base: &SimConfig, events: &[AccessEvent], baselines: &[Baseline]) -> Result<Comparison, SimError> {
    if events.is_empty() {
        return Err(TraceError::Empty.into());
    }
    let configs: Vec<SimConfig> = baselines.iter().map(|&b| baseline_config(base, b)).collect();
    for c in &configs {
        c.validate()?;
    }
    let reports = parallel_map(&configs, |c| run_simulation(c, events).map(|r| r.report))?;
    let mut rows: Vec<ComparisonRow> = baselines
        .iter()
        .zip(&reports)
        .map(|(&baseline, r)| ComparisonRow {
            baseline,
            trace_sha256: r.trace.sha256.clone(),
            misses: r.results.levels.llc.misses,
            amat_cycles: r.results.amat.cycles,
            llc_energy_nj: r.results.energy.total_nj,
            lifetime_s: r.results.wear.lifetime_s,
            normalized: Normalized { misses: None, amat: None, energy: None, lifetime: None },
        })
        .collect();
    if let Some(slc) = rows.iter().find(|r| r.baseline == Baseline::Slc).cloned() {
        for r in &mut rows {
            r.normalized = Normalized {
                misses: ratio(r.misses as f64, slc.misses as f64),
                amat: ratio(r.amat_cycles, slc.amat_cycles),
                energy: ratio(r.llc_energy_nj, slc.llc_energy_nj),
                lifetime: match (r.lifetime_s, slc.lifetime_s) {
                    (Some(x), Some(b)) => ratio(x, b),
                    _ => None,
                },
            };
        }
    }
    Ok(Comparison { trace: TraceInfo::of(events), rows })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.6}"))
}

impl Comparison {
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "baseline,trace_sha256,misses,amat_cycles,llc_energy_nj,lifetime_s,norm_misses,norm_amat,norm_energy,norm_lifetime\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{},{},{},{}",
                r.baseline.name(),
                r.trace_sha256,
                r.misses,
                r.amat_cycles,
                r.llc_energy_nj,
                r.lifetime_s.map_or(String::new(), |s| format!("{s:.6e}")),
                opt(r.normalized.misses),
                opt(r.normalized.amat),
                opt(r.normalized.energy),
                opt(r.normalized.lifetime),
            );
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!("trace {} events, sha256 {}\n", self.trace.events, self.trace.sha256);
        let _ = writeln!(
            out,
            "{:<18} {:>10} {:>10} {:>14} {:>12} {:>9} {:>9} {:>9} {:>9}",
            "baseline", "misses", "amat", "energy_nj", "lifetime_s", "n_miss", "n_amat", "n_energy", "n_life"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<18} {:>10} {:>10.3} {:>14.3} {:>12} {:>9} {:>9} {:>9} {:>9}",
                r.baseline.name(),
                r.misses,
                r.amat_cycles,
                r.llc_energy_nj,
                r.lifetime_s.map_or("-".into(), |s| format!("{s:.3e}")),
                r.normalized.misses.map_or("-".into(), |x| format!("{x:.4}")),
                r.normalized.amat.map_or("-".into(), |x| format!("{x:.4}")),
                r.normalized.energy.map_or("-".into(), |x| format!("{x:.4}")),
                r.normalized.lifetime.map_or("-".into(), |x| format!("{x:.4}")),
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n_assoc: Vec<u32>,
    pub n_swap: Vec<u32>,
    pub epoch_len: Vec<u64>,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<(u32, u32, u64)> {
        let mut out = Vec::new();
        for &a in &self.n_assoc {
            for &s in &self.n_swap {
                for &e in &self.epoch_len {
                    out.push((a, s, e));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_assoc: u32,
    pub n_swap: u32,
    pub epoch_len: u64,
    pub results: SimResults,
}

pub fn sweep(base: &SimConfig, events: &[AccessEvent], grid: &SweepGrid) -> Result<Vec<SweepPoint>, SimError> {
    let configs: Vec<SimConfig> = grid
        .points()
        .into_iter()
        .map(|(n_assoc, n_swap, epoch_len)| SimConfig { n_assoc, n_swap, epoch_len, ..base.clone() })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let results = parallel_map(&configs, |c| run_simulation(c, events).map(|r| r.report.results))?;
    Ok(configs
        .iter()
        .zip(results)
        .map(|(c, results)| SweepPoint { n_assoc: c.n_assoc, n_swap: c.n_swap, epoch_len: c.epoch_len, results })
        .collect())
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(
        "n_assoc,n_swap,epoch_len,llc_misses,amat_cycles,llc_dynamic_nj,grows,shrinks,swaps,hard_writes,soft_writes\n",
    );
    for p in points {
        let r = &p.results;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{},{},{},{},{}",
            p.n_assoc,
            p.n_swap,
            p.epoch_len,
            r.levels.llc.misses,
            r.amat.cycles,
            r.energy.dynamic_nj,
            r.policy.grows,
            r.policy.shrinks,
            r.policy.swaps,
            r.wear.hard_writes,
            r.wear.soft_writes
        );
    }
    out
}

/// Apply `f` to every item on a pool of scoped threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R, SimError> + Sync,
) -> Result<Vec<R>, SimError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let chunk = items.len().div_ceil(workers).max(1);
    let f = &f;
    let chunks: Vec<Vec<Result<R, SimError>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(f).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    chunks.into_iter().flatten().collect()
}
