//! Flat key/value simulation configuration.
//!
//! A config file is TOML with one level of keys. `preset = "<name>"` picks the
//! starting values (default `desk`); every other key overrides one field.
//! Unknown keys are rejected.
//!
//! Cost note: the `line` cost model attaches the 42-cycle write-hit figure
//! to the FRHE (hard) write and the 19-cycle figure to the SRLE (soft) write.
//! The source table prints them the other way round, which contradicts the
//! step sequences.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheArray, CacheGeometry, InitialMode, Organization};
use crate::device::{ArrayCosts, DeviceProfile, EndurancePreset, LineCostProfile};
use crate::endurance::EnduranceConfig;
use crate::error::ConfigError;
use crate::hierarchy::{HierarchyConfig, MemoryTiming, UpperLevel};
use crate::llc::{Llc, PolicyKind};
use crate::policy::PolicyParams;

/// Adaptive behavior of the LLC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// No adaptive logic; rows keep `initial_mode`.
    Off,
    /// Stripped array fixed at maximum associativity, no adaptive logic.
    Static,
    #[default]
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Per-line presets for each organization.
    #[default]
    Line,
    /// Per-cell device figures times line bits.
    Device,
}

/// Which per-line preset the `line` cost model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinePreset {
    /// Chosen from the organization.
    #[default]
    Auto,
    StrippedMlc,
    Slc,
    StackedMlc,
    SlcDoubleArea,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    // device
    pub endurance_preset: EndurancePreset,
    pub soft_read_ns: f64,
    pub hard_read_ns: f64,
    pub slc_read_ns: f64,
    pub soft_write_ns: f64,
    pub hard_write_ns: f64,
    pub slc_write_ns: f64,
    pub soft_read_pj: f64,
    pub hard_read_pj: f64,
    pub slc_read_pj: f64,
    pub soft_write_pj: f64,
    pub hard_write_pj: f64,
    pub slc_write_pj: f64,
    /// Overrides of the preset's endurance figures.
    pub soft_endurance: Option<u64>,
    pub hard_endurance: Option<u64>,
    pub slc_endurance: Option<u64>,
    pub clock_hz: f64,

    // LLC array
    pub organization: Organization,
    pub total_bytes: u64,
    pub line_bytes: u32,
    pub min_ways: u32,
    pub max_ways: u32,
    pub banks: u32,
    pub initial_mode: InitialMode,
    pub cost_model: CostModel,
    pub line_preset: LinePreset,
    /// Used by the `device` cost model.
    pub lookup_cycles: u64,
    pub leakage_w: f64,

    // policy
    pub policy: PolicyMode,
    pub epoch_len: u64,
    pub n_assoc: u32,
    pub n_swap: u32,
    pub m_swap: u32,
    pub grow: bool,
    pub shrink: bool,
    pub swap: bool,

    // hierarchy
    pub cores: u32,
    pub l1_bytes: u64,
    pub l1_ways: u32,
    pub l1_cycles: u64,
    pub l2_bytes: u64,
    pub l2_ways: u32,
    pub l2_cycles: u64,
    pub l2_to_l3_cycles: u64,
    pub rdq_capacity: usize,
    pub wrq_capacity: usize,
    pub row_hit_ns: f64,
    pub row_miss_ns: f64,
    pub row_hit_ratio: f64,

    // endurance model
    pub ecc_bits: u32,
    pub dead_ways_to_fail: u32,
    pub endurance_sigma: f64,
    pub endurance_seed: u64,

    // reporting
    pub instructions_per_access: f64,
    pub log_decisions: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::desk()
    }
}

pub const PRESETS: [&str; 3] = ["desk", "llc_only", "eight_core"];

impl SimConfig {
    /// 512 KB 16-way stripped LLC in 8 banks, one core with small private
    /// caches.
    pub fn desk() -> Self {
        let d = DeviceProfile::default();
        Self {
            endurance_preset: EndurancePreset::Lifetime,
            soft_read_ns: d.soft_read_ns,
            hard_read_ns: d.hard_read_ns,
            slc_read_ns: d.slc_read_ns,
            soft_write_ns: d.soft_write_ns,
            hard_write_ns: d.hard_write_ns,
            slc_write_ns: d.slc_write_ns,
            soft_read_pj: d.soft_read_pj,
            hard_read_pj: d.hard_read_pj,
            slc_read_pj: d.slc_read_pj,
            soft_write_pj: d.soft_write_pj,
            hard_write_pj: d.hard_write_pj,
            slc_write_pj: d.slc_write_pj,
            soft_endurance: None,
            hard_endurance: None,
            slc_endurance: None,
            clock_hz: d.clock_hz,
            organization: Organization::Stripped,
            total_bytes: 512 * 1024,
            line_bytes: 64,
            min_ways: 8,
            max_ways: 16,
            banks: 8,
            initial_mode: InitialMode::MinWays,
            cost_model: CostModel::Line,
            line_preset: LinePreset::Auto,
            lookup_cycles: 3,
            leakage_w: 0.0,
            policy: PolicyMode::Dynamic,
            epoch_len: 100_000,
            n_assoc: 4,
            n_swap: 4,
            m_swap: 256,
            grow: true,
            shrink: true,
            swap: true,
            cores: 1,
            l1_bytes: 32 * 1024,
            l1_ways: 4,
            l1_cycles: 1,
            l2_bytes: 128 * 1024,
            l2_ways: 16,
            l2_cycles: 10,
            l2_to_l3_cycles: 4,
            rdq_capacity: 8,
            wrq_capacity: 32,
            row_hit_ns: 36.0,
            row_miss_ns: 66.0,
            row_hit_ratio: 0.0,
            ecc_bits: 5,
            dead_ways_to_fail: 4,
            endurance_sigma: 0.0,
            endurance_seed: 1,
            instructions_per_access: 1.0,
            log_decisions: false,
        }
    }

    /// Desk geometry with the private caches removed: every trace access
    /// goes straight to the LLC.
    pub fn llc_only() -> Self {
        Self { l1_bytes: 0, l2_bytes: 0, ..Self::desk() }
    }

    /// Eight cores with 32 KB L1s, 2 MB L2s and an 8 MB 16-way stripped LLC.
    pub fn eight_core() -> Self {
        Self {
            cores: 8,
            l2_bytes: 2 * 1024 * 1024,
            total_bytes: 8 * 1024 * 1024,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "desk" => Ok(Self::desk()),
            "llc_only" => Ok(Self::llc_only()),
            "eight_core" => Ok(Self::eight_core()),
            other => Err(ConfigError::invalid("preset", format!("unknown preset `{other}` (known: {})", PRESETS.join(", ")))),
        }
    }

    /// Parse TOML text; keys override the chosen preset.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let base = match table.remove("preset") {
            None => Self::desk(),
            Some(toml::Value::String(name)) => Self::preset(&name)?,
            Some(_) => return Err(ConfigError::invalid("preset", "must be a string")),
        };
        let mut merged = toml::Table::try_from(&base).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (k, v) in table {
            merged.insert(k, v);
        }
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn device_profile(&self) -> DeviceProfile {
        let (soft, hard, slc) = self.endurance_preset.limits();
        DeviceProfile {
            soft_read_ns: self.soft_read_ns,
            hard_read_ns: self.hard_read_ns,
            slc_read_ns: self.slc_read_ns,
            soft_write_ns: self.soft_write_ns,
            hard_write_ns: self.hard_write_ns,
            slc_write_ns: self.slc_write_ns,
            soft_write_pj: self.soft_write_pj,
            hard_write_pj: self.hard_write_pj,
            slc_write_pj: self.slc_write_pj,
            soft_read_pj: self.soft_read_pj,
            hard_read_pj: self.hard_read_pj,
            slc_read_pj: self.slc_read_pj,
            soft_endurance: self.soft_endurance.unwrap_or(soft),
            hard_endurance: self.hard_endurance.unwrap_or(hard),
            slc_endurance: self.slc_endurance.unwrap_or(slc),
            clock_hz: self.clock_hz,
        }
    }

    pub fn geometry(&self) -> CacheGeometry {
        CacheGeometry::new(self.total_bytes, self.line_bytes, self.min_ways, self.max_ways, self.banks)
    }

    pub fn line_costs(&self) -> Option<LineCostProfile> {
        if self.cost_model == CostModel::Device {
            return None;
        }
        Some(match (self.line_preset, self.organization) {
            (LinePreset::StrippedMlc, _) | (LinePreset::Auto, Organization::Stripped) => LineCostProfile::stripped_mlc(),
            (LinePreset::Slc, _) | (LinePreset::Auto, Organization::Slc) => LineCostProfile::slc(),
            (LinePreset::StackedMlc, _) | (LinePreset::Auto, Organization::Stacked) => LineCostProfile::stacked_mlc(),
            (LinePreset::SlcDoubleArea, _) => LineCostProfile::slc_double_area(),
        })
    }

    pub fn array_costs(&self) -> ArrayCosts {
        let geo = self.geometry();
        ArrayCosts::new(
            &self.device_profile(),
            geo.line_bits(),
            self.line_costs().as_ref(),
            self.lookup_cycles,
            self.leakage_w,
        )
    }

    pub fn policy_params(&self) -> PolicyParams {
        PolicyParams {
            epoch_len: self.epoch_len,
            n_assoc: self.n_assoc,
            n_swap: self.n_swap,
            m_swap: self.m_swap,
            grow: self.grow,
            shrink: self.shrink,
            swap: self.swap,
        }
    }

    pub fn endurance_config(&self) -> EnduranceConfig {
        EnduranceConfig {
            ecc_bits: self.ecc_bits,
            dead_ways_to_fail: self.dead_ways_to_fail,
            sigma: self.endurance_sigma,
            seed: self.endurance_seed,
        }
    }

    pub fn hierarchy_config(&self) -> HierarchyConfig {
        HierarchyConfig {
            cores: self.cores,
            l1: UpperLevel { bytes: self.l1_bytes, ways: self.l1_ways, cycles: self.l1_cycles },
            l2: UpperLevel { bytes: self.l2_bytes, ways: self.l2_ways, cycles: self.l2_cycles },
            l2_to_l3_cycles: self.l2_to_l3_cycles,
            rdq_capacity: self.rdq_capacity,
            wrq_capacity: self.wrq_capacity,
            memory: MemoryTiming {
                row_hit_ns: self.row_hit_ns,
                row_miss_ns: self.row_miss_ns,
                row_hit_ratio: self.row_hit_ratio,
            },
            clock_ghz: self.clock_hz / 1e9,
            log_decisions: self.log_decisions,
            keep_records: true,
        }
    }

    /// Row modes the array starts with.
    pub fn effective_initial_mode(&self) -> InitialMode {
        match self.policy {
            PolicyMode::Static => InitialMode::MaxWays,
            PolicyMode::Off | PolicyMode::Dynamic => self.initial_mode,
        }
    }

    pub fn policy_kind(&self) -> PolicyKind {
        match self.policy {
            PolicyMode::Dynamic => PolicyKind::Dynamic,
            PolicyMode::Off | PolicyMode::Static => PolicyKind::Off,
        }
    }

    pub fn build_llc(&self) -> Result<Llc, ConfigError> {
        self.validate()?;
        let array = CacheArray::with_profile(
            self.organization,
            self.geometry(),
            self.array_costs(),
            &self.device_profile(),
            self.endurance_config(),
            self.effective_initial_mode(),
        );
        Ok(Llc::new(array, self.policy_kind(), self.policy_params()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.device_profile().validate()?;
        self.geometry().validate(self.organization)?;
        self.policy_params().validate()?;
        if let Some(l) = self.line_costs() {
            l.validate()?;
            if self.line_bytes != 64 {
                return Err(ConfigError::invalid(
                    "line_bytes",
                    "the line cost model is for 64-byte lines; use cost_model = \"device\"",
                ));
            }
        }
        if self.policy == PolicyMode::Dynamic && self.organization != Organization::Stripped {
            return Err(ConfigError::invalid("policy", "dynamic policy needs organization = \"stripped\""));
        }
        if self.policy == PolicyMode::Static && self.organization != Organization::Stripped {
            return Err(ConfigError::invalid("policy", "static policy needs organization = \"stripped\""));
        }
        if self.cores == 0 {
            return Err(ConfigError::invalid("cores", "must be positive"));
        }
        for (key, bytes, ways) in [("l1", self.l1_bytes, self.l1_ways), ("l2", self.l2_bytes, self.l2_ways)] {
            if bytes > 0 && (ways == 0 || bytes < u64::from(self.line_bytes) * u64::from(ways)) {
                return Err(ConfigError::invalid(format!("{key}_ways"), "level too small for its associativity"));
            }
        }
        if self.rdq_capacity == 0 || self.wrq_capacity == 0 {
            return Err(ConfigError::invalid("wrq_capacity", "queue capacities must be positive"));
        }
        if !(self.row_hit_ns > 0.0 && self.row_hit_ns <= self.row_miss_ns) {
            return Err(ConfigError::invalid("row_hit_ns", "need 0 < row_hit_ns <= row_miss_ns"));
        }
        if !(0.0..=1.0).contains(&self.row_hit_ratio) {
            return Err(ConfigError::invalid("row_hit_ratio", "must be in [0, 1]"));
        }
        if !(self.endurance_sigma >= 0.0 && self.endurance_sigma.is_finite()) {
            return Err(ConfigError::invalid("endurance_sigma", "must be finite and non-negative"));
        }
        if !(self.instructions_per_access > 0.0 && self.instructions_per_access.is_finite()) {
            return Err(ConfigError::invalid("instructions_per_access", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            SimConfig::preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn keys_override_preset() {
        let c = SimConfig::from_toml_str("preset = \"llc_only\"\nn_assoc = 7\npolicy = \"static\"\n").unwrap();
        assert_eq!(c.n_assoc, 7);
        assert_eq!(c.l1_bytes, 0);
        assert_eq!(c.policy, PolicyMode::Static);
        assert_eq!(c.effective_initial_mode(), InitialMode::MaxWays);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(SimConfig::from_toml_str("n_asoc = 3"), Err(ConfigError::Parse(_))));
        assert!(SimConfig::from_toml_str("preset = \"huge\"").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(SimConfig::from_toml_str("max_ways = 12").is_err());
        assert!(SimConfig::from_toml_str("organization = \"slc\"").is_err());
        assert!(SimConfig::from_toml_str("organization = \"slc\"\npolicy = \"off\"\nmin_ways = 16").is_ok());
        assert!(SimConfig::from_toml_str("epoch_len = 0").is_err());
    }

    #[test]
    fn endurance_overrides() {
        let c = SimConfig::from_toml_str("soft_endurance = 10000\nhard_endurance = 10000").unwrap();
        let p = c.device_profile();
        assert_eq!((p.soft_endurance, p.hard_endurance), (10_000, 10_000));
        assert_eq!(p.slc_endurance, 1_000_000_000_000);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = SimConfig::eight_core();
        assert_eq!(SimConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }
}
