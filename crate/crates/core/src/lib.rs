//! Trace-driven simulator for a last-level cache built from 2-bit
//! STT-RAM cells, with stripped line mapping, dynamic associativity,
//! line swapping and an endurance model.

pub mod cache;
pub mod config;
pub mod device;
pub mod endurance;
pub mod error;
pub mod hierarchy;
pub mod llc;
pub mod policy;
pub mod report;
pub mod workload;

pub use error::{ConfigError, Result, SimError, TraceError, TraceErrorKind};
