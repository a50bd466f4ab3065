use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("failed to parse configuration: {0}")]
    Parse(String),
    #[error("failed to read configuration {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.into(), reason: reason.into() }
    }
}

/// What went wrong on a trace line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceErrorKind {
    #[error("expected 5 fields `tick core op addr size`, found {0}")]
    FieldCount(usize),
    #[error("invalid {field}: `{value}`")]
    BadField { field: &'static str, value: String },
    #[error("invalid op `{0}` (expected R or W)")]
    BadOp(String),
    #[error("tick {tick} is earlier than previous tick {previous}")]
    DecreasingTick { tick: u64, previous: u64 },
    #[error("access of {size} bytes at {addr:#x} crosses a {line_bytes}-byte line boundary")]
    CrossesLine { addr: u64, size: u32, line_bytes: u32 },
    #[error("zero-sized access")]
    ZeroSize,
    #[error("core {core} out of range (configured cores: {cores})")]
    CoreOutOfRange { core: u32, cores: u32 },
    #[error("truncated binary record")]
    Truncated,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {kind}")]
    Line { line: usize, kind: TraceErrorKind },
    #[error("trace is empty")]
    Empty,
    #[error("trace I/O error: {0}")]
    Io(#[from] io::Error),
}

impl TraceError {
    pub fn at(line: usize, kind: TraceErrorKind) -> Self {
        TraceError::Line { line, kind }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
