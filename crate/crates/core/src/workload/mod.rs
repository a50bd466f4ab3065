mod classify;
mod synth;
mod trace;

pub use classify::{BlockStat, Dominance, DominanceReport, DOMINANCE_THRESHOLD, classify, classify_blocks};
pub use synth::{SynthSpec, generate};
pub use trace::{
    AccessEvent, Op, TraceReader, parse, parse_line, parse_str, read_binary, trace_checksum, trace_to_string,
    write_binary, write_trace,
};
