//! Text and binary trace formats.
//!
//! Text: one access per line, `tick core op addr size`, `op` is `R` or `W`,
//! `addr` is hexadecimal (`0x` prefix optional). `#` starts a comment.
//!
//! Binary: a sequence of records, each a little-endian `u32` payload length
//! (always 25) followed by `tick: u64, core: u32, op: u8 (0 = R, 1 = W),
//! addr: u64, size: u32`, all little-endian.

use std::fmt;
use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{TraceError, TraceErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Read,
    Write,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Read => "R",
            Op::Write => "W",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessEvent {
    pub tick: u64,
    pub core: u32,
    pub op: Op,
    pub addr: u64,
    pub size: u32,
}

impl AccessEvent {
    pub fn new(tick: u64, core: u32, op: Op, addr: u64, size: u32) -> Self {
        Self { tick, core, op, addr, size }
    }

    /// The access must be non-empty and stay inside one line.
    pub fn check_line(&self, line_bytes: u32) -> Result<(), TraceErrorKind> {
        if self.size == 0 {
            return Err(TraceErrorKind::ZeroSize);
        }
        let offset = self.addr & (u64::from(line_bytes) - 1);
        if self.size > line_bytes || offset + u64::from(self.size) > u64::from(line_bytes) {
            return Err(TraceErrorKind::CrossesLine { addr: self.addr, size: self.size, line_bytes });
        }
        Ok(())
    }
}

impl fmt::Display for AccessEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {:#x} {}", self.tick, self.core, self.op, self.addr, self.size)
    }
}

/// Parse one line; `Ok(None)` for blank and comment lines.
pub fn parse_line(text: &str) -> Result<Option<AccessEvent>, TraceErrorKind> {
    let body = text.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let fields: Vec<&str> = body.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(TraceErrorKind::FieldCount(fields.len()));
    }
    let bad = |field: &'static str, value: &str| TraceErrorKind::BadField { field, value: value.to_owned() };
    let tick = fields[0].parse().map_err(|_| bad("tick", fields[0]))?;
    let core = fields[1].parse().map_err(|_| bad("core", fields[1]))?;
    let op = match fields[2] {
        "R" | "r" => Op::Read,
        "W" | "w" => Op::Write,
        other => return Err(TraceErrorKind::BadOp(other.to_owned())),
    };
    let hex = fields[3].trim_start_matches("0x").trim_start_matches("0X");
    let addr = u64::from_str_radix(hex, 16).map_err(|_| bad("addr", fields[3]))?;
    let size = fields[4].parse().map_err(|_| bad("size", fields[4]))?;
    Ok(Some(AccessEvent { tick, core, op, addr, size }))
}

/// Streaming parser that checks tick order and line containment.
pub struct TraceReader<R> {
    inner: R,
    line_no: usize,
    prev_tick: Option<u64>,
    line_bytes: u32,
    buf: String,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(inner: R, line_bytes: u32) -> Self {
        Self { inner, line_no: 0, prev_tick: None, line_bytes, buf: String::new() }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<AccessEvent, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let event = match parse_line(&self.buf) {
                Ok(Some(ev)) => ev,
                Ok(None) => continue,
                Err(kind) => return Some(Err(TraceError::at(self.line_no, kind))),
            };
            if let Some(previous) = self.prev_tick {
                if event.tick < previous {
                    return Some(Err(TraceError::at(
                        self.line_no,
                        TraceErrorKind::DecreasingTick { tick: event.tick, previous },
                    )));
                }
            }
            if let Err(kind) = event.check_line(self.line_bytes) {
                return Some(Err(TraceError::at(self.line_no, kind)));
            }
            self.prev_tick = Some(event.tick);
            return Some(Ok(event));
        }
    }
}

pub fn parse<R: BufRead>(reader: R, line_bytes: u32) -> Result<Vec<AccessEvent>, TraceError> {
    TraceReader::new(reader, line_bytes).collect()
}

pub fn parse_str(text: &str, line_bytes: u32) -> Result<Vec<AccessEvent>, TraceError> {
    parse(text.as_bytes(), line_bytes)
}

pub fn write_trace<W: Write>(events: &[AccessEvent], mut out: W) -> io::Result<()> {
    for ev in events {
        writeln!(out, "{ev}")?;
    }
    Ok(())
}

pub fn trace_to_string(events: &[AccessEvent]) -> String {
    let mut buf = Vec::new();
    write_trace(events, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace text is ASCII")
}

/// SHA-256 of the canonical text form, hex encoded.
pub fn trace_checksum(events: &[AccessEvent]) -> String {
    let mut hasher = Sha256::new();
    for ev in events {
        hasher.update(ev.to_string().as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

const RECORD_LEN: u32 = 8 + 4 + 1 + 8 + 4;

pub fn write_binary<W: Write>(events: &[AccessEvent], mut out: W) -> io::Result<()> {
    for ev in events {
        out.write_all(&RECORD_LEN.to_le_bytes())?;
        out.write_all(&ev.tick.to_le_bytes())?;
        out.write_all(&ev.core.to_le_bytes())?;
        out.write_all(&[match ev.op {
            Op::Read => 0,
            Op::Write => 1,
        }])?;
        out.write_all(&ev.addr.to_le_bytes())?;
        out.write_all(&ev.size.to_le_bytes())?;
    }
    Ok(())
}

/// Read binary records; errors are reported by 1-based record number.
pub fn read_binary<R: Read>(mut input: R, line_bytes: u32) -> Result<Vec<AccessEvent>, TraceError> {
    let mut events = Vec::new();
    let mut prev_tick = None;
    loop {
        let record = events.len() + 1;
        let mut len = [0u8; 4];
        match read_full(&mut input, &mut len)? {
            0 => break,
            4 => {}
            _ => return Err(TraceError::at(record, TraceErrorKind::Truncated)),
        }
        let len = u32::from_le_bytes(len);
        if len != RECORD_LEN {
            return Err(TraceError::at(
                record,
                TraceErrorKind::BadField { field: "record length", value: len.to_string() },
            ));
        }
        let mut body = [0u8; RECORD_LEN as usize];
        if read_full(&mut input, &mut body)? != body.len() {
            return Err(TraceError::at(record, TraceErrorKind::Truncated));
        }
        let u64_at = |i: usize| u64::from_le_bytes(body[i..i + 8].try_into().expect("8 bytes"));
        let u32_at = |i: usize| u32::from_le_bytes(body[i..i + 4].try_into().expect("4 bytes"));
        let op = match body[12] {
            0 => Op::Read,
            1 => Op::Write,
            other => return Err(TraceError::at(record, TraceErrorKind::BadOp(other.to_string()))),
        };
        let ev = AccessEvent { tick: u64_at(0), core: u32_at(8), op, addr: u64_at(13), size: u32_at(21) };
        if let Some(previous) = prev_tick {
            if ev.tick < previous {
                return Err(TraceError::at(
                    record,
                    TraceErrorKind::DecreasingTick { tick: ev.tick, previous },
                ));
            }
        }
        ev.check_line(line_bytes).map_err(|k| TraceError::at(record, k))?;
        prev_tick = Some(ev.tick);
        events.push(ev);
    }
    Ok(events)
}

fn read_full<R: Read>(input: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_basic_line() {
        assert_eq!(
            parse_line("0 0 R 0x40 8").unwrap(),
            Some(AccessEvent::new(0, 0, Op::Read, 0x40, 8))
        );
        assert_eq!(parse_line("# comment").unwrap(), None);
        assert_eq!(parse_line("   ").unwrap(), None);
        assert_eq!(parse_line("3 1 W ff 4 # tail").unwrap(), Some(AccessEvent::new(3, 1, Op::Write, 0xff, 4)));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_str("# header\n0 0 R 0x0 8\n5 0 X 0x0 8\n", 64).unwrap_err();
        match err {
            TraceError::Line { line, kind } => {
                assert_eq!(line, 3);
                assert_eq!(kind, TraceErrorKind::BadOp("X".into()));
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_str("5 0 R 0x0 8\n4 0 R 0x0 8\n", 64).unwrap_err();
        assert!(matches!(err, TraceError::Line { line: 2, kind: TraceErrorKind::DecreasingTick { .. } }));
        let err = parse_str("0 0 R 0x3c 8\n", 64).unwrap_err();
        assert!(matches!(err, TraceError::Line { line: 1, kind: TraceErrorKind::CrossesLine { .. } }));
        let err = parse_str("0 0 R 0x0\n", 64).unwrap_err();
        assert!(matches!(err, TraceError::Line { line: 1, kind: TraceErrorKind::FieldCount(4) }));
    }

    #[test]
    fn binary_truncation_is_reported() {
        let mut buf = Vec::new();
        write_binary(&[AccessEvent::new(1, 0, Op::Write, 0x80, 8)], &mut buf).unwrap();
        buf.pop();
        assert!(matches!(
            read_binary(buf.as_slice(), 64),
            Err(TraceError::Line { line: 1, kind: TraceErrorKind::Truncated })
        ));
    }

    fn event_strategy() -> impl Strategy<Value = Vec<AccessEvent>> {
        prop::collection::vec((0u64..50, 0u32..8, any::<bool>(), 0u64..(1 << 40), 0u32..8), 0..60).prop_map(
            |raw| {
                let mut tick = 0;
                raw.into_iter()
                    .map(|(dt, core, w, line, word)| {
                        tick += dt;
                        let op = if w { Op::Write } else { Op::Read };
                        AccessEvent::new(tick, core, op, line * 64 + u64::from(word) * 8, 8)
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn text_round_trip(events in event_strategy()) {
            let text = trace_to_string(&events);
            prop_assert_eq!(parse_str(&text, 64).unwrap(), events);
        }

        #[test]
        fn binary_round_trip(events in event_strategy()) {
            let mut buf = Vec::new();
            write_binary(&events, &mut buf).unwrap();
            prop_assert_eq!(read_binary(buf.as_slice(), 64).unwrap(), events);
        }
    }
}
