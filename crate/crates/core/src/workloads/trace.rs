//! Text trace format.
//!
//! One record per line, `#` starts a comment:
//!
//! ```text
//! [@<ns>] R <addr>
//! [@<ns>] W <addr> [<byte>]
//! [@<ns>] C <src> <dst> <len>
//! [@<ns>] Z <dst> <len>
//! [@<ns>] F
//! [@<ns>] CW <vpage> [<byte>]
//! ```
//!
//! Numbers other than the timestamp are hexadecimal, with or without `0x`.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::controller::BulkRequest;
use crate::system::{MemOp, DEFAULT_FILL};
use crate::time::Time;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub at: Option<Time>,
    pub op: MemOp,
}

impl TraceRecord {
    pub fn new(op: MemOp) -> Self {
        TraceRecord { at: None, op }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

fn hex(tok: &str, what: &str) -> Result<u64, String> {
    let digits = tok
        .strip_prefix("0x")
        .or_else(|| tok.strip_prefix("0X"))
        .unwrap_or(tok);
    u64::from_str_radix(digits, 16).map_err(|_| format!("invalid hexadecimal {what} '{tok}'"))
}

fn byte(tok: Option<&str>) -> Result<Option<u8>, String> {
    tok.map(|t| {
        hex(t, "value")
            .and_then(|v| u8::try_from(v).map_err(|_| format!("value {t} does not fit in a byte")))
    })
    .transpose()
}

fn parse_line(text: &str, line_bytes: u64) -> Result<Option<TraceRecord>, String> {
    let body = text.split('#').next().unwrap_or("");
    let mut toks = body.split_whitespace().peekable();
    let Some(&first) = toks.peek() else {
        return Ok(None);
    };
    let at = match first.strip_prefix('@') {
        Some(ns) => {
            toks.next();
            let v: f64 = ns
                .parse()
                .map_err(|_| format!("invalid timestamp '{first}'"))?;
            if !v.is_finite() || v < 0.0 {
                return Err(format!("invalid timestamp '{first}'"));
            }
            Some(Time::from_ns(v))
        }
        None => None,
    };
    let mnemonic = toks.next().ok_or("timestamp without an operation")?;
    let args: Vec<&str> = toks.collect();
    let arity = |min: usize, max: usize| {
        if args.len() < min || args.len() > max {
            Err(format!(
                "{mnemonic} takes {} argument(s), got {}",
                if min == max {
                    min.to_string()
                } else {
                    format!("{min}-{max}")
                },
                args.len()
            ))
        } else {
            Ok(())
        }
    };
    let aligned = |v: u64, what: &str| {
        if v.is_multiple_of(line_bytes) {
            Ok(v)
        } else {
            Err(format!(
                "alignment: {what} {v:#x} is not a multiple of {line_bytes}"
            ))
        }
    };
    let length = |tok: &str| {
        let v = aligned(hex(tok, "length")?, "length")?;
        if v == 0 {
            Err("length must be greater than zero".to_string())
        } else {
            Ok(v)
        }
    };
    let op = match mnemonic {
        "R" => {
            arity(1, 1)?;
            MemOp::Read {
                addr: aligned(hex(args[0], "address")?, "address")?,
            }
        }
        "W" => {
            arity(1, 2)?;
            MemOp::Write {
                addr: aligned(hex(args[0], "address")?, "address")?,
                value: byte(args.get(1).copied())?,
            }
        }
        "C" => {
            arity(3, 3)?;
            MemOp::Copy {
                src: aligned(hex(args[0], "source")?, "source")?,
                dst: aligned(hex(args[1], "destination")?, "destination")?,
                len: length(args[2])?,
            }
        }
        "Z" => {
            arity(2, 2)?;
            MemOp::Zero {
                dst: aligned(hex(args[0], "destination")?, "destination")?,
                len: length(args[1])?,
            }
        }
        "F" => {
            arity(0, 0)?;
            MemOp::Fork
        }
        "CW" => {
            arity(1, 2)?;
            MemOp::CowWrite {
                vpage: hex(args[0], "page")?,
                value: byte(args.get(1).copied())?,
            }
        }
        other => return Err(format!("unknown operation '{other}'")),
    };
    Ok(Some(TraceRecord { at, op }))
}

/// Parses a trace. Alignment is checked against `line_bytes`.
pub fn parse_trace(text: &str, line_bytes: u64) -> Result<Vec<TraceRecord>, ParseError> {
    let mut out = Vec::new();
    let mut last: Option<Time> = None;
    for (i, l) in text.lines().enumerate() {
        let err = |reason: String| ParseError {
            line: i + 1,
            reason,
        };
        let Some(rec) = parse_line(l, line_bytes).map_err(err)? else {
            continue;
        };
        if let Some(t) = rec.at {
            if last.is_some_and(|prev| t < prev) {
                return Err(err(format!(
                    "timestamp {t} is earlier than the previous one"
                )));
            }
            last = Some(t);
        }
        out.push(rec);
    }
    Ok(out)
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = self.at {
            write!(f, "@{} ", t.as_ns())?;
        }
        match self.op {
            MemOp::Read { addr } => write!(f, "R {addr:#x}"),
            MemOp::Write { addr, value } => {
                write!(f, "W {addr:#x}")?;
                value.map_or(Ok(()), |v| write!(f, " {v:#04x}"))
            }
            MemOp::Copy { src, dst, len } => write!(f, "C {src:#x} {dst:#x} {len:#x}"),
            MemOp::Zero { dst, len } => write!(f, "Z {dst:#x} {len:#x}"),
            MemOp::Fork => f.write_str("F"),
            MemOp::CowWrite { vpage, value } => {
                write!(f, "CW {vpage:#x}")?;
                value.map_or(Ok(()), |v| write!(f, " {v:#04x}"))
            }
        }
    }
}

pub fn serialize_trace(records: &[TraceRecord]) -> String {
    let mut s = String::new();
    for r in records {
        writeln!(s, "{r}").expect("writing to a String");
    }
    s
}

/// Arrival time of every record: its own timestamp, or the previous
/// arrival plus `gap` (the first untimed record arrives at 0).
pub fn assign_times(records: &[TraceRecord], gap: Time) -> Vec<(Time, MemOp)> {
    let mut prev: Option<Time> = None;
    records
        .iter()
        .map(|r| {
            let t = r.at.unwrap_or_else(|| prev.map_or(Time::ZERO, |p| p + gap));
            prev = Some(t);
            (t, r.op)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("record {index} ({op}) cannot be issued as a plain memory request")]
pub struct NotARequest {
    pub index: usize,
    pub op: String,
}

/// Requests for a trace of physical operations only.
pub fn to_requests(
    records: &[TraceRecord],
    gap: Time,
    line_bytes: u64,
) -> Result<Vec<BulkRequest>, NotARequest> {
    assign_times(records, gap)
        .into_iter()
        .enumerate()
        .map(|(i, (t, op))| match op {
            MemOp::Read { addr } => Ok(BulkRequest::read(addr, t)),
            MemOp::Write { addr, value } => Ok(BulkRequest::write(
                addr,
                vec![value.unwrap_or(DEFAULT_FILL); line_bytes as usize],
                t,
            )),
            MemOp::Copy { src, dst, len } => Ok(BulkRequest::copy(src, dst, len, t)),
            MemOp::Zero { dst, len } => Ok(BulkRequest::zero(dst, len, t)),
            MemOp::Fork | MemOp::CowWrite { .. } => Err(NotARequest {
                index: i,
                op: records[i].to_string(),
            }),
        })
        .collect()
}
