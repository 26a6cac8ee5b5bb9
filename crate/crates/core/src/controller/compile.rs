//! Lowering of requests into ordered DRAM command sequences.
//!
//! Sequences assume every bank they touch starts precharged; the scheduler
//! adds a leading PRE (or drops the ACT on a row hit) when it finds a bank
//! left open by an earlier access.

use thiserror::Error;

use super::mapping::AddressMap;
use super::mechanism::{row_pairs, Mechanism, ZeroRows};
use crate::dram::{CommandKind, RowAddr};

/// Where a WR gets its data from, or where a RD puts it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpData {
    None,
    /// RD: keep the line in controller buffer slot `n`.
    Capture(u32),
    /// WR: write the line held in buffer slot `n`.
    FromSlot(u32),
    /// WR: write an all-zero line.
    Zeros,
    /// WR: write the request's own payload.
    Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Op {
    pub kind: CommandKind,
    pub data: OpData,
}

impl Op {
    fn plain(kind: CommandKind) -> Self {
        Op {
            kind,
            data: OpData::None,
        }
    }

    fn act(r: RowAddr) -> Self {
        Op::plain(CommandKind::Act {
            bank: r.bank,
            subarray: r.subarray,
            row: r.row,
        })
    }

    fn pre(bank: u64) -> Self {
        Op::plain(CommandKind::Pre { bank })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("{mechanism} cannot perform this request: {reason}")]
    Inconsistent {
        mechanism: Mechanism,
        reason: String,
    },
    #[error("no reserved zero row in bank {bank} subarray {subarray}")]
    MissingZeroRow { bank: u64, subarray: u64 },
}

fn inconsistent(mechanism: Mechanism, reason: &str) -> CompileError {
    CompileError::Inconsistent {
        mechanism,
        reason: reason.into(),
    }
}

/// A run of cachelines that stays within one source row and one destination row.
struct Segment {
    src: RowAddr,
    dst: RowAddr,
    src_cols: Vec<u64>,
    dst_cols: Vec<u64>,
}

fn segments(src: u64, dst: u64, len: u64, map: &AddressMap) -> Vec<Segment> {
    let line = map.geometry().cacheline_bytes;
    let mut out: Vec<Segment> = Vec::new();
    let mut off = 0;
    while off < len {
        let s = map.map(src + off).expect("validated request");
        let d = map.map(dst + off).expect("validated request");
        match out.last_mut() {
            Some(seg) if seg.src == s.row_addr() && seg.dst == d.row_addr() => {
                seg.src_cols.push(s.column);
                seg.dst_cols.push(d.column);
            }
            _ => out.push(Segment {
                src: s.row_addr(),
                dst: d.row_addr(),
                src_cols: vec![s.column],
                dst_cols: vec![d.column],
            }),
        }
        off += line;
    }
    out
}

/// In-array row copies, grouped into waves with at most one row per bank.
/// Within a wave all source activations go first, then all destination
/// activations, then the precharges, so rows in different banks overlap.
fn fpm_waves(pairs: &[(RowAddr, RowAddr)]) -> Vec<Op> {
    let mut ops = Vec::with_capacity(pairs.len() * 3);
    let mut wave: Vec<(RowAddr, RowAddr)> = Vec::new();
    let mut flush = |wave: &mut Vec<(RowAddr, RowAddr)>| {
        ops.extend(wave.iter().map(|(s, _)| Op::act(*s)));
        ops.extend(wave.iter().map(|(_, d)| Op::act(*d)));
        ops.extend(wave.iter().map(|(s, _)| Op::pre(s.bank)));
        wave.clear();
    };
    for &(s, d) in pairs {
        if wave.iter().any(|(w, _)| w.bank == s.bank) {
            flush(&mut wave);
        }
        wave.push((s, d));
    }
    flush(&mut wave);
    ops
}

pub fn compile_copy(
    src: u64,
    dst: u64,
    len: u64,
    mech: Mechanism,
    map: &AddressMap,
) -> Result<Vec<Op>, CompileError> {
    let mut ops = Vec::new();
    match mech {
        Mechanism::Fpm => {
            let pairs = row_pairs(src, dst, len, map)
                .ok_or_else(|| inconsistent(mech, "not whole-row aligned"))?;
            if pairs
                .iter()
                .any(|(s, d)| !s.same_subarray(d) || s.row == d.row)
            {
                return Err(inconsistent(
                    mech,
                    "rows are not distinct rows of one subarray",
                ));
            }
            ops = fpm_waves(&pairs);
        }
        Mechanism::Psm => {
            let pairs = row_pairs(src, dst, len, map)
                .ok_or_else(|| inconsistent(mech, "not whole-row aligned"))?;
            let cols = map.geometry().lines_per_row();
            for (s, d) in pairs {
                if s.bank == d.bank {
                    return Err(inconsistent(mech, "source and destination share a bank"));
                }
                ops.extend([Op::act(s), Op::act(d)]);
                ops.extend((0..cols).map(|c| {
                    Op::plain(CommandKind::Transfer {
                        src_bank: s.bank,
                        src_column: c,
                        dst_bank: d.bank,
                        dst_column: c,
                    })
                }));
                ops.extend([Op::pre(s.bank), Op::pre(d.bank)]);
            }
        }
        Mechanism::BaselineCopy => {
            for seg in segments(src, dst, len, map) {
                let reads = seg.src_cols.iter().enumerate().map(|(i, &c)| Op {
                    kind: CommandKind::Rd {
                        bank: seg.src.bank,
                        column: c,
                    },
                    data: OpData::Capture(i as u32),
                });
                let writes: Vec<Op> = seg
                    .dst_cols
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| Op {
                        kind: CommandKind::Wr {
                            bank: seg.dst.bank,
                            column: c,
                        },
                        data: OpData::FromSlot(i as u32),
                    })
                    .collect();
                if seg.src == seg.dst {
                    ops.push(Op::act(seg.src));
                    ops.extend(reads);
                    ops.extend(writes);
                    ops.push(Op::pre(seg.src.bank));
                } else if seg.src.bank == seg.dst.bank {
                    ops.push(Op::act(seg.src));
                    ops.extend(reads);
                    ops.push(Op::pre(seg.src.bank));
                    ops.push(Op::act(seg.dst));
                    ops.extend(writes);
                    ops.push(Op::pre(seg.dst.bank));
                } else {
                    ops.extend([Op::act(seg.src), Op::act(seg.dst)]);
                    ops.extend(reads);
                    ops.push(Op::pre(seg.src.bank));
                    ops.extend(writes);
                    ops.push(Op::pre(seg.dst.bank));
                }
            }
        }
        Mechanism::BaselineZero | Mechanism::FpmZero => {
            return Err(inconsistent(mech, "not a copy mechanism"))
        }
    }
    Ok(ops)
}

pub fn compile_zero(
    dst: u64,
    len: u64,
    mech: Mechanism,
    zero_rows: &ZeroRows,
    map: &AddressMap,
) -> Result<Vec<Op>, CompileError> {
    let g = map.geometry();
    let mut ops = Vec::new();
    match mech {
        Mechanism::FpmZero => {
            let row = g.row_size_bytes;
            if !dst.is_multiple_of(row) || !len.is_multiple_of(row) {
                return Err(inconsistent(mech, "not whole-row aligned"));
            }
            let mut pairs = Vec::new();
            for k in 0..len / row {
                let d = map.row_of(dst + k * row).expect("validated request");
                let z = zero_rows
                    .get(d.bank, d.subarray)
                    .ok_or(CompileError::MissingZeroRow {
                        bank: d.bank,
                        subarray: d.subarray,
                    })?;
                pairs.push((RowAddr { row: z, ..d }, d));
            }
            ops = fpm_waves(&pairs);
        }
        Mechanism::BaselineZero => {
            // Lines of one destination row are written under a single activation.
            let mut current: Option<RowAddr> = None;
            let mut off = 0;
            while off < len {
                let a = map.map(dst + off).expect("validated request");
                if current != Some(a.row_addr()) {
                    if let Some(prev) = current {
                        ops.push(Op::pre(prev.bank));
                    }
                    ops.push(Op::act(a.row_addr()));
                    current = Some(a.row_addr());
                }
                ops.push(Op {
                    kind: CommandKind::Wr {
                        bank: a.bank,
                        column: a.column,
                    },
                    data: OpData::Zeros,
                });
                off += g.cacheline_bytes;
            }
            if let Some(prev) = current {
                ops.push(Op::pre(prev.bank));
            }
        }
        _ => return Err(inconsistent(mech, "not a zeroing mechanism")),
    }
    Ok(ops)
}

pub fn compile_read(addr: u64, map: &AddressMap) -> Vec<Op> {
    let a = map.map(addr).expect("validated request");
    vec![
        Op::act(a.row_addr()),
        Op {
            kind: CommandKind::Rd {
                bank: a.bank,
                column: a.column,
            },
            data: OpData::Capture(0),
        },
    ]
}

pub fn compile_write(addr: u64, map: &AddressMap) -> Vec<Op> {
    let a = map.map(addr).expect("validated request");
    vec![
        Op::act(a.row_addr()),
        Op {
            kind: CommandKind::Wr {
                bank: a.bank,
                column: a.column,
            },
            data: OpData::Payload,
        },
    ]
}
