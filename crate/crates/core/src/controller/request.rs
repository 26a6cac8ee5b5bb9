use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mapping::AddressMap;
use crate::time::Time;

/// High-level memory operation handed to the controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RequestKind {
    Read {
        addr: u64,
    },
    /// Full-cacheline write; `data` is exactly one cacheline.
    Write {
        addr: u64,
        data: Vec<u8>,
    },
    Copy {
        src: u64,
        dst: u64,
        len: u64,
    },
    Zero {
        dst: u64,
        len: u64,
    },
}

impl RequestKind {
    pub fn label(&self) -> &'static str {
        match self {
            RequestKind::Read { .. } => "read",
            RequestKind::Write { .. } => "write",
            RequestKind::Copy { .. } => "copy",
            RequestKind::Zero { .. } => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkRequest {
    #[serde(flatten)]
    pub kind: RequestKind,
    pub arrival: Time,
}

impl BulkRequest {
    pub fn read(addr: u64, arrival: Time) -> Self {
        BulkRequest {
            kind: RequestKind::Read { addr },
            arrival,
        }
    }

    pub fn write(addr: u64, data: Vec<u8>, arrival: Time) -> Self {
        BulkRequest {
            kind: RequestKind::Write { addr, data },
            arrival,
        }
    }

    pub fn copy(src: u64, dst: u64, len: u64, arrival: Time) -> Self {
        BulkRequest {
            kind: RequestKind::Copy { src, dst, len },
            arrival,
        }
    }

    pub fn zero(dst: u64, len: u64, arrival: Time) -> Self {
        BulkRequest {
            kind: RequestKind::Zero { dst, len },
            arrival,
        }
    }

    /// Checks alignment, bounds and that no reserved zero row is written.
    pub fn validate(&self, map: &AddressMap) -> Result<(), RequestError> {
        let g = map.geometry();
        let line = g.cacheline_bytes;
        let aligned = |a: u64| a.is_multiple_of(line);
        let in_range =
            |a: u64, len: u64| a.checked_add(len).is_some_and(|end| end <= map.capacity());
        let check_dst = |dst: u64, len: u64| -> Result<(), RequestError> {
            let mut a = dst;
            while a < dst + len {
                let r = map.row_of(a).expect("range checked");
                if r.row == g.zero_row() {
                    return Err(RequestError::ReservedRow { addr: a });
                }
                a += line;
            }
            Ok(())
        };
        match &self.kind {
            RequestKind::Read { addr } => {
                if !aligned(*addr) {
                    return Err(RequestError::Alignment {
                        what: "address",
                        value: *addr,
                    });
                }
                if !in_range(*addr, line) {
                    return Err(RequestError::OutOfRange { addr: *addr });
                }
            }
            RequestKind::Write { addr, data } => {
                if !aligned(*addr) {
                    return Err(RequestError::Alignment {
                        what: "address",
                        value: *addr,
                    });
                }
                if !in_range(*addr, line) {
                    return Err(RequestError::OutOfRange { addr: *addr });
                }
                if data.len() as u64 != line {
                    return Err(RequestError::PayloadSize {
                        got: data.len(),
                        line,
                    });
                }
                check_dst(*addr, line)?;
            }
            RequestKind::Copy { src, dst, len } => {
                for (what, v) in [("source", *src), ("destination", *dst), ("length", *len)] {
                    if !aligned(v) {
                        return Err(RequestError::Alignment { what, value: v });
                    }
                }
                if *len == 0 {
                    return Err(RequestError::EmptyLength);
                }
                for a in [*src, *dst] {
                    if !in_range(a, *len) {
                        return Err(RequestError::OutOfRange { addr: a });
                    }
                }
                if src < &(dst + len) && dst < &(src + len) {
                    return Err(RequestError::Overlap {
                        src: *src,
                        dst: *dst,
                        len: *len,
                    });
                }
                check_dst(*dst, *len)?;
            }
            RequestKind::Zero { dst, len } => {
                for (what, v) in [("destination", *dst), ("length", *len)] {
                    if !aligned(v) {
                        return Err(RequestError::Alignment { what, value: v });
                    }
                }
                if *len == 0 {
                    return Err(RequestError::EmptyLength);
                }
                if !in_range(*dst, *len) {
                    return Err(RequestError::OutOfRange { addr: *dst });
                }
                check_dst(*dst, *len)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for BulkRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{} ", self.arrival)?;
        match &self.kind {
            RequestKind::Read { addr } => write!(f, "R {addr:#x}"),
            RequestKind::Write { addr, .. } => write!(f, "W {addr:#x}"),
            RequestKind::Copy { src, dst, len } => write!(f, "C {src:#x} {dst:#x} {len:#x}"),
            RequestKind::Zero { dst, len } => write!(f, "Z {dst:#x} {len:#x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequestError {
    #[error("{what} {value:#x} is not cacheline-aligned")]
    Alignment { what: &'static str, value: u64 },
    #[error("length must be greater than zero")]
    EmptyLength,
    #[error("address {addr:#x} is out of range")]
    OutOfRange { addr: u64 },
    #[error("source and destination overlap: {src:#x} -> {dst:#x} ({len:#x} bytes)")]
    Overlap { src: u64, dst: u64, len: u64 },
    #[error("address {addr:#x} lies in a reserved zero row")]
    ReservedRow { addr: u64 },
    #[error("write payload is {got} bytes, expected {line}")]
    PayloadSize { got: usize, line: u64 },
}
