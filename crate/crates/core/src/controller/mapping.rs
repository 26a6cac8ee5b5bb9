use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dram::{ConfigError, Geometry, RowAddr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Row,
    Subarray,
    Bank,
    Column,
}

/// Location of one cacheline in the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DramAddr {
    pub bank: u64,
    pub subarray: u64,
    pub row: u64,
    pub column: u64,
}

impl DramAddr {
    pub fn row_addr(&self) -> RowAddr {
        RowAddr {
            bank: self.bank,
            subarray: self.subarray,
            row: self.row,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("address {addr:#x} beyond capacity {capacity:#x}")]
pub struct OutOfRange {
    pub addr: u64,
    pub capacity: u64,
}

/// Address mapping configuration as written in the config file. Fields are
/// listed most significant first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    pub field_order: [Field; 4],
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            field_order: [Field::Row, Field::Subarray, Field::Bank, Field::Column],
        }
    }
}

/// Bit-field mapping between physical byte addresses and DRAM coordinates.
///
/// The lowest `log2(cacheline_bytes)` bits are the byte offset within a line.
/// Above that, the fields follow `field_order` from least to most
/// significant. The column must be the least significant field so that each
/// row occupies one contiguous, row-aligned address range (one OS page).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressMap {
    geometry: Geometry,
    order: [Field; 4],
    /// (shift, width) per field, indexed by `Field as usize`.
    bits: [(u32, u32); 4],
    offset_bits: u32,
}

impl AddressMap {
    pub fn new(geometry: Geometry, cfg: MappingConfig) -> Result<Self, ConfigError> {
        geometry.validate()?;
        let order = cfg.field_order;
        for f in [Field::Row, Field::Subarray, Field::Bank, Field::Column] {
            if order.iter().filter(|&&x| x == f).count() != 1 {
                return Err(ConfigError::new(
                    "field_order",
                    "must be a permutation of row, subarray, bank, column",
                ));
            }
        }
        if order[3] != Field::Column {
            return Err(ConfigError::new(
                "field_order",
                "column must be the least significant field",
            ));
        }
        let width = |f: Field| match f {
            Field::Row => geometry.rows_per_subarray.trailing_zeros(),
            Field::Subarray => geometry.subarrays_per_bank.trailing_zeros(),
            Field::Bank => geometry.num_banks.trailing_zeros(),
            Field::Column => geometry.lines_per_row().trailing_zeros(),
        };
        let offset_bits = geometry.cacheline_bytes.trailing_zeros();
        let mut bits = [(0, 0); 4];
        let mut shift = offset_bits;
        for &f in order.iter().rev() {
            bits[f as usize] = (shift, width(f));
            shift += width(f);
        }
        Ok(AddressMap {
            geometry,
            order,
            bits,
            offset_bits,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn config(&self) -> MappingConfig {
        MappingConfig {
            field_order: self.order,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.geometry.capacity()
    }

    fn field(&self, addr: u64, f: Field) -> u64 {
        let (shift, width) = self.bits[f as usize];
        (addr >> shift) & ((1u64 << width) - 1)
    }

    pub fn map(&self, addr: u64) -> Result<DramAddr, OutOfRange> {
        if addr >= self.capacity() {
            return Err(OutOfRange {
                addr,
                capacity: self.capacity(),
            });
        }
        Ok(DramAddr {
            bank: self.field(addr, Field::Bank),
            subarray: self.field(addr, Field::Subarray),
            row: self.field(addr, Field::Row),
            column: self.field(addr, Field::Column),
        })
    }

    /// Address of the first byte of the given cacheline.
    pub fn unmap(&self, a: DramAddr) -> u64 {
        let put = |v: u64, f: Field| v << self.bits[f as usize].0;
        put(a.bank, Field::Bank)
            | put(a.subarray, Field::Subarray)
            | put(a.row, Field::Row)
            | put(a.column, Field::Column)
    }

    pub fn row_of(&self, addr: u64) -> Result<RowAddr, OutOfRange> {
        self.map(addr).map(|d| d.row_addr())
    }

    pub fn row_base(&self, r: RowAddr) -> u64 {
        self.unmap(DramAddr {
            bank: r.bank,
            subarray: r.subarray,
            row: r.row,
            column: 0,
        })
    }

    pub fn byte_offset(&self, addr: u64) -> u64 {
        addr & ((1u64 << self.offset_bits) - 1)
    }
}
