use serde::{Deserialize, Serialize};

use super::ConfigError;

/// Banks are tracked in a 64-bit mask by the scheduler.
pub const MAX_BANKS: u64 = 64;

/// Static DRAM organization of a single-rank, single-channel device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub num_banks: u64,
    pub subarrays_per_bank: u64,
    pub rows_per_subarray: u64,
    pub row_size_bytes: u64,
    pub cacheline_bytes: u64,
}

impl Geometry {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("num_banks", self.num_banks),
            ("subarrays_per_bank", self.subarrays_per_bank),
            ("rows_per_subarray", self.rows_per_subarray),
            ("row_size_bytes", self.row_size_bytes),
            ("cacheline_bytes", self.cacheline_bytes),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(ConfigError::new(name, "must be at least 1"));
            }
        }
        if !self.row_size_bytes.is_multiple_of(self.cacheline_bytes) {
            return Err(ConfigError::new(
                "row_size_bytes",
                "not multiple of cacheline",
            ));
        }
        for (name, v) in fields {
            if !v.is_power_of_two() {
                return Err(ConfigError::new(name, "not a power of two"));
            }
        }
        if self.num_banks > MAX_BANKS {
            return Err(ConfigError::new(
                "num_banks",
                "at most 64 banks are supported",
            ));
        }
        if self.capacity_bytes().is_none() {
            return Err(ConfigError::new("geometry", "capacity overflows 64 bits"));
        }
        Ok(())
    }

    pub fn lines_per_row(&self) -> u64 {
        self.row_size_bytes / self.cacheline_bytes
    }

    pub fn rows_per_bank(&self) -> u64 {
        self.subarrays_per_bank * self.rows_per_subarray
    }

    pub fn total_rows(&self) -> u64 {
        self.num_banks * self.rows_per_bank()
    }

    pub fn capacity_bytes(&self) -> Option<u64> {
        self.num_banks
            .checked_mul(self.subarrays_per_bank)?
            .checked_mul(self.rows_per_subarray)?
            .checked_mul(self.row_size_bytes)
    }

    /// Capacity of a geometry that has passed [`Geometry::validate`].
    pub fn capacity(&self) -> u64 {
        self.capacity_bytes().expect("validated geometry")
    }

    /// The row reserved as the all-zero source in each subarray.
    pub fn zero_row(&self) -> u64 {
        self.rows_per_subarray - 1
    }

    pub fn contains(&self, row: RowAddr) -> bool {
        row.bank < self.num_banks
            && row.subarray < self.subarrays_per_bank
            && row.row < self.rows_per_subarray
    }

    /// Every row in the device, bank-major.
    pub fn rows(&self) -> impl Iterator<Item = RowAddr> + '_ {
        (0..self.num_banks).flat_map(move |bank| {
            (0..self.subarrays_per_bank).flat_map(move |subarray| {
                (0..self.rows_per_subarray).map(move |row| RowAddr {
                    bank,
                    subarray,
                    row,
                })
            })
        })
    }
}

/// Coordinates of one DRAM row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowAddr {
    pub bank: u64,
    pub subarray: u64,
    pub row: u64,
}

impl RowAddr {
    pub fn new(bank: u64, subarray: u64, row: u64) -> Self {
        RowAddr {
            bank,
            subarray,
            row,
        }
    }

    pub fn same_subarray(&self, other: &RowAddr) -> bool {
        self.bank == other.bank && self.subarray == other.subarray
    }
}
