use std::fmt;

use serde::{Deserialize, Serialize};

use super::mapping::AddressMap;
use crate::dram::{Geometry, RowAddr};

/// How a copy or initialization is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    /// Row-to-row copy inside one subarray (ACT, ACT, PRE).
    #[serde(rename = "FPM")]
    Fpm,
    /// Cacheline TRANSFERs between two banks over the internal bus.
    #[serde(rename = "PSM")]
    Psm,
    BaselineCopy,
    BaselineZero,
    /// FPM copy from the subarray's reserved zero row.
    FpmZero,
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Fpm => "FPM",
            Mechanism::Psm => "PSM",
            Mechanism::BaselineCopy => "BaselineCopy",
            Mechanism::BaselineZero => "BaselineZero",
            Mechanism::FpmZero => "FpmZero",
        }
    }

    pub fn is_in_dram(&self) -> bool {
        matches!(self, Mechanism::Fpm | Mechanism::Psm | Mechanism::FpmZero)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Feature switches distinguishing baseline, RowClone and RowClone-ZI runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Features {
    pub rowclone: bool,
    /// In-cache copy and clean-zero cache line insertion.
    pub zi: bool,
    pub fpm: bool,
    pub psm: bool,
}

impl Features {
    pub const BASELINE: Features = Features {
        rowclone: false,
        zi: false,
        fpm: true,
        psm: true,
    };
    pub const ROWCLONE: Features = Features {
        rowclone: true,
        zi: false,
        fpm: true,
        psm: true,
    };
    pub const ROWCLONE_ZI: Features = Features {
        rowclone: true,
        zi: true,
        fpm: true,
        psm: true,
    };

    pub fn fpm_active(&self) -> bool {
        self.rowclone && self.fpm
    }

    pub fn psm_active(&self) -> bool {
        self.rowclone && self.psm
    }

    pub fn zi_active(&self) -> bool {
        self.rowclone && self.zi
    }
}

impl Default for Features {
    fn default() -> Self {
        Features::ROWCLONE
    }
}

/// Operation class used when comparing configurations. Derived from the
/// addresses alone so that every configuration classifies a request alike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpClass {
    Read,
    Write,
    IntraSubarrayCopy,
    InterBankCopy,
    /// Same bank, different subarrays, or a mix.
    OtherCopy,
    Zeroing,
}

impl OpClass {
    pub fn name(&self) -> &'static str {
        match self {
            OpClass::Read => "read",
            OpClass::Write => "write",
            OpClass::IntraSubarrayCopy => "intra_subarray_copy",
            OpClass::InterBankCopy => "inter_bank_copy",
            OpClass::OtherCopy => "other_copy",
            OpClass::Zeroing => "zeroing",
        }
    }
}

impl fmt::Display for OpClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Reserved all-zero row of each subarray.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroRows {
    subarrays_per_bank: u64,
    rows: Vec<Option<u64>>,
}

impl ZeroRows {
    /// The last row of every subarray.
    pub fn standard(g: &Geometry) -> Self {
        let n = (g.num_banks * g.subarrays_per_bank) as usize;
        ZeroRows {
            subarrays_per_bank: g.subarrays_per_bank,
            rows: vec![Some(g.zero_row()); n],
        }
    }

    /// No reserved rows; zeroing cannot use FPM.
    pub fn none(g: &Geometry) -> Self {
        let n = (g.num_banks * g.subarrays_per_bank) as usize;
        ZeroRows {
            subarrays_per_bank: g.subarrays_per_bank,
            rows: vec![None; n],
        }
    }

    pub fn get(&self, bank: u64, subarray: u64) -> Option<u64> {
        self.rows
            .get((bank * self.subarrays_per_bank + subarray) as usize)
            .copied()
            .flatten()
    }

    pub fn is_reserved(&self, r: RowAddr) -> bool {
        self.get(r.bank, r.subarray) == Some(r.row)
    }
}

/// Row pairs covered by a row-aligned copy, or `None` if not row-aligned.
pub fn row_pairs(
    src: u64,
    dst: u64,
    len: u64,
    map: &AddressMap,
) -> Option<Vec<(RowAddr, RowAddr)>> {
    let row = map.geometry().row_size_bytes;
    if !src.is_multiple_of(row) || !dst.is_multiple_of(row) || !len.is_multiple_of(row) || len == 0
    {
        return None;
    }
    (0..len / row)
        .map(|k| {
            Some((
                map.row_of(src + k * row).ok()?,
                map.row_of(dst + k * row).ok()?,
            ))
        })
        .collect()
}

/// Picks the copy mechanism for `src -> dst` of `len` bytes.
pub fn decide_copy(src: u64, dst: u64, len: u64, map: &AddressMap, f: &Features) -> Mechanism {
    if !f.rowclone {
        return Mechanism::BaselineCopy;
    }
    let Some(pairs) = row_pairs(src, dst, len, map) else {
        return Mechanism::BaselineCopy;
    };
    if f.fpm_active()
        && pairs
            .iter()
            .all(|(s, d)| s.same_subarray(d) && s.row != d.row)
    {
        return Mechanism::Fpm;
    }
    if f.psm_active() && pairs.iter().all(|(s, d)| s.bank != d.bank) {
        return Mechanism::Psm;
    }
    Mechanism::BaselineCopy
}

/// Picks the zeroing mechanism for `len` bytes at `dst`.
pub fn decide_zero(
    dst: u64,
    len: u64,
    map: &AddressMap,
    f: &Features,
    zero_rows: &ZeroRows,
) -> Mechanism {
    let row = map.geometry().row_size_bytes;
    if !f.fpm_active() || !dst.is_multiple_of(row) || !len.is_multiple_of(row) || len == 0 {
        return Mechanism::BaselineZero;
    }
    let covered = (0..len / row).all(|k| {
        map.row_of(dst + k * row)
            .map(|r| zero_rows.get(r.bank, r.subarray).is_some())
            .unwrap_or(false)
    });
    if covered {
        Mechanism::FpmZero
    } else {
        Mechanism::BaselineZero
    }
}

/// Classifies a copy by where its cachelines live.
pub fn classify_copy(src: u64, dst: u64, len: u64, map: &AddressMap) -> OpClass {
    let line = map.geometry().cacheline_bytes;
    let mut intra = true;
    let mut inter = true;
    let mut off = 0;
    while off < len {
        let (Ok(s), Ok(d)) = (map.row_of(src + off), map.row_of(dst + off)) else {
            return OpClass::OtherCopy;
        };
        intra &= s.same_subarray(&d);
        inter &= s.bank != d.bank;
        off += line;
    }
    if intra {
        OpClass::IntraSubarrayCopy
    } else if inter {
        OpClass::InterBankCopy
    } else {
        OpClass::OtherCopy
    }
}
