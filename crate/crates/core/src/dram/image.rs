use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Geometry, RowAddr};

/// Data content of the DRAM array. Rows never written read as zero and are
/// not materialized.
#[derive(Debug, Clone)]
pub struct MemoryImage {
    row_size: usize,
    rows: BTreeMap<RowAddr, Box<[u8]>>,
}

impl MemoryImage {
    pub fn new(g: &Geometry) -> Self {
        MemoryImage {
            row_size: g.row_size_bytes as usize,
            rows: BTreeMap::new(),
        }
    }

    /// Fills every row for which `keep_zero` returns false with seeded random bytes.
    pub fn randomized(g: &Geometry, seed: u64, keep_zero: impl Fn(RowAddr) -> bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut image = MemoryImage::new(g);
        for r in g.rows() {
            if keep_zero(r) {
                continue;
            }
            let mut data = vec![0u8; image.row_size].into_boxed_slice();
            rng.fill(&mut data[..]);
            image.rows.insert(r, data);
        }
        image
    }

    pub fn row_size(&self) -> usize {
        self.row_size
    }

    pub fn row(&self, r: RowAddr) -> Vec<u8> {
        match self.rows.get(&r) {
            Some(d) => d.to_vec(),
            None => vec![0; self.row_size],
        }
    }

    pub fn set_row(&mut self, r: RowAddr, data: &[u8]) {
        debug_assert_eq!(data.len(), self.row_size);
        if data.iter().all(|&b| b == 0) {
            self.rows.remove(&r);
        } else {
            self.rows.insert(r, data.into());
        }
    }

    pub fn read(&self, r: RowAddr, offset: usize, len: usize) -> Vec<u8> {
        match self.rows.get(&r) {
            Some(d) => d[offset..offset + len].to_vec(),
            None => vec![0; len],
        }
    }

    pub fn write(&mut self, r: RowAddr, offset: usize, data: &[u8]) {
        let row_size = self.row_size;
        if !self.rows.contains_key(&r) && data.iter().all(|&b| b == 0) {
            return;
        }
        let row = self
            .rows
            .entry(r)
            .or_insert_with(|| vec![0; row_size].into_boxed_slice());
        row[offset..offset + data.len()].copy_from_slice(data);
    }

    pub fn is_zero_row(&self, r: RowAddr) -> bool {
        self.rows.get(&r).is_none_or(|d| d.iter().all(|&b| b == 0))
    }

    /// Rows that hold (possibly) non-zero data.
    pub fn materialized_rows(&self) -> impl Iterator<Item = RowAddr> + '_ {
        self.rows.keys().copied()
    }

    /// First row where the two images differ, comparing absent rows as zero.
    pub fn first_difference(&self, other: &MemoryImage) -> Option<RowAddr> {
        let keys: std::collections::BTreeSet<RowAddr> =
            self.rows.keys().chain(other.rows.keys()).copied().collect();
        keys.into_iter().find(|r| self.row(*r) != other.row(*r))
    }
}

impl PartialEq for MemoryImage {
    fn eq(&self, other: &Self) -> bool {
        self.row_size == other.row_size && self.first_difference(other).is_none()
    }
}

impl Eq for MemoryImage {}
