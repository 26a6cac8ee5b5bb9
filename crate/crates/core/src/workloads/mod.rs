//! Trace format and synthetic workload generators.

mod trace;

pub use trace::{
    assign_times, parse_trace, serialize_trace, to_requests, NotARequest, ParseError, TraceRecord,
};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::AddressMap;
use crate::dram::ConfigError;
use crate::system::MemOp;

/// Fork benchmark: a parent touches `num_pages` pages, forks, and the child
/// then writes a random `write_fraction` of them, each write followed by
/// `interleaved_reads` loads from random physical lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkbenchParams {
    pub num_pages: u64,
    pub write_fraction: f64,
    #[serde(default)]
    pub interleaved_reads: u64,
}

impl Default for ForkbenchParams {
    fn default() -> Self {
        ForkbenchParams {
            num_pages: 16384,
            write_fraction: 0.1,
            interleaved_reads: 0,
        }
    }
}

impl ForkbenchParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_pages == 0 {
            return Err(ConfigError::new("num_pages", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return Err(ConfigError::new("write_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Pages written after the fork.
    pub fn written_pages(&self) -> u64 {
        (self.write_fraction * self.num_pages as f64).round() as u64
    }
}

pub fn gen_forkbench(p: &ForkbenchParams, seed: u64, map: &AddressMap) -> Vec<TraceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = map.capacity() / map.geometry().cacheline_bytes;
    let line = map.geometry().cacheline_bytes;
    let mut out = Vec::new();
    for v in 0..p.num_pages {
        out.push(TraceRecord::new(MemOp::CowWrite {
            vpage: v,
            value: Some(rng.gen()),
        }));
    }
    out.push(TraceRecord::new(MemOp::Fork));
    let mut pages: Vec<u64> = sample(&mut rng, p.num_pages as usize, p.written_pages() as usize)
        .into_iter()
        .map(|v| v as u64)
        .collect();
    pages.shuffle(&mut rng);
    for v in pages {
        out.push(TraceRecord::new(MemOp::CowWrite {
            vpage: v,
            value: Some(rng.gen()),
        }));
        for _ in 0..p.interleaved_reads {
            out.push(TraceRecord::new(MemOp::Read {
                addr: rng.gen_range(0..lines) * line,
            }));
        }
    }
    out
}

/// Zeroing of `pages` whole pages, `stride` pages apart, wrapping around
/// capacity and skipping reserved zero rows.
pub fn gen_bulkzero(
    pages: u64,
    stride: u64,
    map: &AddressMap,
) -> Result<Vec<TraceRecord>, ConfigError> {
    if pages == 0 {
        return Err(ConfigError::new("pages", "must be at least 1"));
    }
    if stride == 0 {
        return Err(ConfigError::new("stride", "must be at least 1"));
    }
    let g = map.geometry();
    let total = g.total_rows();
    let row = g.row_size_bytes;
    Ok((0..pages)
        .map(|i| {
            let mut p = (i as u128 * stride as u128 % total as u128) as u64;
            while map.row_of(p * row).expect("page within capacity").row == g.zero_row() {
                p = (p + 1) % total;
            }
            TraceRecord::new(MemOp::Zero {
                dst: p * row,
                len: row,
            })
        })
        .collect())
}
