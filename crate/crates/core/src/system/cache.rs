//! Set-associative write-back cache with LRU replacement.

use serde::{Deserialize, Serialize};

use crate::controller::RequestId;
use crate::dram::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheParams {
    pub enabled: bool,
    pub capacity_bytes: u64,
    pub associativity: u64,
}

impl Default for CacheParams {
    fn default() -> Self {
        CacheParams {
            enabled: true,
            capacity_bytes: 512 * 1024,
            associativity: 8,
        }
    }
}

impl CacheParams {
    pub fn validate(&self, line_bytes: u64) -> Result<(), ConfigError> {
        if !self.enabled {
            return Ok(());
        }
        if self.associativity == 0 {
            return Err(ConfigError::new("associativity", "must be at least 1"));
        }
        let way_bytes = self.associativity * line_bytes;
        if self.capacity_bytes == 0 || !self.capacity_bytes.is_multiple_of(way_bytes) {
            return Err(ConfigError::new(
                "capacity_bytes",
                "must be a positive multiple of associativity × cacheline_bytes",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineState {
    Invalid,
    Clean,
    Dirty,
    /// Clean line known to hold zeros, inserted without a DRAM read.
    CleanZero,
}

/// Contents of a cached line. A fill still in flight is referenced by the
/// id of the read request that fetches it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineData {
    Known(Vec<u8>),
    Pending(RequestId),
    Zero,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub addr: u64,
    pub state: LineState,
    pub data: LineData,
    lru: u64,
}

impl Line {
    fn invalid() -> Self {
        Line {
            addr: 0,
            state: LineState::Invalid,
            data: LineData::Zero,
            lru: 0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.state != LineState::Invalid
    }
}

#[derive(Debug, Clone)]
pub struct Cache {
    line_bytes: u64,
    ways: usize,
    sets: Vec<Line>,
    tick: u64,
}

impl Cache {
    pub fn new(p: &CacheParams, line_bytes: u64) -> Self {
        let ways = p.associativity as usize;
        let n = (p.capacity_bytes / line_bytes) as usize;
        Cache {
            line_bytes,
            ways,
            sets: vec![Line::invalid(); n],
            tick: 0,
        }
    }

    fn set_range(&self, addr: u64) -> std::ops::Range<usize> {
        let nsets = (self.sets.len() / self.ways) as u64;
        let set = ((addr / self.line_bytes) % nsets) as usize;
        set * self.ways..(set + 1) * self.ways
    }

    fn find(&self, addr: u64) -> Option<usize> {
        self.set_range(addr)
            .find(|&i| self.sets[i].is_valid() && self.sets[i].addr == addr)
    }

    /// Line at `addr` without touching LRU state.
    pub fn peek(&self, addr: u64) -> Option<&Line> {
        self.find(addr).map(|i| &self.sets[i])
    }

    /// Line at `addr`, marked most recently used.
    pub fn touch(&mut self, addr: u64) -> Option<&mut Line> {
        let i = self.find(addr)?;
        self.tick += 1;
        self.sets[i].lru = self.tick;
        Some(&mut self.sets[i])
    }

    /// Installs a line, replacing any copy of `addr`. Returns the valid line
    /// evicted to make room.
    pub fn insert(&mut self, addr: u64, state: LineState, data: LineData) -> Option<Line> {
        debug_assert!(state != LineState::Invalid);
        self.tick += 1;
        let slot = match self.find(addr) {
            Some(i) => i,
            None => {
                let r = self.set_range(addr);
                r.clone()
                    .find(|&i| !self.sets[i].is_valid())
                    .unwrap_or_else(|| r.min_by_key(|&i| self.sets[i].lru).expect("non-empty set"))
            }
        };
        let new = Line {
            addr,
            state,
            data,
            lru: self.tick,
        };
        let old = std::mem::replace(&mut self.sets[slot], new);
        (old.is_valid() && old.addr != addr).then_some(old)
    }

    pub fn invalidate(&mut self, addr: u64) -> Option<Line> {
        let i = self.find(addr)?;
        Some(std::mem::replace(&mut self.sets[i], Line::invalid()))
    }

    pub fn lines(&self) -> impl Iterator<Item = &Line> {
        self.sets.iter().filter(|l| l.is_valid())
    }

    pub fn lines_mut(&mut self) -> impl Iterator<Item = &mut Line> {
        self.sets.iter_mut().filter(|l| l.is_valid())
    }

    /// At most one valid line per address, each in the set its address maps to.
    pub fn check(&self) -> Result<(), String> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, l) in self.sets.iter().enumerate() {
            if !l.is_valid() {
                continue;
            }
            if !self.set_range(l.addr).contains(&i) {
                return Err(format!("line {:#x} stored in the wrong set", l.addr));
            }
            if !seen.insert(l.addr) {
                return Err(format!("line {:#x} cached twice", l.addr));
            }
            if l.state == LineState::CleanZero && l.data != LineData::Zero {
                return Err(format!("clean-zero line {:#x} holds data", l.addr));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cache() -> Cache {
        Cache::new(
            &CacheParams {
                enabled: true,
                capacity_bytes: 4 * 64 * 2,
                associativity: 2,
            },
            64,
        )
    }

    #[test]
    fn lru_eviction_within_a_set() {
        let mut c = cache();
        // Four sets; addresses 0, 256, 512 share set 0.
        assert!(c.insert(0, LineState::Clean, LineData::Zero).is_none());
        assert!(c
            .insert(256, LineState::Dirty, LineData::Known(vec![1; 64]))
            .is_none());
        c.touch(0);
        let victim = c.insert(512, LineState::Clean, LineData::Zero).unwrap();
        assert_eq!(victim.addr, 256);
        assert_eq!(victim.state, LineState::Dirty);
        assert!(c.peek(0).is_some() && c.peek(512).is_some());
        assert!(c.check().is_ok());
    }

    #[test]
    fn reinsert_replaces_in_place() {
        let mut c = cache();
        c.insert(64, LineState::Clean, LineData::Zero);
        assert!(c
            .insert(64, LineState::Dirty, LineData::Known(vec![2; 64]))
            .is_none());
        assert_eq!(c.lines().count(), 1);
        assert_eq!(c.peek(64).unwrap().state, LineState::Dirty);
        assert_eq!(c.invalidate(64).unwrap().addr, 64);
        assert!(c.peek(64).is_none());
    }

    #[test]
    fn params_validation() {
        let line = 64;
        assert!(CacheParams::default().validate(line).is_ok());
        let p = CacheParams {
            capacity_bytes: 1000,
            ..CacheParams::default()
        };
        assert_eq!(p.validate(line).unwrap_err().field, "capacity_bytes");
        let p = CacheParams {
            associativity: 0,
            ..CacheParams::default()
        };
        assert_eq!(p.validate(line).unwrap_err().field, "associativity");
    }
}
