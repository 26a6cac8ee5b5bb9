//! Page tables, frame reference counts and subarray-aware frame allocation.
//!
//! A page is one DRAM row. Physical page `p` covers addresses
//! `p * row_size .. (p + 1) * row_size`.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::controller::AddressMap;
use crate::dram::RowAddr;

pub type ProcessId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pte {
    pub frame: u64,
    pub writable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AllocError {
    #[error("out of memory: no free physical pages")]
    OutOfMemory,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AllocStats {
    pub allocations: u64,
    pub hinted: u64,
    /// Hinted allocations served from the hinted subarray.
    pub hint_honored: u64,
    /// Hinted allocations served elsewhere.
    pub fallbacks: u64,
    pub fallback_other_bank: u64,
    pub fallback_same_bank: u64,
}

/// What a write to a virtual page requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WritePlan {
    /// Page not mapped: allocate and zero a fresh frame.
    DemandZero,
    /// Already writable.
    Direct(u64),
    /// Read-only but the only mapping left: flip to writable.
    LastSharer(u64),
    /// Shared: copy `frame` into a new frame first.
    Copy(u64),
}

#[derive(Debug, Clone)]
pub struct PageTable {
    map: AddressMap,
    processes: Vec<BTreeMap<u64, Pte>>,
    current: ProcessId,
    refcount: BTreeMap<u64, u32>,
    /// Free frames per subarray, indexed by `bank * subarrays_per_bank + subarray`.
    free: Vec<VecDeque<u64>>,
    /// Rotation position for unhinted allocation; banks vary fastest.
    cursor: u64,
    stats: AllocStats,
}

impl PageTable {
    pub fn new(map: AddressMap) -> Self {
        let g = *map.geometry();
        let mut free = vec![VecDeque::new(); (g.num_banks * g.subarrays_per_bank) as usize];
        for page in 0..g.total_rows() {
            let r = map
                .row_of(page * g.row_size_bytes)
                .expect("page within capacity");
            if r.row != g.zero_row() {
                free[(r.bank * g.subarrays_per_bank + r.subarray) as usize].push_back(page);
            }
        }
        PageTable {
            map,
            processes: vec![BTreeMap::new()],
            current: 0,
            refcount: BTreeMap::new(),
            free,
            cursor: 0,
            stats: AllocStats::default(),
        }
    }

    pub fn page_size(&self) -> u64 {
        self.map.geometry().row_size_bytes
    }

    pub fn page_addr(&self, page: u64) -> u64 {
        page * self.page_size()
    }

    pub fn row_of_page(&self, page: u64) -> RowAddr {
        self.map
            .row_of(self.page_addr(page))
            .expect("page within capacity")
    }

    pub fn stats(&self) -> &AllocStats {
        &self.stats
    }

    pub fn current(&self) -> ProcessId {
        self.current
    }

    pub fn process_count(&self) -> usize {
        self.processes.len()
    }

    pub fn translate(&self, pid: ProcessId, vpage: u64) -> Option<Pte> {
        self.processes.get(pid)?.get(&vpage).copied()
    }

    pub fn mappings(&self, pid: ProcessId) -> impl Iterator<Item = (u64, Pte)> + '_ {
        self.processes[pid].iter().map(|(v, p)| (*v, *p))
    }

    pub fn refcount(&self, frame: u64) -> u32 {
        self.refcount.get(&frame).copied().unwrap_or(0)
    }

    pub fn free_pages(&self, bank: u64, subarray: u64) -> usize {
        self.free[self.list_index(bank, subarray)].len()
    }

    fn list_index(&self, bank: u64, subarray: u64) -> usize {
        (bank * self.map.geometry().subarrays_per_bank + subarray) as usize
    }

    /// Subarray lists in rotation order starting at `start`.
    fn rotation(&self, start: u64) -> impl Iterator<Item = (u64, u64)> + '_ {
        let g = self.map.geometry();
        let n = g.num_banks * g.subarrays_per_bank;
        (0..n).map(move |k| {
            let i = (start + k) % n;
            (i % g.num_banks, i / g.num_banks)
        })
    }

    fn take(&mut self, bank: u64, subarray: u64) -> Option<u64> {
        let i = self.list_index(bank, subarray);
        self.free[i].pop_front()
    }

    /// Allocates a frame, preferring the subarray of `hint` when given.
    pub fn alloc(&mut self, hint: Option<u64>) -> Result<u64, AllocError> {
        let frame = match hint {
            None => {
                let found = self
                    .rotation(self.cursor)
                    .enumerate()
                    .find(|(_, (b, s))| self.free_pages(*b, *s) > 0);
                let (k, (b, s)) = found.ok_or(AllocError::OutOfMemory)?;
                self.cursor += k as u64 + 1;
                self.take(b, s).expect("list is non-empty")
            }
            Some(src) => {
                self.stats.hinted += 1;
                let want = self.row_of_page(src);
                if let Some(f) = self.take(want.bank, want.subarray) {
                    self.stats.hint_honored += 1;
                    f
                } else {
                    let pick = |other_bank: bool| {
                        self.rotation(self.cursor).find(|(b, s)| {
                            (*b != want.bank) == other_bank && self.free_pages(*b, *s) > 0
                        })
                    };
                    let (b, s, other) = match pick(true) {
                        Some((b, s)) => (b, s, true),
                        None => {
                            let (b, s) = pick(false).ok_or(AllocError::OutOfMemory)?;
                            (b, s, false)
                        }
                    };
                    self.stats.fallbacks += 1;
                    if other {
                        self.stats.fallback_other_bank += 1;
                    } else {
                        self.stats.fallback_same_bank += 1;
                    }
                    self.take(b, s).expect("list is non-empty")
                }
            }
        };
        self.stats.allocations += 1;
        Ok(frame)
    }

    /// Maps `vpage` of the current process to a fresh writable frame.
    pub fn map_new(&mut self, vpage: u64, frame: u64) {
        let old = self.processes[self.current].insert(
            vpage,
            Pte {
                frame,
                writable: true,
            },
        );
        debug_assert!(old.is_none());
        *self.refcount.entry(frame).or_insert(0) += 1;
    }

    /// Forks the current process; the child becomes current.
    pub fn fork(&mut self) -> ProcessId {
        let parent = &mut self.processes[self.current];
        for pte in parent.values_mut() {
            pte.writable = false;
            *self.refcount.get_mut(&pte.frame).expect("mapped frame") += 1;
        }
        let child = parent.clone();
        self.processes.push(child);
        self.current = self.processes.len() - 1;
        self.current
    }

    pub fn plan_write(&self, vpage: u64) -> WritePlan {
        match self.translate(self.current, vpage) {
            None => WritePlan::DemandZero,
            Some(Pte {
                frame,
                writable: true,
            }) => WritePlan::Direct(frame),
            Some(Pte { frame, .. }) if self.refcount(frame) == 1 => WritePlan::LastSharer(frame),
            Some(Pte { frame, .. }) => WritePlan::Copy(frame),
        }
    }

    pub fn make_writable(&mut self, vpage: u64) {
        if let Some(p) = self.processes[self.current].get_mut(&vpage) {
            p.writable = true;
        }
    }

    /// Points `vpage` of the current process at its private copy `frame`.
    pub fn remap(&mut self, vpage: u64, frame: u64) {
        let pte = self.processes[self.current]
            .get_mut(&vpage)
            .expect("mapped page");
        let old = pte.frame;
        *pte = Pte {
            frame,
            writable: true,
        };
        *self.refcount.get_mut(&old).expect("mapped frame") -= 1;
        *self.refcount.entry(frame).or_insert(0) += 1;
    }

    /// Checks refcount conservation, the free-list partition and that no
    /// zero row is ever handed out.
    pub fn check(&self) -> Result<(), String> {
        let g = self.map.geometry();
        let mut counted: BTreeMap<u64, u32> = BTreeMap::new();
        for (pid, p) in self.processes.iter().enumerate() {
            for (v, pte) in p {
                *counted.entry(pte.frame).or_insert(0) += 1;
                if pte.writable && self.refcount(pte.frame) > 1 {
                    return Err(format!("process {pid} page {v:#x} is writable but shared"));
                }
            }
        }
        for (frame, &rc) in &self.refcount {
            if counted.get(frame).copied().unwrap_or(0) != rc {
                return Err(format!(
                    "frame {frame:#x}: refcount {rc} disagrees with mappings"
                ));
            }
        }
        let mut seen = vec![false; g.total_rows() as usize];
        for (i, list) in self.free.iter().enumerate() {
            for &p in list {
                let r = self.row_of_page(p);
                if self.list_index(r.bank, r.subarray) != i {
                    return Err(format!("page {p:#x} is on the wrong free list"));
                }
                if r.row == g.zero_row() {
                    return Err(format!("zero-row page {p:#x} is on a free list"));
                }
                if self.refcount.contains_key(&p) || std::mem::replace(&mut seen[p as usize], true)
                {
                    return Err(format!("page {p:#x} is both free and in use"));
                }
            }
        }
        for &p in self.refcount.keys() {
            if self.row_of_page(p).row == g.zero_row() {
                return Err(format!("zero-row page {p:#x} was allocated"));
            }
            seen[p as usize] = true;
        }
        for (p, s) in seen.iter().enumerate() {
            if !s && self.row_of_page(p as u64).row != g.zero_row() {
                return Err(format!("page {p:#x} is neither free nor allocated"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::MappingConfig;
    use crate::dram::Geometry;

    fn pt(rows: u64) -> PageTable {
        let g = Geometry {
            num_banks: 2,
            subarrays_per_bank: 2,
            rows_per_subarray: rows,
            row_size_bytes: 256,
            cacheline_bytes: 64,
        };
        PageTable::new(AddressMap::new(g, MappingConfig::default()).unwrap())
    }

    #[test]
    fn hinted_allocation_stays_in_subarray() {
        let mut t = pt(8);
        let a = t.alloc(None).unwrap();
        let b = t.alloc(Some(a)).unwrap();
        assert!(t.row_of_page(a).same_subarray(&t.row_of_page(b)));
        assert_eq!(t.stats().hint_honored, 1);
        assert_eq!(t.stats().fallbacks, 0);
    }

    #[test]
    fn unhinted_allocation_rotates_banks_first() {
        let mut t = pt(8);
        let pages: Vec<u64> = (0..4).map(|_| t.alloc(None).unwrap()).collect();
        let rows: Vec<RowAddr> = pages.iter().map(|&p| t.row_of_page(p)).collect();
        assert_eq!(
            rows.iter()
                .map(|r| (r.bank, r.subarray))
                .collect::<Vec<_>>(),
            vec![(0, 0), (1, 0), (0, 1), (1, 1)]
        );
    }

    #[test]
    fn exhausted_hint_falls_back_to_other_bank_then_same_bank() {
        let mut t = pt(2);
        // One allocatable row per subarray.
        let a = t.alloc(None).unwrap();
        let b = t.alloc(Some(a)).unwrap();
        let c = t.alloc(Some(a)).unwrap();
        for p in [b, c] {
            assert_ne!(t.row_of_page(a).bank, t.row_of_page(p).bank);
        }
        assert_eq!(t.stats().fallback_other_bank, 2);
        let d = t.alloc(Some(a)).unwrap();
        assert_eq!(t.row_of_page(d).bank, t.row_of_page(a).bank);
        assert_eq!(t.stats().fallback_same_bank, 1);
        assert_eq!(t.stats().fallbacks, 3);
        assert_eq!(t.alloc(None), Err(AllocError::OutOfMemory));
    }

    #[test]
    fn fork_shares_and_counts() {
        let mut t = pt(8);
        for v in 0..8 {
            let f = t.alloc(None).unwrap();
            t.map_new(v, f);
        }
        t.fork();
        for v in 0..8 {
            let pte = t.translate(1, v).unwrap();
            assert_eq!(pte, t.translate(0, v).unwrap());
            assert!(!pte.writable);
            assert_eq!(t.refcount(pte.frame), 2);
        }
        t.fork();
        assert_eq!(t.refcount(t.translate(2, 0).unwrap().frame), 3);
        assert!(t.check().is_ok());
    }

    #[test]
    fn write_plans() {
        let mut t = pt(8);
        assert_eq!(t.plan_write(0), WritePlan::DemandZero);
        let f = t.alloc(None).unwrap();
        t.map_new(0, f);
        assert_eq!(t.plan_write(0), WritePlan::Direct(f));
        t.fork();
        assert_eq!(t.plan_write(0), WritePlan::Copy(f));
        let g = t.alloc(Some(f)).unwrap();
        t.remap(0, g);
        assert_eq!(t.refcount(f), 1);
        t.current = 0;
        assert_eq!(t.plan_write(0), WritePlan::LastSharer(f));
        t.make_writable(0);
        assert!(t.check().is_ok());
    }

    #[test]
    fn zero_rows_never_free() {
        let mut t = pt(4);
        let mut n = 0;
        while let Ok(p) = t.alloc(None) {
            assert_ne!(t.row_of_page(p).row, 3);
            t.map_new(p, p);
            n += 1;
        }
        assert_eq!(n, 2 * 2 * 3);
        assert!(t.check().is_ok());
    }
}
