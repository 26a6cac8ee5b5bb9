//! Operating-system side of the simulator: page allocation, fork and
//! copy-on-write, the memcopy/meminit entry points, a write-back cache with
//! DMA-style coherence for bulk operations, and the in-cache copy and
//! clean-zero insertion optimizations.

mod cache;
mod pagetable;
pub mod reference;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{Cache, CacheParams, Line, LineData, LineState};
pub use pagetable::{AllocError, AllocStats, PageTable, ProcessId, Pte, WritePlan};
pub use reference::{FlatMemory, ReferenceError, ReferenceSystem};

use crate::controller::{
    AddressMap, BulkRequest, Controller, Features, RequestError, RequestId, RequestKind,
    ScheduleError, SchedulingPolicy, SimStats, SubmitError, Timeline,
};
use crate::dram::{Dram, MemoryImage, TimingParams};
use crate::time::Time;

/// Fill byte for stores that do not name one.
pub const DEFAULT_FILL: u8 = 0xFF;

/// One step of a workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum MemOp {
    /// Load one cacheline at a physical address.
    Read { addr: u64 },
    /// Store one full cacheline filled with `value`.
    Write { addr: u64, value: Option<u8> },
    /// memcopy between physical ranges.
    Copy { src: u64, dst: u64, len: u64 },
    /// meminit of a physical range to zero.
    Zero { dst: u64, len: u64 },
    /// Fork the current process; the child becomes current.
    Fork,
    /// Store to the first line of a virtual page of the current process.
    CowWrite { vpage: u64, value: Option<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl SystemError {
    /// True for faults of the simulator rather than of its input.
    pub fn is_internal(&self) -> bool {
        matches!(self, SystemError::Internal(_))
    }
}

impl From<ScheduleError> for SystemError {
    fn from(e: ScheduleError) -> Self {
        SystemError::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SystemStats {
    pub loads: u64,
    pub stores: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Hits on clean-zero lines.
    pub zero_line_hits: u64,
    pub dirty_evictions: u64,
    pub coherence_writebacks: u64,
    pub coherence_invalidations: u64,
    pub zi_line_copies: u64,
    pub zi_zero_lines: u64,
    pub forks: u64,
    pub cow_writes: u64,
    pub cow_copies: u64,
    /// Mechanism chosen for each copy-on-write copy.
    pub cow_mechanisms: BTreeMap<String, u64>,
    pub last_sharer_upgrades: u64,
    pub demand_zero_pages: u64,
    /// Times the controller had to run ahead to supply line data.
    pub drains: u64,
    pub alloc: AllocStats,
}

impl SystemStats {
    /// Copy-on-write copies that did not use FPM.
    pub fn cow_non_fpm(&self) -> u64 {
        self.cow_copies - self.cow_mechanisms.get("FPM").copied().unwrap_or(0)
    }
}

pub struct System {
    ctrl: Controller,
    pages: PageTable,
    cache: Option<Cache>,
    resolved: BTreeMap<RequestId, Vec<u8>>,
    loads: Vec<(u64, LineData)>,
    stats: SystemStats,
}

impl System {
    pub fn new(
        map: AddressMap,
        timing: TimingParams,
        features: Features,
        policy: SchedulingPolicy,
        cache: CacheParams,
    ) -> Self {
        let image = MemoryImage::new(map.geometry());
        Self::with_image(map, timing, features, policy, cache, image)
    }

    pub fn with_image(
        map: AddressMap,
        timing: TimingParams,
        features: Features,
        policy: SchedulingPolicy,
        cache: CacheParams,
        image: MemoryImage,
    ) -> Self {
        let line = map.geometry().cacheline_bytes;
        System {
            pages: PageTable::new(map.clone()),
            cache: cache.enabled.then(|| Cache::new(&cache, line)),
            ctrl: Controller::with_image(map, timing, features, policy, image),
            resolved: BTreeMap::new(),
            loads: Vec::new(),
            stats: SystemStats::default(),
        }
    }

    pub fn controller(&self) -> &Controller {
        &self.ctrl
    }

    pub fn pages(&self) -> &PageTable {
        &self.pages
    }

    pub fn cache(&self) -> Option<&Cache> {
        self.cache.as_ref()
    }

    pub fn stats(&self) -> SystemStats {
        SystemStats {
            alloc: *self.pages.stats(),
            ..self.stats.clone()
        }
    }

    fn map(&self) -> &AddressMap {
        self.ctrl.map()
    }

    fn line(&self) -> u64 {
        self.map().geometry().cacheline_bytes
    }

    fn row(&self) -> u64 {
        self.map().geometry().row_size_bytes
    }

    fn zi(&self) -> bool {
        self.cache.is_some() && self.ctrl.features().zi_active()
    }

    fn submit(&mut self, req: BulkRequest) -> Result<RequestId, SystemError> {
        self.ctrl.submit(req).map_err(|e| match e {
            SubmitError::Request(r) => SystemError::Request(r),
            SubmitError::Compile(c) => SystemError::Internal(c.to_string()),
        })
    }

    /// Bytes of a line, running the controller ahead if a fill is still queued.
    fn resolve(&mut self, data: &LineData) -> Result<Vec<u8>, SystemError> {
        let id = match data {
            LineData::Known(v) => return Ok(v.clone()),
            LineData::Zero => return Ok(vec![0; self.line() as usize]),
            LineData::Pending(id) => *id,
        };
        if let Some(v) = self.resolved.get(&id) {
            return Ok(v.clone());
        }
        if self.ctrl.record(id).is_none() {
            self.stats.drains += 1;
            self.ctrl.run()?;
        }
        let v = self
            .ctrl
            .take_read_data(id)
            .ok_or_else(|| SystemError::Internal(format!("read request {id} returned no data")))?;
        self.resolved.insert(id, v.clone());
        Ok(v)
    }

    fn writeback(&mut self, t: Time, addr: u64, data: &LineData) -> Result<(), SystemError> {
        let bytes = self.resolve(data)?;
        self.submit(BulkRequest::write(addr, bytes, t))?;
        Ok(())
    }

    fn install(
        &mut self,
        t: Time,
        addr: u64,
        state: LineState,
        data: LineData,
    ) -> Result<(), SystemError> {
        let cache = self.cache.as_mut().expect("cache enabled");
        if let Some(victim) = cache.insert(addr, state, data) {
            if victim.state == LineState::Dirty {
                self.stats.dirty_evictions += 1;
                self.writeback(t, victim.addr, &victim.data)?;
            }
        }
        Ok(())
    }

    pub fn load(&mut self, t: Time, addr: u64) -> Result<(), SystemError> {
        BulkRequest::read(addr, t).validate(self.map())?;
        self.stats.loads += 1;
        let hit = self
            .cache
            .as_mut()
            .and_then(|c| c.touch(addr))
            .map(|l| (l.state, l.data.clone()));
        let data = match hit {
            Some((state, data)) => {
                self.stats.cache_hits += 1;
                if state == LineState::CleanZero {
                    self.stats.zero_line_hits += 1;
                }
                data
            }
            None => {
                let id = self.submit(BulkRequest::read(addr, t))?;
                if self.cache.is_some() {
                    self.stats.cache_misses += 1;
                    self.install(t, addr, LineState::Clean, LineData::Pending(id))?;
                }
                LineData::Pending(id)
            }
        };
        self.loads.push((addr, data));
        Ok(())
    }

    pub fn store(&mut self, t: Time, addr: u64, value: u8) -> Result<(), SystemError> {
        let data = vec![value; self.line() as usize];
        let req = BulkRequest::write(addr, data.clone(), t);
        req.validate(self.map())?;
        self.stats.stores += 1;
        if self.cache.is_none() {
            self.submit(req)?;
            return Ok(());
        }
        if let Some(l) = self.cache.as_mut().and_then(|c| c.touch(addr)) {
            self.stats.cache_hits += 1;
            l.state = LineState::Dirty;
            l.data = LineData::Known(data);
        } else {
            self.stats.cache_misses += 1;
            self.install(t, addr, LineState::Dirty, LineData::Known(data))?;
        }
        Ok(())
    }

    fn line_addrs(&self, start: u64, len: u64) -> impl Iterator<Item = u64> {
        (start..start + len).step_by(self.line() as usize)
    }

    fn invalidate_range(&mut self, start: u64, len: u64) {
        let addrs: Vec<u64> = self.line_addrs(start, len).collect();
        let cache = self.cache.as_mut().expect("cache enabled");
        for a in addrs {
            if cache.invalidate(a).is_some() {
                self.stats.coherence_invalidations += 1;
            }
        }
    }

    /// Makes the cache consistent with an in-memory copy about to run: dirty
    /// source lines are written back and destination lines dropped. With ZI,
    /// resident source lines are also copied into destination tags.
    fn coherence_prepare_copy(
        &mut self,
        t: Time,
        src: u64,
        dst: u64,
        len: u64,
    ) -> Result<(), SystemError> {
        if self.cache.is_none() {
            return Ok(());
        }
        for a in self.line_addrs(src, len).collect::<Vec<_>>() {
            let cache = self.cache.as_mut().expect("cache enabled");
            let dirty = cache
                .peek(a)
                .filter(|l| l.state == LineState::Dirty)
                .map(|l| l.data.clone());
            if let Some(data) = dirty {
                self.stats.coherence_writebacks += 1;
                self.writeback(t, a, &data)?;
                let l = self
                    .cache
                    .as_mut()
                    .and_then(|c| c.touch(a))
                    .expect("line still cached");
                l.state = LineState::Clean;
            }
        }
        self.invalidate_range(dst, len);
        if self.zi() {
            for off in (0..len).step_by(self.line() as usize) {
                let data = self
                    .cache
                    .as_ref()
                    .and_then(|c| c.peek(src + off))
                    .map(|l| l.data.clone());
                if let Some(data) = data {
                    self.stats.zi_line_copies += 1;
                    self.install(t, dst + off, LineState::Dirty, data)?;
                }
            }
        }
        Ok(())
    }

    /// `(offset, len)` pieces of `[0, len)` that stay inside one row at both
    /// `a + offset` and `b + offset`.
    fn row_chunks(&self, a: u64, b: u64, len: u64) -> Vec<(u64, u64)> {
        let row = self.row();
        let mut out = Vec::new();
        let mut off = 0;
        while off < len {
            let n = (row - (a + off) % row)
                .min(row - (b + off) % row)
                .min(len - off);
            out.push((off, n));
            off += n;
        }
        out
    }

    /// Copies `len` bytes; returns the ids of the copy requests issued.
    pub fn memcopy(
        &mut self,
        t: Time,
        src: u64,
        dst: u64,
        len: u64,
    ) -> Result<Vec<RequestId>, SystemError> {
        BulkRequest::copy(src, dst, len, t).validate(self.map())?;
        self.coherence_prepare_copy(t, src, dst, len)?;
        let mut ids = Vec::new();
        for (off, n) in self.row_chunks(src, dst, len) {
            ids.push(self.submit(BulkRequest::copy(src + off, dst + off, n, t))?);
        }
        Ok(ids)
    }

    /// Sets `len` bytes at `dst` to `value`.
    pub fn meminit(
        &mut self,
        t: Time,
        dst: u64,
        len: u64,
        value: u8,
    ) -> Result<Vec<RequestId>, SystemError> {
        BulkRequest::zero(dst, len, t).validate(self.map())?;
        if self.cache.is_some() {
            self.invalidate_range(dst, len);
        }
        let chunks = self.row_chunks(dst, dst, len);
        let mut ids = Vec::new();
        if value == 0 {
            for &(off, n) in &chunks {
                ids.push(self.submit(BulkRequest::zero(dst + off, n, t))?);
            }
            if self.zi() {
                for a in self.line_addrs(dst, len).collect::<Vec<_>>() {
                    self.stats.zi_zero_lines += 1;
                    self.install(t, a, LineState::CleanZero, LineData::Zero)?;
                }
            }
            return Ok(ids);
        }
        let row = self.row();
        let line = vec![value; self.line() as usize];
        let seed = chunks
            .iter()
            .find(|&&(_, n)| n == row)
            .map(|&(off, _)| dst + off);
        for (off, n) in chunks {
            let start = dst + off;
            match seed {
                Some(s) if n == row && start != s => {
                    ids.push(self.submit(BulkRequest::copy(s, start, n, t))?);
                }
                _ => {
                    for a in self.line_addrs(start, n).collect::<Vec<_>>() {
                        ids.push(self.submit(BulkRequest::write(a, line.clone(), t))?);
                    }
                }
            }
        }
        Ok(ids)
    }

    pub fn fork(&mut self) -> ProcessId {
        self.stats.forks += 1;
        self.pages.fork()
    }

    /// Store to the first line of `vpage`, allocating or copying as needed.
    pub fn cow_write(&mut self, t: Time, vpage: u64, value: u8) -> Result<(), SystemError> {
        let size = self.pages.page_size();
        self.stats.cow_writes += 1;
        let frame = match self.pages.plan_write(vpage) {
            WritePlan::DemandZero => {
                let f = self.pages.alloc(None)?;
                self.pages.map_new(vpage, f);
                self.stats.demand_zero_pages += 1;
                self.meminit(t, f * size, size, 0)?;
                f
            }
            WritePlan::Direct(f) => f,
            WritePlan::LastSharer(f) => {
                self.stats.last_sharer_upgrades += 1;
                self.pages.make_writable(vpage);
                f
            }
            WritePlan::Copy(f) => {
                let new = self.pages.alloc(Some(f))?;
                let (src, dst) = (f * size, new * size);
                let mech = self
                    .ctrl
                    .mechanism_for(&RequestKind::Copy {
                        src,
                        dst,
                        len: size,
                    })
                    .expect("copy");
                *self
                    .stats
                    .cow_mechanisms
                    .entry(mech.name().to_string())
                    .or_insert(0) += 1;
                self.stats.cow_copies += 1;
                self.memcopy(t, src, dst, size)?;
                self.pages.remap(vpage, new);
                new
            }
        };
        self.store(t, frame * size, value)
    }

    pub fn execute(&mut self, t: Time, op: &MemOp) -> Result<(), SystemError> {
        match *op {
            MemOp::Read { addr } => self.load(t, addr),
            MemOp::Write { addr, value } => self.store(t, addr, value.unwrap_or(DEFAULT_FILL)),
            MemOp::Copy { src, dst, len } => self.memcopy(t, src, dst, len).map(drop),
            MemOp::Zero { dst, len } => self.meminit(t, dst, len, 0).map(drop),
            MemOp::Fork => {
                self.fork();
                Ok(())
            }
            MemOp::CowWrite { vpage, value } => {
                self.cow_write(t, vpage, value.unwrap_or(DEFAULT_FILL))
            }
        }
    }

    /// Writes every dirty line back to memory.
    pub fn flush(&mut self, t: Time) -> Result<(), SystemError> {
        let Some(cache) = self.cache.as_mut() else {
            return Ok(());
        };
        let dirty: Vec<(u64, LineData)> = cache
            .lines_mut()
            .filter(|l| l.state == LineState::Dirty)
            .map(|l| {
                l.state = LineState::Clean;
                (l.addr, l.data.clone())
            })
            .collect();
        for (a, d) in dirty {
            self.writeback(t, a, &d)?;
        }
        Ok(())
    }

    /// Runs the controller to completion and resolves all line data.
    pub fn finish(&mut self) -> Result<(), SystemError> {
        self.ctrl.run()?;
        let mut pending: Vec<LineData> = self.loads.iter().map(|(_, d)| d.clone()).collect();
        if let Some(c) = &self.cache {
            pending.extend(c.lines().map(|l| l.data.clone()));
        }
        for d in pending {
            self.resolve(&d)?;
        }
        Ok(())
    }

    fn resolved(&self, data: &LineData) -> Vec<u8> {
        match data {
            LineData::Known(v) => v.clone(),
            LineData::Zero => vec![0; self.line() as usize],
            LineData::Pending(id) => self
                .resolved
                .get(id)
                .cloned()
                .expect("finish() resolves all line data"),
        }
    }

    /// `(address, data)` of every load, in program order. Call after [`System::finish`].
    pub fn load_values(&self) -> Vec<(u64, Vec<u8>)> {
        self.loads
            .iter()
            .map(|(a, d)| (*a, self.resolved(d)))
            .collect()
    }

    /// What a load of `addr` would return now. Call after [`System::finish`].
    pub fn observe(&self, addr: u64) -> Vec<u8> {
        if let Some(l) = self.cache.as_ref().and_then(|c| c.peek(addr)) {
            return self.resolved(&l.data);
        }
        let map = self.map();
        let a = map.map(addr).expect("address in range");
        let line = self.line();
        self.ctrl
            .dram()
            .image()
            .read(a.row_addr(), (a.column * line) as usize, line as usize)
    }

    /// Checks page-table, cache and zero-row invariants. When the controller
    /// is idle, also checks that every clean line matches memory.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.pages.check()?;
        let image = self.ctrl.dram().image();
        let zero_rows = self.ctrl.zero_rows();
        for r in image.materialized_rows() {
            if zero_rows.is_reserved(r) && !image.is_zero_row(r) {
                return Err(format!("reserved zero row {r:?} holds data"));
            }
        }
        if let Some(c) = &self.cache {
            c.check()?;
            if self.ctrl.is_idle() {
                let map = self.map();
                let line = self.line();
                for l in c.lines().filter(|l| l.state != LineState::Dirty) {
                    let Some(data) = (match &l.data {
                        LineData::Pending(id) => self.resolved.get(id).cloned(),
                        d => Some(self.resolved(d)),
                    }) else {
                        continue;
                    };
                    let a = map.map(l.addr).expect("cached address in range");
                    if image.read(a.row_addr(), (a.column * line) as usize, line as usize) != data {
                        return Err(format!("clean line {:#x} differs from memory", l.addr));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn timeline(&self) -> &Timeline {
        self.ctrl.timeline()
    }

    pub fn into_parts(self) -> (Timeline, SimStats, Dram, SystemStats) {
        let stats = self.stats();
        let (timeline, sim, dram) = self.ctrl.into_parts();
        (timeline, sim, dram, stats)
    }
}
