//! Flat reference interpreter: copies and fills happen instantly on a plain
//! byte-addressed memory, with no timing, cache or mechanism choice.

use std::collections::BTreeMap;

use super::pagetable::{AllocError, PageTable, WritePlan};
use super::{MemOp, DEFAULT_FILL};
use crate::controller::{AddressMap, BulkRequest, RequestError, RequestKind};
use crate::dram::MemoryImage;
use crate::time::Time;

/// Sparse physical memory in page-sized chunks; absent pages read as zero.
#[derive(Debug, Clone)]
pub struct FlatMemory {
    page: u64,
    pages: BTreeMap<u64, Box<[u8]>>,
}

impl FlatMemory {
    pub fn new(page_size: u64) -> Self {
        FlatMemory {
            page: page_size,
            pages: BTreeMap::new(),
        }
    }

    pub fn from_image(map: &AddressMap, image: &MemoryImage) -> Self {
        let mut m = FlatMemory::new(map.geometry().row_size_bytes);
        for r in image.materialized_rows() {
            m.write(map.row_base(r), &image.row(r));
        }
        m
    }

    pub fn to_image(&self, map: &AddressMap) -> MemoryImage {
        let mut image = MemoryImage::new(map.geometry());
        for (&p, data) in &self.pages {
            image.set_row(
                map.row_of(p * self.page).expect("page within capacity"),
                data,
            );
        }
        image
    }

    pub fn read(&self, addr: u64, len: u64) -> Vec<u8> {
        let mut out = Vec::with_capacity(len as usize);
        let mut a = addr;
        while a < addr + len {
            let (p, off) = (a / self.page, a % self.page);
            let n = (self.page - off).min(addr + len - a);
            match self.pages.get(&p) {
                Some(d) => out.extend_from_slice(&d[off as usize..(off + n) as usize]),
                None => out.resize(out.len() + n as usize, 0),
            }
            a += n;
        }
        out
    }

    pub fn write(&mut self, addr: u64, data: &[u8]) {
        let mut done = 0u64;
        while done < data.len() as u64 {
            let a = addr + done;
            let (p, off) = (a / self.page, a % self.page);
            let n = (self.page - off).min(data.len() as u64 - done);
            let chunk = &data[done as usize..(done + n) as usize];
            let size = self.page as usize;
            if self.pages.contains_key(&p) || chunk.iter().any(|&b| b != 0) {
                let page = self
                    .pages
                    .entry(p)
                    .or_insert_with(|| vec![0; size].into_boxed_slice());
                page[off as usize..(off + n) as usize].copy_from_slice(chunk);
            }
            done += n;
        }
    }

    /// Applies a request instantly; reads return their data.
    pub fn apply(&mut self, req: &BulkRequest, line: u64) -> Option<Vec<u8>> {
        match &req.kind {
            RequestKind::Read { addr } => return Some(self.read(*addr, line)),
            RequestKind::Write { addr, data } => self.write(*addr, data),
            RequestKind::Copy { src, dst, len } => {
                let d = self.read(*src, *len);
                self.write(*dst, &d);
            }
            RequestKind::Zero { dst, len } => self.write(*dst, &vec![0; *len as usize]),
        }
        None
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ReferenceError {
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
}

/// System-level reference: same page-table decisions as [`super::System`],
/// instant memory operations, no cache.
#[derive(Debug, Clone)]
pub struct ReferenceSystem {
    map: AddressMap,
    pub memory: FlatMemory,
    pub pages: PageTable,
    /// `(address, data)` of every load, in program order.
    pub loads: Vec<(u64, Vec<u8>)>,
}

impl ReferenceSystem {
    pub fn new(map: AddressMap) -> Self {
        Self::with_memory(map.clone(), FlatMemory::new(map.geometry().row_size_bytes))
    }

    pub fn with_memory(map: AddressMap, memory: FlatMemory) -> Self {
        ReferenceSystem {
            pages: PageTable::new(map.clone()),
            map,
            memory,
            loads: Vec::new(),
        }
    }

    fn line(&self) -> u64 {
        self.map.geometry().cacheline_bytes
    }

    fn store(&mut self, addr: u64, value: u8) -> Result<(), ReferenceError> {
        let req = BulkRequest::write(addr, vec![value; self.line() as usize], Time::ZERO);
        req.validate(&self.map)?;
        self.memory.apply(&req, self.line());
        Ok(())
    }

    pub fn execute(&mut self, op: &MemOp) -> Result<(), ReferenceError> {
        let line = self.line();
        match *op {
            MemOp::Read { addr } => {
                let req = BulkRequest::read(addr, Time::ZERO);
                req.validate(&self.map)?;
                let d = self.memory.apply(&req, line).expect("read returns data");
                self.loads.push((addr, d));
            }
            MemOp::Write { addr, value } => self.store(addr, value.unwrap_or(DEFAULT_FILL))?,
            MemOp::Copy { src, dst, len } => {
                let req = BulkRequest::copy(src, dst, len, Time::ZERO);
                req.validate(&self.map)?;
                self.memory.apply(&req, line);
            }
            MemOp::Zero { dst, len } => {
                let req = BulkRequest::zero(dst, len, Time::ZERO);
                req.validate(&self.map)?;
                self.memory.apply(&req, line);
            }
            MemOp::Fork => {
                self.pages.fork();
            }
            MemOp::CowWrite { vpage, value } => {
                let size = self.pages.page_size();
                let frame = match self.pages.plan_write(vpage) {
                    WritePlan::DemandZero => {
                        let f = self.pages.alloc(None)?;
                        self.pages.map_new(vpage, f);
                        self.memory.write(f * size, &vec![0; size as usize]);
                        f
                    }
                    WritePlan::Direct(f) => f,
                    WritePlan::LastSharer(f) => {
                        self.pages.make_writable(vpage);
                        f
                    }
                    WritePlan::Copy(f) => {
                        let new = self.pages.alloc(Some(f))?;
                        let d = self.memory.read(f * size, size);
                        self.memory.write(new * size, &d);
                        self.pages.remap(vpage, new);
                        new
                    }
                };
                self.store(frame * size, value.unwrap_or(DEFAULT_FILL))?;
            }
        }
        Ok(())
    }
}
