//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rowclone_core::controller::{
    AddressMap, BulkRequest, Controller, Features, MappingConfig, SchedulingPolicy, ZeroRows,
};
use rowclone_core::dram::{Geometry, MemoryImage, RowAddr, TimingParams};
use rowclone_core::system::{FlatMemory, MemOp};
use rowclone_core::Time;

pub fn ns(v: f64) -> Time {
    Time::from_ns(v)
}

pub fn ddr3_1066() -> TimingParams {
    TimingParams {
        t_ck: ns(1.875),
        t_rcd: ns(13.125),
        t_ras: ns(37.5),
        t_rp: ns(13.125),
        t_rc: ns(50.625),
        cl: ns(13.125),
        cwl: ns(11.25),
        t_burst: ns(7.5),
        t_ccd: ns(7.5),
        t_rrd: ns(7.5),
        t_faw: ns(37.5),
        t_wr: ns(15.0),
        t_rtp: ns(7.5),
    }
}

pub fn geometry(banks: u64, subarrays: u64, rows: u64, row_bytes: u64) -> Geometry {
    Geometry {
        num_banks: banks,
        subarrays_per_bank: subarrays,
        rows_per_subarray: rows,
        row_size_bytes: row_bytes,
        cacheline_bytes: 64,
    }
}

/// Default-shaped device: 8 banks, 4 KB rows.
pub fn default_map() -> AddressMap {
    AddressMap::new(geometry(8, 64, 512, 4096), MappingConfig::default()).unwrap()
}

/// 2 banks x 2 subarrays x 8 rows of 256 bytes.
pub fn toy_map() -> AddressMap {
    AddressMap::new(geometry(2, 2, 8, 256), MappingConfig::default()).unwrap()
}

pub fn row(map: &AddressMap, bank: u64, subarray: u64, r: u64) -> u64 {
    map.row_base(RowAddr::new(bank, subarray, r))
}

/// Random contents everywhere except the reserved zero rows.
pub fn random_image(map: &AddressMap, seed: u64) -> MemoryImage {
    let zero = ZeroRows::standard(map.geometry());
    MemoryImage::randomized(map.geometry(), seed, |r| zero.is_reserved(r))
}

/// Random valid request stream. Copies and zeroing are row-aligned half the
/// time so that in-DRAM mechanisms get exercised.
pub fn random_requests(map: &AddressMap, seed: u64, count: usize) -> Vec<BulkRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = *map.geometry();
    let line = g.cacheline_bytes;
    let rowb = g.row_size_bytes;
    let cap = map.capacity();
    let mut t = Time::ZERO;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        t += ns(rng.gen_range(0..4) as f64 * 7.5);
        let rows_total = cap / rowb;
        let req = match rng.gen_range(0..10) {
            0..=2 => BulkRequest::read(rng.gen_range(0..cap / line) * line, t),
            3..=4 => {
                let mut d = vec![0u8; line as usize];
                rng.fill(&mut d[..]);
                BulkRequest::write(rng.gen_range(0..cap / line) * line, d, t)
            }
            5..=7 => {
                if rng.gen_bool(0.5) {
                    let n = rng.gen_range(1..=2);
                    let src = rng.gen_range(0..=rows_total - n) * rowb;
                    let dst = rng.gen_range(0..=rows_total - n) * rowb;
                    BulkRequest::copy(src, dst, n * rowb, t)
                } else {
                    let n = rng.gen_range(1..=rowb / line);
                    let src = rng.gen_range(0..=cap / line - n) * line;
                    let dst = rng.gen_range(0..=cap / line - n) * line;
                    BulkRequest::copy(src, dst, n * line, t)
                }
            }
            _ => {
                if rng.gen_bool(0.5) {
                    BulkRequest::zero(rng.gen_range(0..rows_total) * rowb, rowb, t)
                } else {
                    let n = rng.gen_range(1..=rowb / line);
                    BulkRequest::zero(rng.gen_range(0..=cap / line - n) * line, n * line, t)
                }
            }
        };
        if req.validate(map).is_ok() {
            out.push(req);
        }
    }
    out
}

/// Final image and read results of running `reqs` through the controller.
pub fn run_controller(
    map: &AddressMap,
    features: Features,
    image: MemoryImage,
    reqs: &[BulkRequest],
) -> (MemoryImage, Vec<Vec<u8>>, Controller) {
    let mut c = Controller::with_image(
        map.clone(),
        ddr3_1066(),
        features,
        SchedulingPolicy::Fifo,
        image,
    );
    let ids: Vec<_> = reqs.iter().map(|r| c.submit(r.clone()).unwrap()).collect();
    c.run().unwrap();
    let reads = reqs
        .iter()
        .zip(&ids)
        .filter(|(r, _)| matches!(r.kind, rowclone_core::controller::RequestKind::Read { .. }))
        .map(|(_, id)| c.take_read_data(*id).expect("read data"))
        .collect();
    (c.dram().image().clone(), reads, c)
}

/// Final image and read results of the flat reference interpreter.
pub fn run_reference(
    map: &AddressMap,
    image: &MemoryImage,
    reqs: &[BulkRequest],
) -> (MemoryImage, Vec<Vec<u8>>) {
    let mut m = FlatMemory::from_image(map, image);
    let line = map.geometry().cacheline_bytes;
    let reads = reqs.iter().filter_map(|r| m.apply(r, line)).collect();
    (m.to_image(map), reads)
}

/// Random system-level operation stream over physical addresses plus
/// fork and copy-on-write steps.
pub fn random_ops(map: &AddressMap, seed: u64, count: usize) -> Vec<MemOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = *map.geometry();
    let zero = ZeroRows::standard(&g);
    let line = g.cacheline_bytes;
    let rowb = g.row_size_bytes;
    let cap = map.capacity();
    let writable = |a: u64| !zero.is_reserved(map.row_of(a).unwrap());
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let op = match rng.gen_range(0..12) {
            0..=3 => MemOp::Read {
                addr: rng.gen_range(0..cap / line) * line,
            },
            4..=5 => MemOp::Write {
                addr: rng.gen_range(0..cap / line) * line,
                value: Some(rng.gen()),
            },
            6..=7 => {
                let len = if rng.gen_bool(0.5) {
                    rowb
                } else {
                    rng.gen_range(1..=rowb / line) * line
                };
                let align = if len == rowb { rowb } else { line };
                MemOp::Copy {
                    src: rng.gen_range(0..=(cap - len) / align) * align,
                    dst: rng.gen_range(0..=(cap - len) / align) * align,
                    len,
                }
            }
            8..=9 => {
                let len = if rng.gen_bool(0.5) {
                    rowb
                } else {
                    rng.gen_range(1..=rowb / line) * line
                };
                let align = if len == rowb { rowb } else { line };
                MemOp::Zero {
                    dst: rng.gen_range(0..=(cap - len) / align) * align,
                    len,
                }
            }
            10 => MemOp::Fork,
            _ => MemOp::CowWrite {
                vpage: rng.gen_range(0..4),
                value: Some(rng.gen()),
            },
        };
        let ok = match op {
            MemOp::Write { addr, .. } => writable(addr),
            MemOp::Copy { src, dst, len } => {
                (src + len <= dst || dst + len <= src)
                    && (dst..dst + len).step_by(line as usize).all(writable)
            }
            MemOp::Zero { dst, len } => (dst..dst + len).step_by(line as usize).all(writable),
            _ => true,
        };
        if ok {
            out.push(op);
        }
    }
    out
}
