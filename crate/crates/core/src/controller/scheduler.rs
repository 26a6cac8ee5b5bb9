//! Request scheduling onto the DRAM device.
//!
//! Each request is compiled into an ordered command sequence. A started
//! request owns every bank it still has commands for, so sequences from
//! different requests interleave only across banks. Among the commands that
//! could go next, the one with the earliest legal issue time wins; ties go
//! to the older request. Simulated time never moves backwards.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::compile::{
    compile_copy, compile_read, compile_write, compile_zero, CompileError, Op, OpData,
};
use super::mapping::AddressMap;
use super::mechanism::{
    classify_copy, decide_copy, decide_zero, Features, Mechanism, OpClass, ZeroRows,
};
use super::request::{BulkRequest, RequestError, RequestKind};
use super::stats::{CommandCounts, RequestId, RequestRecord, SimStats, Timeline, TimelineEntry};
use crate::dram::{
    CommandKind, Dram, DramConfig, MemoryImage, ProtocolError, RowAddr, TimingParams,
};
use crate::time::Time;

/// Unstarted requests the scheduler looks at per decision.
pub const QUEUE_WINDOW: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulingPolicy {
    /// Requests to a bank start in arrival order.
    #[default]
    Fifo,
    /// Like FIFO, but a read or write hitting a bank's open row may start
    /// ahead of older requests to that bank when no data hazard exists.
    OpenRowFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubmitError {
    #[error(transparent)]
    Request(#[from] RequestError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// The scheduler produced a command the device rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("internal scheduling error on request {request}: {source}")]
pub struct ScheduleError {
    pub request: RequestId,
    #[source]
    pub source: ProtocolError,
}

#[derive(Debug, Clone)]
struct Pending {
    id: RequestId,
    arrival: Time,
    kind_label: &'static str,
    class: OpClass,
    mechanism: Option<Mechanism>,
    payload: Option<Vec<u8>>,
    ops: Vec<Op>,
    /// Banks used by `ops[i..]`.
    suffix: Vec<u64>,
    cursor: usize,
    banks: u64,
    reads: Vec<RowAddr>,
    writes: Vec<RowAddr>,
    /// Row of a single-line read or write, for row-hit detection.
    access_row: Option<RowAddr>,
    slots: Vec<Vec<u8>>,
    start: Option<Time>,
    end: Time,
    counts: CommandCounts,
}

impl Pending {
    fn recompute_suffix(&mut self) {
        let mut suffix = vec![0u64; self.ops.len() + 1];
        for i in (0..self.ops.len()).rev() {
            suffix[i] = suffix[i + 1] | self.ops[i].kind.bank_mask();
        }
        self.banks = suffix[0];
        self.suffix = suffix;
    }

    fn conflicts_with(&self, other: &Pending) -> bool {
        let hits = |a: &[RowAddr], b: &[RowAddr]| a.iter().any(|r| b.contains(r));
        hits(&self.writes, &other.writes)
            || hits(&self.writes, &other.reads)
            || hits(&self.reads, &other.writes)
    }
}

/// Adjustment applied when a request starts on banks left open.
struct Prefix {
    precharge: Vec<u64>,
    skip_act: bool,
}

enum Choice {
    Active(usize),
    Queued(usize),
}

pub struct Controller {
    map: AddressMap,
    features: Features,
    policy: SchedulingPolicy,
    zero_rows: ZeroRows,
    dram: Dram,
    queue: VecDeque<Pending>,
    active: Vec<Pending>,
    now: Time,
    next_id: RequestId,
    timeline: Timeline,
    records: Vec<RequestRecord>,
    read_data: BTreeMap<RequestId, Vec<u8>>,
}

impl Controller {
    pub fn new(
        map: AddressMap,
        timing: TimingParams,
        features: Features,
        policy: SchedulingPolicy,
    ) -> Self {
        let image = MemoryImage::new(map.geometry());
        Self::with_image(map, timing, features, policy, image)
    }

    pub fn with_image(
        map: AddressMap,
        timing: TimingParams,
        features: Features,
        policy: SchedulingPolicy,
        image: MemoryImage,
    ) -> Self {
        let cfg = DramConfig {
            geometry: *map.geometry(),
            timing,
            fpm_enabled: features.fpm_active(),
        };
        Controller {
            zero_rows: ZeroRows::standard(map.geometry()),
            dram: Dram::with_image(cfg, image),
            map,
            features,
            policy,
            queue: VecDeque::new(),
            active: Vec::new(),
            now: Time::ZERO,
            next_id: 0,
            timeline: Timeline::default(),
            records: Vec::new(),
            read_data: BTreeMap::new(),
        }
    }

    pub fn map(&self) -> &AddressMap {
        &self.map
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn zero_rows(&self) -> &ZeroRows {
        &self.zero_rows
    }

    pub fn dram(&self) -> &Dram {
        &self.dram
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.active.is_empty()
    }

    /// Mechanism this controller would pick for a request.
    pub fn mechanism_for(&self, kind: &RequestKind) -> Option<Mechanism> {
        match *kind {
            RequestKind::Copy { src, dst, len } => {
                Some(decide_copy(src, dst, len, &self.map, &self.features))
            }
            RequestKind::Zero { dst, len } => Some(decide_zero(
                dst,
                len,
                &self.map,
                &self.features,
                &self.zero_rows,
            )),
            _ => None,
        }
    }

    /// Validates, compiles and enqueues a request.
    pub fn submit(&mut self, req: BulkRequest) -> Result<RequestId, SubmitError> {
        req.validate(&self.map)?;
        let map = &self.map;
        let line = map.geometry().cacheline_bytes;
        let mechanism = self.mechanism_for(&req.kind);
        let kind_label = req.kind.label();
        let rows_in = |start: u64, len: u64| -> Vec<RowAddr> {
            let mut v: Vec<RowAddr> = (0..len / line)
                .map(|k| map.row_of(start + k * line).expect("validated"))
                .collect();
            v.dedup();
            v
        };
        let (ops, class, reads, writes, access_row, payload) = match req.kind {
            RequestKind::Read { addr } => {
                let r = map.row_of(addr).expect("validated");
                (
                    compile_read(addr, map),
                    OpClass::Read,
                    vec![r],
                    vec![],
                    Some(r),
                    None,
                )
            }
            RequestKind::Write { addr, data } => {
                let r = map.row_of(addr).expect("validated");
                (
                    compile_write(addr, map),
                    OpClass::Write,
                    vec![],
                    vec![r],
                    Some(r),
                    Some(data),
                )
            }
            RequestKind::Copy { src, dst, len } => {
                let ops = compile_copy(src, dst, len, mechanism.expect("copy"), map)?;
                (
                    ops,
                    classify_copy(src, dst, len, map),
                    rows_in(src, len),
                    rows_in(dst, len),
                    None,
                    None,
                )
            }
            RequestKind::Zero { dst, len } => {
                let ops = compile_zero(dst, len, mechanism.expect("zero"), &self.zero_rows, map)?;
                (ops, OpClass::Zeroing, vec![], rows_in(dst, len), None, None)
            }
        };
        let id = self.next_id;
        self.next_id += 1;
        let mut p = Pending {
            id,
            arrival: req.arrival,
            kind_label,
            class,
            mechanism,
            payload,
            ops,
            suffix: Vec::new(),
            cursor: 0,
            banks: 0,
            reads,
            writes,
            access_row,
            slots: Vec::new(),
            start: None,
            end: Time::ZERO,
            counts: CommandCounts::default(),
        };
        p.recompute_suffix();
        let pos = self
            .queue
            .iter()
            .rposition(|q| q.arrival <= p.arrival)
            .map_or(0, |i| i + 1);
        self.queue.insert(pos, p);
        Ok(id)
    }

    fn prefix(&self, p: &Pending) -> Prefix {
        let mut precharge = Vec::new();
        let mut skip_act = false;
        let mut banks = p.banks;
        while banks != 0 {
            let bank = banks.trailing_zeros() as u64;
            banks &= banks - 1;
            if let Some((subarray, row)) = self.dram.state().phase(bank).open_row() {
                let open = RowAddr {
                    bank,
                    subarray,
                    row,
                };
                if p.access_row == Some(open) {
                    skip_act = true;
                } else {
                    precharge.push(bank);
                }
            }
        }
        Prefix {
            precharge,
            skip_act,
        }
    }

    fn first_op(&self, p: &Pending) -> CommandKind {
        let pre = self.prefix(p);
        match pre.precharge.first() {
            Some(&bank) => CommandKind::Pre { bank },
            None => p.ops[usize::from(pre.skip_act)].kind,
        }
    }

    fn earliest(&self, p: &Pending, kind: CommandKind) -> Result<Time, ScheduleError> {
        let floor = self.now.max(p.arrival);
        self.dram
            .earliest_legal_time(&kind.at(floor))
            .map_err(|source| ScheduleError {
                request: p.id,
                source,
            })
    }

    fn row_hit(&self, p: &Pending) -> bool {
        p.access_row.is_some_and(|r| {
            self.dram.state().phase(r.bank).open_row() == Some((r.subarray, r.row))
        })
    }

    /// Picks the next command to issue: (time, id, choice).
    fn choose(&self) -> Result<Option<(Time, RequestId, Choice)>, ScheduleError> {
        let mut best: Option<(Time, RequestId, Choice)> = None;
        let mut consider = |t: Time, id: RequestId, c: Choice| {
            if best
                .as_ref()
                .is_none_or(|(bt, bid, _)| (t, id) < (*bt, *bid))
            {
                best = Some((t, id, c));
            }
        };
        let mut owned = 0u64;
        for (i, p) in self.active.iter().enumerate() {
            owned |= p.suffix[p.cursor];
            let t = self.earliest(p, p.ops[p.cursor].kind)?;
            consider(t, p.id, Choice::Active(i));
        }
        let all_banks = if self.map.geometry().num_banks == 64 {
            u64::MAX
        } else {
            (1u64 << self.map.geometry().num_banks) - 1
        };
        let mut claimed = 0u64;
        for (qi, p) in self.queue.iter().enumerate().take(QUEUE_WINDOW) {
            let free = p.banks & owned == 0;
            let in_turn = p.banks & claimed == 0;
            let bypass = !in_turn
                && self.policy == SchedulingPolicy::OpenRowFirst
                && self.row_hit(p)
                && !self
                    .queue
                    .iter()
                    .take(qi)
                    .any(|q| q.banks & p.banks != 0 && q.conflicts_with(p));
            if free && (in_turn || bypass) {
                let t = self.earliest(p, self.first_op(p))?;
                consider(t, p.id, Choice::Queued(qi));
            }
            claimed |= p.banks;
            if self.policy == SchedulingPolicy::Fifo && claimed & all_banks == all_banks {
                break;
            }
        }
        Ok(best)
    }

    /// Issues commands until every submitted request has completed.
    pub fn run(&mut self) -> Result<(), ScheduleError> {
        while let Some((t, _, choice)) = self.choose()? {
            let idx = match choice {
                Choice::Active(i) => i,
                Choice::Queued(qi) => {
                    let mut p = self.queue.remove(qi).expect("index from scan");
                    let pre = self.prefix(&p);
                    if !pre.precharge.is_empty() || pre.skip_act {
                        let rest = p.ops.split_off(usize::from(pre.skip_act));
                        p.ops = pre
                            .precharge
                            .iter()
                            .map(|&bank| Op {
                                kind: CommandKind::Pre { bank },
                                data: OpData::None,
                            })
                            .collect();
                        p.ops.extend(rest);
                        p.recompute_suffix();
                    }
                    p.start = Some(t);
                    self.active.push(p);
                    self.active.len() - 1
                }
            };
            self.issue(idx, t)?;
        }
        Ok(())
    }

    fn issue(&mut self, idx: usize, t: Time) -> Result<(), ScheduleError> {
        let line = self.map.geometry().cacheline_bytes as usize;
        let p = &mut self.active[idx];
        let op = p.ops[p.cursor];
        let zeros;
        let data: Option<&[u8]> = match op.data {
            OpData::FromSlot(n) => Some(&p.slots[n as usize]),
            OpData::Zeros => {
                zeros = vec![0u8; line];
                Some(&zeros)
            }
            OpData::Payload => p.payload.as_deref(),
            OpData::None | OpData::Capture(_) => None,
        };
        let cmd = op.kind.at(t);
        let applied = self
            .dram
            .apply(&cmd, data)
            .map_err(|source| ScheduleError {
                request: p.id,
                source,
            })?;
        if let (OpData::Capture(n), Some(bytes)) = (op.data, applied.read_data) {
            let n = n as usize;
            if p.slots.len() <= n {
                p.slots.resize(n + 1, Vec::new());
            }
            p.slots[n] = bytes;
        }
        p.counts.add(&op.kind);
        p.end = p.end.max(applied.completion);
        p.cursor += 1;
        self.now = t;
        self.timeline.entries.push(TimelineEntry {
            request: p.id,
            command: cmd,
            completion: applied.completion,
        });
        self.timeline.duration = self.timeline.duration.max(applied.completion);
        self.timeline.channel_bytes = self.dram.channel_bytes();
        if p.cursor == p.ops.len() {
            let p = self.active.swap_remove(idx);
            self.finish(p, line as u64);
        }
        Ok(())
    }

    fn finish(&mut self, mut p: Pending, line: u64) {
        if p.kind_label == "read" {
            if let Some(data) = p.slots.drain(..).next() {
                self.read_data.insert(p.id, data);
            }
        }
        self.records.push(RequestRecord {
            id: p.id,
            kind: p.kind_label,
            class: p.class,
            mechanism: p.mechanism,
            arrival: p.arrival,
            start: p.start.expect("issued at least one command"),
            end: p.end,
            latency: p.end.saturating_sub(p.arrival),
            channel_bytes: (p.counts.rd + p.counts.wr) * line,
            commands: p.counts,
        });
    }

    /// Data returned by a completed read request.
    pub fn take_read_data(&mut self, id: RequestId) -> Option<Vec<u8>> {
        self.read_data.remove(&id)
    }

    pub fn record(&self, id: RequestId) -> Option<&RequestRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn stats(&self) -> SimStats {
        SimStats::from_records(self.records.clone(), &self.timeline)
    }

    pub fn dram_config(&self) -> &DramConfig {
        self.dram.config()
    }

    pub fn into_parts(self) -> (Timeline, SimStats, Dram) {
        let stats = SimStats::from_records(self.records, &self.timeline);
        (self.timeline, stats, self.dram)
    }
}

/// Schedules a whole request stream on a fresh device.
pub fn schedule(
    map: AddressMap,
    timing: TimingParams,
    features: Features,
    policy: SchedulingPolicy,
    requests: impl IntoIterator<Item = BulkRequest>,
) -> Result<(Timeline, SimStats), ScheduleRunError> {
    let mut c = Controller::new(map, timing, features, policy);
    for r in requests {
        c.submit(r)?;
    }
    c.run()?;
    let (timeline, stats, _) = c.into_parts();
    Ok((timeline, stats))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleRunError {
    #[error(transparent)]
    Submit(#[from] SubmitError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}
