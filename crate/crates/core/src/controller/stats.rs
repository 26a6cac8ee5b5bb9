use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mechanism::{Mechanism, OpClass};
use crate::dram::{Command, CommandKind};
use crate::time::Time;

pub type RequestId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimelineEntry {
    pub request: RequestId,
    pub command: Command,
    pub completion: Time,
}

/// Every command issued, in issue order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Timeline {
    pub entries: Vec<TimelineEntry>,
    pub channel_bytes: u64,
    /// Simulated time covered by the timeline.
    pub duration: Time,
}

impl Timeline {
    pub fn commands(&self) -> Vec<Command> {
        self.entries.iter().map(|e| e.command).collect()
    }

    pub fn counts(&self) -> CommandCounts {
        let mut c = CommandCounts::default();
        for e in &self.entries {
            c.add(&e.command.kind);
        }
        c
    }

    /// Sub-timeline of one request's commands.
    pub fn for_request(&self, id: RequestId, line_bytes: u64) -> Timeline {
        let entries: Vec<_> = self
            .entries
            .iter()
            .filter(|e| e.request == id)
            .cloned()
            .collect();
        let columns = entries
            .iter()
            .filter(|e| {
                matches!(
                    e.command.kind,
                    CommandKind::Rd { .. } | CommandKind::Wr { .. }
                )
            })
            .count() as u64;
        let duration = match (entries.first(), entries.iter().map(|e| e.completion).max()) {
            (Some(first), Some(end)) => end - first.command.issue_time,
            _ => Time::ZERO,
        };
        Timeline {
            entries,
            channel_bytes: columns * line_bytes,
            duration,
        }
    }

    /// Concatenation; durations add.
    pub fn concat(mut self, other: Timeline) -> Timeline {
        self.entries.extend(other.entries);
        self.channel_bytes += other.channel_bytes;
        self.duration += other.duration;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandCounts {
    pub act: u64,
    pub pre: u64,
    pub rd: u64,
    pub wr: u64,
    pub transfer: u64,
}

impl CommandCounts {
    pub fn add(&mut self, k: &CommandKind) {
        match k {
            CommandKind::Act { .. } => self.act += 1,
            CommandKind::Pre { .. } => self.pre += 1,
            CommandKind::Rd { .. } => self.rd += 1,
            CommandKind::Wr { .. } => self.wr += 1,
            CommandKind::Transfer { .. } => self.transfer += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.act + self.pre + self.rd + self.wr + self.transfer
    }
}

/// Outcome of one request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestRecord {
    pub id: RequestId,
    pub kind: &'static str,
    pub class: OpClass,
    pub mechanism: Option<Mechanism>,
    pub arrival: Time,
    /// Issue time of the request's first command.
    pub start: Time,
    /// Latest completion among the request's commands.
    pub end: Time,
    pub latency: Time,
    pub channel_bytes: u64,
    pub commands: CommandCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MechanismStats {
    pub count: u64,
    pub total_latency: Time,
    pub mean_latency_ns: f64,
    pub channel_bytes: u64,
}

/// Aggregate results of one scheduled run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimStats {
    pub requests: Vec<RequestRecord>,
    pub per_mechanism: BTreeMap<String, MechanismStats>,
    pub per_class: BTreeMap<OpClass, MechanismStats>,
    pub channel_bytes: u64,
    pub makespan: Time,
    pub commands: CommandCounts,
}

impl SimStats {
    pub fn from_records(mut requests: Vec<RequestRecord>, timeline: &Timeline) -> Self {
        requests.sort_by_key(|r| r.id);
        let mut per_mechanism: BTreeMap<String, MechanismStats> = BTreeMap::new();
        let mut per_class: BTreeMap<OpClass, MechanismStats> = BTreeMap::new();
        for r in &requests {
            let key = r
                .mechanism
                .map_or_else(|| r.kind.to_string(), |m| m.name().to_string());
            for s in [
                per_mechanism.entry(key).or_default(),
                per_class.entry(r.class).or_default(),
            ] {
                s.count += 1;
                s.total_latency += r.latency;
                s.channel_bytes += r.channel_bytes;
            }
        }
        for s in per_mechanism.values_mut().chain(per_class.values_mut()) {
            s.mean_latency_ns = s.total_latency.as_ns() / s.count as f64;
        }
        SimStats {
            requests,
            per_mechanism,
            per_class,
            channel_bytes: timeline.channel_bytes,
            makespan: timeline.duration,
            commands: timeline.counts(),
        }
    }

    pub fn mean_latency_ns(&self, kind: &str) -> Option<f64> {
        let lat: Vec<f64> = self
            .requests
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.latency.as_ns())
            .collect();
        (!lat.is_empty()).then(|| lat.iter().sum::<f64>() / lat.len() as f64)
    }
}
