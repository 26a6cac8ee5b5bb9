//! Standalone legality checker for issued command streams.
//!
//! This re-derives every constraint from logs of past command times; it
//! shares no state tracking with [`super::DeviceState`], so it can audit
//! anything the scheduler emits.

use std::fmt;

use serde::Serialize;

use super::{Command, CommandKind, Constraint, DramConfig};
use crate::time::Time;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Timing(Constraint),
    /// Command issued earlier than its predecessor in the stream.
    OutOfOrder,
    /// Command addressed a bank in a phase where it can never be legal.
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub command: Command,
    pub kind: ViolationKind,
}

impl Violation {
    pub fn constraint(&self) -> Option<Constraint> {
        match self.kind {
            ViolationKind::Timing(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match &self.kind {
            ViolationKind::Timing(c) => c.name().to_string(),
            ViolationKind::OutOfOrder => "out of order".to_string(),
            ViolationKind::Protocol(s) => s.clone(),
        };
        write!(
            f,
            "#{} {} @{}: {}",
            self.index, self.command.kind, self.command.issue_time, what
        )
    }
}

#[derive(Default, Clone)]
struct BankLog {
    open: Option<(u64, bool)>,
    act: Option<Time>,
    pre: Option<Time>,
    rd: Option<Time>,
    wr_end: Option<Time>,
}

struct Checker<'a> {
    cfg: &'a DramConfig,
    banks: Vec<BankLog>,
    acts: Vec<Time>,
    column: Option<Time>,
    /// (issue, burst start) of every RD/WR, in issue order.
    bursts: Vec<(Time, Time)>,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn require(
        &mut self,
        index: usize,
        cmd: &Command,
        c: Constraint,
        after: Option<Time>,
        gap: Time,
    ) {
        if let Some(a) = after {
            if cmd.issue_time < a + gap {
                self.out.push(Violation {
                    index,
                    command: *cmd,
                    kind: ViolationKind::Timing(c),
                });
            }
        }
    }

    fn protocol(&mut self, index: usize, cmd: &Command, why: &str) {
        self.out.push(Violation {
            index,
            command: *cmd,
            kind: ViolationKind::Protocol(why.into()),
        });
    }

    fn step(&mut self, i: usize, cmd: &Command) {
        let t = self.cfg.timing;
        let at = cmd.issue_time;
        match cmd.kind {
            CommandKind::Act { bank, subarray, .. } => {
                let log = self.banks[bank as usize].clone();
                match log.open {
                    None => {
                        self.require(i, cmd, Constraint::Rp, log.pre, t.t_rp);
                        self.require(i, cmd, Constraint::Rc, log.act, t.t_rc);
                    }
                    Some((open_sa, armed))
                        if self.cfg.fpm_enabled && armed && open_sa == subarray =>
                    {
                        self.require(i, cmd, Constraint::Ras, log.act, t.t_ras);
                    }
                    Some(_) => self.protocol(i, cmd, "activation of an open bank"),
                }
                self.require(i, cmd, Constraint::Rrd, self.acts.last().copied(), t.t_rrd);
                if self.acts.len() >= 4 {
                    self.require(
                        i,
                        cmd,
                        Constraint::Faw,
                        Some(self.acts[self.acts.len() - 4]),
                        t.t_faw,
                    );
                }
                self.acts.push(at);
                let log = &mut self.banks[bank as usize];
                log.act = Some(at);
                log.open = Some((subarray, self.cfg.fpm_enabled));
            }
            CommandKind::Pre { bank } => {
                let log = self.banks[bank as usize].clone();
                if log.open.is_none() {
                    return self.protocol(i, cmd, "precharge of a closed bank");
                }
                self.require(i, cmd, Constraint::Ras, log.act, t.t_ras);
                self.require(i, cmd, Constraint::Rtp, log.rd, t.t_rtp);
                self.require(i, cmd, Constraint::Wr, log.wr_end, t.t_wr);
                let log = &mut self.banks[bank as usize];
                log.open = None;
                log.pre = Some(at);
            }
            CommandKind::Rd { bank, .. } | CommandKind::Wr { bank, .. } => {
                let log = self.banks[bank as usize].clone();
                if log.open.is_none() {
                    return self.protocol(i, cmd, "column access to a closed bank");
                }
                self.require(i, cmd, Constraint::Rcd, log.act, t.t_rcd);
                self.require(i, cmd, Constraint::Ccd, self.column, t.t_ccd);
                let is_read = matches!(cmd.kind, CommandKind::Rd { .. });
                let start = at + if is_read { t.cl } else { t.cwl };
                let end = start + t.t_burst;
                // Bursts issued longer ago than the longest latency plus a burst cannot reach us.
                let horizon = at.saturating_sub(t.cl.max(t.cwl) + t.t_burst);
                let clash = self
                    .bursts
                    .iter()
                    .rev()
                    .take_while(|(issued, _)| *issued >= horizon)
                    .any(|&(_, s)| s < end && start < s + t.t_burst);
                if clash {
                    self.out.push(Violation {
                        index: i,
                        command: *cmd,
                        kind: ViolationKind::Timing(Constraint::DataBus),
                    });
                }
                self.bursts.push((at, start));
                self.column = Some(at);
                let log = &mut self.banks[bank as usize];
                if is_read {
                    log.rd = Some(at);
                } else {
                    log.wr_end = Some(log.wr_end.map_or(end, |w| w.max(end)));
                }
                if let Some(o) = log.open.as_mut() {
                    o.1 = false;
                }
            }
            CommandKind::Transfer {
                src_bank, dst_bank, ..
            } => {
                let src = self.banks[src_bank as usize].clone();
                let dst = self.banks[dst_bank as usize].clone();
                if src.open.is_none() || dst.open.is_none() {
                    return self.protocol(i, cmd, "TRANSFER with a closed bank");
                }
                self.require(i, cmd, Constraint::Rcd, src.act, t.t_rcd);
                self.require(i, cmd, Constraint::Rcd, dst.act, t.t_rcd);
                self.require(i, cmd, Constraint::Ccd, self.column, t.t_ccd);
                self.column = Some(at);
                let end = at + t.t_burst;
                let s = &mut self.banks[src_bank as usize];
                s.rd = Some(at);
                if let Some(o) = s.open.as_mut() {
                    o.1 = false;
                }
                let d = &mut self.banks[dst_bank as usize];
                d.wr_end = Some(d.wr_end.map_or(end, |w| w.max(end)));
                if let Some(o) = d.open.as_mut() {
                    o.1 = false;
                }
            }
        }
    }
}

/// Checks a command stream, in issue order, against every timing and
/// protocol rule. Returns all violations found (empty when legal).
pub fn check_commands(cfg: &DramConfig, cmds: &[Command]) -> Vec<Violation> {
    let mut c = Checker {
        cfg,
        banks: vec![BankLog::default(); cfg.geometry.num_banks as usize],
        acts: Vec::new(),
        column: None,
        bursts: Vec::new(),
        out: Vec::new(),
    };
    for (i, cmd) in cmds.iter().enumerate() {
        if let Err(e) = cmd.kind.validate(&cfg.geometry) {
            c.protocol(i, cmd, &e.to_string());
            continue;
        }
        if i > 0 && cmd.issue_time < cmds[i - 1].issue_time {
            c.out.push(Violation {
                index: i,
                command: *cmd,
                kind: ViolationKind::OutOfOrder,
            });
        }
        c.step(i, cmd);
    }
    c.out
}
