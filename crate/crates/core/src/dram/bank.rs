use serde::{Deserialize, Serialize};

use super::{
    Command, CommandKind, Constraint, Geometry, MemoryImage, ProtocolError, RowAddr, TimingParams,
};
use crate::time::Time;

/// Activation state of one bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Precharged,
    /// Open after a column access; another ACT needs a PRE first.
    Activated {
        subarray: u64,
        row: u64,
    },
    /// Open with no column access since the last ACT. A further ACT to the
    /// same subarray performs an in-array row copy when FPM is enabled.
    FpmArmed {
        subarray: u64,
        row: u64,
    },
}

impl Phase {
    pub fn open_row(&self) -> Option<(u64, u64)> {
        match *self {
            Phase::Precharged => None,
            Phase::Activated { subarray, row } | Phase::FpmArmed { subarray, row } => {
                Some((subarray, row))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankState {
    pub phase: Phase,
    pub last_act: Option<Time>,
    pub last_pre: Option<Time>,
    /// Last read-side column access (RD, or TRANSFER sourcing from this bank).
    pub last_rd: Option<Time>,
    /// End of the last write data burst (WR, or TRANSFER into this bank).
    pub last_wr_end: Option<Time>,
}

impl BankState {
    fn new() -> Self {
        BankState {
            phase: Phase::Precharged,
            last_act: None,
            last_pre: None,
            last_rd: None,
            last_wr_end: None,
        }
    }
}

/// Timing state of the whole device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceState {
    pub banks: Vec<BankState>,
    /// Issue times of the last four ACTs, oldest first.
    pub recent_acts: Vec<Time>,
    pub last_column: Option<Time>,
    pub data_bus_free: Time,
}

/// Per-device options that change which transitions are legal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DramConfig {
    pub geometry: Geometry,
    pub timing: TimingParams,
    pub fpm_enabled: bool,
}

type Bounds = Vec<(Constraint, Time)>;

impl DeviceState {
    pub fn new(g: &Geometry) -> Self {
        DeviceState {
            banks: (0..g.num_banks).map(|_| BankState::new()).collect(),
            recent_acts: Vec::with_capacity(4),
            last_column: None,
            data_bus_free: Time::ZERO,
        }
    }

    pub fn phase(&self, bank: u64) -> Phase {
        self.banks[bank as usize].phase
    }

    /// Lower bounds on the issue time of `kind`, one per applicable constraint.
    fn bounds(&self, cfg: &DramConfig, kind: &CommandKind) -> Result<Bounds, ProtocolError> {
        let t = &cfg.timing;
        let mut out = Bounds::new();
        let mut push = |c: Constraint, base: Option<Time>, delta: Time| {
            if let Some(b) = base {
                out.push((c, b + delta));
            }
        };
        match *kind {
            CommandKind::Act { bank, subarray, .. } => {
                let b = &self.banks[bank as usize];
                match b.phase {
                    Phase::Precharged => {
                        push(Constraint::Rp, b.last_pre, t.t_rp);
                        push(Constraint::Rc, b.last_act, t.t_rc);
                    }
                    Phase::FpmArmed { subarray: open, .. } if cfg.fpm_enabled => {
                        if open != subarray {
                            return Err(ProtocolError::FpmCrossSubarray {
                                bank,
                                open,
                                requested: subarray,
                            });
                        }
                        push(Constraint::Ras, b.last_act, t.t_ras);
                    }
                    _ => {
                        return Err(ProtocolError::IllegalTransition(format!(
                            "{kind} to bank {bank} which is already open"
                        )))
                    }
                }
                push(Constraint::Rrd, self.recent_acts.last().copied(), t.t_rrd);
                if self.recent_acts.len() == 4 {
                    push(Constraint::Faw, Some(self.recent_acts[0]), t.t_faw);
                }
            }
            CommandKind::Pre { bank } => {
                let b = &self.banks[bank as usize];
                if b.phase == Phase::Precharged {
                    return Err(ProtocolError::IllegalTransition(format!(
                        "{kind} to a precharged bank"
                    )));
                }
                push(Constraint::Ras, b.last_act, t.t_ras);
                push(Constraint::Rtp, b.last_rd, t.t_rtp);
                push(Constraint::Wr, b.last_wr_end, t.t_wr);
            }
            CommandKind::Rd { bank, .. } | CommandKind::Wr { bank, .. } => {
                let b = &self.banks[bank as usize];
                if b.phase == Phase::Precharged {
                    return Err(ProtocolError::IllegalTransition(format!(
                        "{kind} to a precharged bank"
                    )));
                }
                push(Constraint::Rcd, b.last_act, t.t_rcd);
                push(Constraint::Ccd, self.last_column, t.t_ccd);
                let latency = if matches!(kind, CommandKind::Rd { .. }) {
                    t.cl
                } else {
                    t.cwl
                };
                out.push((
                    Constraint::DataBus,
                    self.data_bus_free.saturating_sub(latency),
                ));
            }
            CommandKind::Transfer {
                src_bank, dst_bank, ..
            } => {
                for bank in [src_bank, dst_bank] {
                    let b = &self.banks[bank as usize];
                    if b.phase == Phase::Precharged {
                        return Err(ProtocolError::IllegalTransition(format!(
                            "{kind} with bank {bank} precharged"
                        )));
                    }
                    push(Constraint::Rcd, b.last_act, t.t_rcd);
                }
                push(Constraint::Ccd, self.last_column, t.t_ccd);
            }
        }
        Ok(out)
    }

    /// Smallest time at or after `cmd.issue_time` at which `cmd` is legal.
    pub fn earliest_legal_time(
        &self,
        cfg: &DramConfig,
        cmd: &Command,
    ) -> Result<Time, ProtocolError> {
        cmd.kind.validate(&cfg.geometry)?;
        let bounds = self.bounds(cfg, &cmd.kind)?;
        Ok(bounds
            .iter()
            .map(|&(_, t)| t)
            .fold(cmd.issue_time, Time::max))
    }

    /// Checks `cmd` at its issue time and, if legal, advances the timing state.
    /// Returns the completion time.
    pub fn advance(&mut self, cfg: &DramConfig, cmd: &Command) -> Result<Time, ProtocolError> {
        cmd.kind.validate(&cfg.geometry)?;
        let bounds = self.bounds(cfg, &cmd.kind)?;
        if let Some(&(constraint, required)) = bounds.iter().find(|(_, t)| cmd.issue_time < *t) {
            return Err(ProtocolError::TimingViolation {
                constraint,
                command: cmd.kind,
                issue: cmd.issue_time,
                required,
            });
        }
        let now = cmd.issue_time;
        let t = &cfg.timing;
        let completion = match cmd.kind {
            CommandKind::Act {
                bank,
                subarray,
                row,
            } => {
                let b = &mut self.banks[bank as usize];
                b.last_act = Some(now);
                b.phase = if cfg.fpm_enabled {
                    Phase::FpmArmed { subarray, row }
                } else {
                    Phase::Activated { subarray, row }
                };
                if self.recent_acts.len() == 4 {
                    self.recent_acts.remove(0);
                }
                self.recent_acts.push(now);
                now + t.t_rcd
            }
            CommandKind::Pre { bank } => {
                let b = &mut self.banks[bank as usize];
                b.phase = Phase::Precharged;
                b.last_pre = Some(now);
                now + t.t_rp
            }
            CommandKind::Rd { bank, .. } => {
                self.disarm(bank);
                self.banks[bank as usize].last_rd = Some(now);
                self.last_column = Some(now);
                let end = now + t.cl + t.t_burst;
                self.data_bus_free = end;
                end
            }
            CommandKind::Wr { bank, .. } => {
                self.disarm(bank);
                let end = now + t.cwl + t.t_burst;
                self.banks[bank as usize].last_wr_end = Some(end);
                self.last_column = Some(now);
                self.data_bus_free = end;
                end
            }
            CommandKind::Transfer {
                src_bank, dst_bank, ..
            } => {
                self.disarm(src_bank);
                self.disarm(dst_bank);
                let end = now + t.t_burst;
                self.banks[src_bank as usize].last_rd = Some(now);
                self.banks[dst_bank as usize].last_wr_end = Some(end);
                self.last_column = Some(now);
                end
            }
        };
        Ok(completion)
    }

    fn disarm(&mut self, bank: u64) {
        let b = &mut self.banks[bank as usize];
        if let Phase::FpmArmed { subarray, row } = b.phase {
            b.phase = Phase::Activated { subarray, row };
        }
    }
}

/// What applying one command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub completion: Time,
    /// Cacheline driven onto the channel by a RD.
    pub read_data: Option<Vec<u8>>,
    /// Destination row written by an in-array row copy (FPM).
    pub row_copied: Option<(RowAddr, RowAddr)>,
}

/// A DRAM device: timing state, row buffers and cell contents.
#[derive(Debug, Clone)]
pub struct Dram {
    cfg: DramConfig,
    state: DeviceState,
    image: MemoryImage,
    row_buffers: Vec<Option<Vec<u8>>>,
    channel_bytes: u64,
}

impl Dram {
    pub fn new(cfg: DramConfig) -> Self {
        Self::with_image(cfg, MemoryImage::new(&cfg.geometry))
    }

    pub fn with_image(cfg: DramConfig, image: MemoryImage) -> Self {
        Dram {
            state: DeviceState::new(&cfg.geometry),
            row_buffers: vec![None; cfg.geometry.num_banks as usize],
            cfg,
            image,
            channel_bytes: 0,
        }
    }

    pub fn config(&self) -> &DramConfig {
        &self.cfg
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }

    pub fn image(&self) -> &MemoryImage {
        &self.image
    }

    pub fn into_image(self) -> MemoryImage {
        self.image
    }

    /// Bytes moved over the processor-memory channel so far.
    pub fn channel_bytes(&self) -> u64 {
        self.channel_bytes
    }

    pub fn earliest_legal_time(&self, cmd: &Command) -> Result<Time, ProtocolError> {
        self.state.earliest_legal_time(&self.cfg, cmd)
    }

    /// Issues `cmd` at `cmd.issue_time`. A WR takes its cacheline from
    /// `write_data`; a RD returns the cacheline it drove onto the channel.
    pub fn apply(
        &mut self,
        cmd: &Command,
        write_data: Option<&[u8]>,
    ) -> Result<Applied, ProtocolError> {
        cmd.kind.validate(&self.cfg.geometry)?;
        let line = self.cfg.geometry.cacheline_bytes as usize;
        if matches!(cmd.kind, CommandKind::Wr { .. }) && write_data.is_none_or(|d| d.len() != line)
        {
            return Err(ProtocolError::Malformed(format!(
                "{} needs exactly {line} bytes of data",
                cmd.kind
            )));
        }
        let prior = self.state.phase(match cmd.kind {
            CommandKind::Act { bank, .. }
            | CommandKind::Pre { bank }
            | CommandKind::Rd { bank, .. }
            | CommandKind::Wr { bank, .. } => bank,
            CommandKind::Transfer { src_bank, .. } => src_bank,
        });
        let completion = self.state.advance(&self.cfg, cmd)?;
        let mut out = Applied {
            completion,
            read_data: None,
            row_copied: None,
        };
        match cmd.kind {
            CommandKind::Act {
                bank,
                subarray,
                row,
            } => {
                let target = RowAddr {
                    bank,
                    subarray,
                    row,
                };
                match prior {
                    Phase::FpmArmed { row: src, .. } => {
                        // Row buffer still holds the source row; the second
                        // activation drives it into the destination cells.
                        let buf = self.row_buffers[bank as usize]
                            .as_ref()
                            .expect("open bank has a row buffer");
                        self.image.set_row(target, buf);
                        out.row_copied = Some((
                            RowAddr {
                                bank,
                                subarray,
                                row: src,
                            },
                            target,
                        ));
                    }
                    _ => self.row_buffers[bank as usize] = Some(self.image.row(target)),
                }
            }
            CommandKind::Pre { bank } => self.row_buffers[bank as usize] = None,
            CommandKind::Rd { bank, column } => {
                let off = (column as usize) * line;
                let buf = self.row_buffers[bank as usize]
                    .as_ref()
                    .expect("open bank has a row buffer");
                out.read_data = Some(buf[off..off + line].to_vec());
                self.channel_bytes += line as u64;
            }
            CommandKind::Wr { bank, column } => {
                let data = write_data.expect("checked above");
                self.write_line(bank, column, data);
                self.channel_bytes += line as u64;
            }
            CommandKind::Transfer {
                src_bank,
                src_column,
                dst_bank,
                dst_column,
            } => {
                let off = (src_column as usize) * line;
                let data = self.row_buffers[src_bank as usize]
                    .as_ref()
                    .expect("open bank has a row buffer")[off..off + line]
                    .to_vec();
                self.write_line(dst_bank, dst_column, &data);
            }
        }
        Ok(out)
    }

    /// Writes into the open row buffer and through to the backing row.
    fn write_line(&mut self, bank: u64, column: u64, data: &[u8]) {
        let line = data.len();
        let off = column as usize * line;
        let (subarray, row) = self.state.phase(bank).open_row().expect("bank is open");
        let buf = self.row_buffers[bank as usize]
            .as_mut()
            .expect("open bank has a row buffer");
        buf[off..off + line].copy_from_slice(data);
        self.image.write(
            RowAddr {
                bank,
                subarray,
                row,
            },
            off,
            data,
        );
    }
}
