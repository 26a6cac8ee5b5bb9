use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Geometry, ProtocolError};
use crate::time::Time;

/// A DRAM command without its issue time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "UPPERCASE")]
pub enum CommandKind {
    Act {
        bank: u64,
        subarray: u64,
        row: u64,
    },
    Pre {
        bank: u64,
    },
    Rd {
        bank: u64,
        column: u64,
    },
    Wr {
        bank: u64,
        column: u64,
    },
    Transfer {
        src_bank: u64,
        src_column: u64,
        dst_bank: u64,
        dst_column: u64,
    },
}

impl CommandKind {
    /// Checks index ranges against the geometry.
    pub fn validate(&self, g: &Geometry) -> Result<(), ProtocolError> {
        let bad = |what: &str| {
            Err(ProtocolError::Malformed(format!(
                "{what} out of range in {self}"
            )))
        };
        let cols = g.lines_per_row();
        match *self {
            CommandKind::Act {
                bank,
                subarray,
                row,
            } => {
                if bank >= g.num_banks {
                    return bad("bank");
                }
                if subarray >= g.subarrays_per_bank {
                    return bad("subarray");
                }
                if row >= g.rows_per_subarray {
                    return bad("row");
                }
            }
            CommandKind::Pre { bank } => {
                if bank >= g.num_banks {
                    return bad("bank");
                }
            }
            CommandKind::Rd { bank, column } | CommandKind::Wr { bank, column } => {
                if bank >= g.num_banks {
                    return bad("bank");
                }
                if column >= cols {
                    return bad("column");
                }
            }
            CommandKind::Transfer {
                src_bank,
                src_column,
                dst_bank,
                dst_column,
            } => {
                if src_bank >= g.num_banks || dst_bank >= g.num_banks {
                    return bad("bank");
                }
                if src_column >= cols || dst_column >= cols {
                    return bad("column");
                }
                if src_bank == dst_bank {
                    return Err(ProtocolError::Malformed(format!(
                        "TRANSFER needs distinct banks in {self}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Banks this command touches, as a bit mask.
    pub fn bank_mask(&self) -> u64 {
        match *self {
            CommandKind::Act { bank, .. }
            | CommandKind::Pre { bank }
            | CommandKind::Rd { bank, .. }
            | CommandKind::Wr { bank, .. } => 1 << bank,
            CommandKind::Transfer {
                src_bank, dst_bank, ..
            } => (1 << src_bank) | (1 << dst_bank),
        }
    }

    pub fn is_column(&self) -> bool {
        matches!(
            self,
            CommandKind::Rd { .. } | CommandKind::Wr { .. } | CommandKind::Transfer { .. }
        )
    }

    pub fn at(self, issue_time: Time) -> Command {
        Command {
            kind: self,
            issue_time,
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CommandKind::Act {
                bank,
                subarray,
                row,
            } => write!(f, "ACT(b{bank},s{subarray},r{row})"),
            CommandKind::Pre { bank } => write!(f, "PRE(b{bank})"),
            CommandKind::Rd { bank, column } => write!(f, "RD(b{bank},c{column})"),
            CommandKind::Wr { bank, column } => write!(f, "WR(b{bank},c{column})"),
            CommandKind::Transfer {
                src_bank,
                src_column,
                dst_bank,
                dst_column,
            } => {
                write!(
                    f,
                    "TRANSFER(b{src_bank},c{src_column} -> b{dst_bank},c{dst_column})"
                )
            }
        }
    }
}

/// A command together with the time it is (or is requested to be) issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    #[serde(flatten)]
    pub kind: CommandKind,
    pub issue_time: Time,
}

/// Named inter-command timing constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constraint {
    #[serde(rename = "tRC")]
    Rc,
    #[serde(rename = "tRAS")]
    Ras,
    #[serde(rename = "tRP")]
    Rp,
    #[serde(rename = "tRCD")]
    Rcd,
    #[serde(rename = "tCCD")]
    Ccd,
    #[serde(rename = "tRRD")]
    Rrd,
    #[serde(rename = "tFAW")]
    Faw,
    #[serde(rename = "tWR")]
    Wr,
    #[serde(rename = "tRTP")]
    Rtp,
    /// Two bursts overlapping on the channel data bus.
    #[serde(rename = "data_bus")]
    DataBus,
}

impl Constraint {
    pub fn name(&self) -> &'static str {
        match self {
            Constraint::Rc => "tRC",
            Constraint::Ras => "tRAS",
            Constraint::Rp => "tRP",
            Constraint::Rcd => "tRCD",
            Constraint::Ccd => "tCCD",
            Constraint::Rrd => "tRRD",
            Constraint::Faw => "tFAW",
            Constraint::Wr => "tWR",
            Constraint::Rtp => "tRTP",
            Constraint::DataBus => "data_bus",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
