//! DRAM device model: organization, timing rules, the per-bank state machine
//! (including in-array row copy and inter-bank TRANSFER) and cell contents.

mod bank;
pub mod check;
mod command;
mod geometry;
mod image;
pub(crate) mod timing;

use thiserror::Error;

pub use bank::{Applied, BankState, DeviceState, Dram, DramConfig, Phase};
pub use check::{check_commands, Violation, ViolationKind};
pub use command::{Command, CommandKind, Constraint};
pub use geometry::{Geometry, RowAddr, MAX_BANKS};
pub use image::MemoryImage;
pub use timing::TimingParams;

use crate::time::Time;

/// A configuration value that violates an invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {field}: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("{constraint} violated: {command} at {issue}, earliest legal {required}")]
    TimingViolation {
        constraint: Constraint,
        command: CommandKind,
        issue: Time,
        required: Time,
    },
    #[error("illegal transition: {0}")]
    IllegalTransition(String),
    #[error(
        "row copy across subarrays in bank {bank}: open subarray {open}, requested {requested}"
    )]
    FpmCrossSubarray {
        bank: u64,
        open: u64,
        requested: u64,
    },
    #[error("malformed command: {0}")]
    Malformed(String),
}

/// Validates a device organization and its timing parameters together.
pub fn validate_config(geometry: &Geometry, timing: &TimingParams) -> Result<(), ConfigError> {
    geometry.validate()?;
    timing.validate()
}
