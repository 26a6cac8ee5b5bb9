//! Energy accounting over command timelines.

use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{CommandCounts, Timeline};
use crate::dram::ConfigError;
use crate::time::Time;

/// Per-command energies in nJ and background power in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerParams {
    /// One ACT+PRE pair.
    pub e_act_pre: f64,
    /// Array and peripheral work of one RD burst.
    pub e_rd_array: f64,
    /// Array and peripheral work of one WR burst.
    pub e_wr_array: f64,
    /// Driving one burst on the channel.
    pub e_io: f64,
    /// One TRANSFER burst on the internal bus.
    pub e_transfer: f64,
    #[serde(default)]
    pub p_background: f64,
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("e_act_pre", self.e_act_pre),
            ("e_rd_array", self.e_rd_array),
            ("e_wr_array", self.e_wr_array),
            ("e_io", self.e_io),
            ("e_transfer", self.e_transfer),
            ("p_background", self.p_background),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(ConfigError::new(name, "must be a finite value ≥ 0"));
            }
        }
        if self.e_transfer >= self.e_rd_array + self.e_wr_array + 2.0 * self.e_io {
            return Err(ConfigError::new(
                "e_transfer",
                "must be below the cost of a read plus a write over the channel",
            ));
        }
        Ok(())
    }

    /// Every parameter multiplied by `k`.
    pub fn scaled(&self, k: f64) -> PowerParams {
        PowerParams {
            e_act_pre: self.e_act_pre * k,
            e_rd_array: self.e_rd_array * k,
            e_wr_array: self.e_wr_array * k,
            e_io: self.e_io * k,
            e_transfer: self.e_transfer * k,
            p_background: self.p_background * k,
        }
    }
}

/// Energy by component, in nJ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub act_pre_energy: f64,
    pub array_rw_energy: f64,
    pub io_energy: f64,
    pub transfer_energy: f64,
    pub background_energy: f64,
    pub total: f64,
}

impl EnergyLedger {
    fn from_components(
        act_pre: f64,
        array_rw: f64,
        io: f64,
        transfer: f64,
        background: f64,
    ) -> Self {
        EnergyLedger {
            act_pre_energy: act_pre,
            array_rw_energy: array_rw,
            io_energy: io,
            transfer_energy: transfer,
            background_energy: background,
            total: act_pre + array_rw + io + transfer + background,
        }
    }

    /// Energy of a set of commands spanning `duration`.
    pub fn from_counts(c: &CommandCounts, duration: Time, p: &PowerParams) -> Self {
        EnergyLedger::from_components(
            p.e_act_pre * (c.act + c.pre) as f64 / 2.0,
            p.e_rd_array * c.rd as f64 + p.e_wr_array * c.wr as f64,
            p.e_io * (c.rd + c.wr) as f64,
            p.e_transfer * c.transfer as f64,
            // mW × ns = pJ.
            p.p_background * duration.as_ns() * 1e-3,
        )
    }
}

impl Add for EnergyLedger {
    type Output = EnergyLedger;

    fn add(self, o: EnergyLedger) -> EnergyLedger {
        EnergyLedger::from_components(
            self.act_pre_energy + o.act_pre_energy,
            self.array_rw_energy + o.array_rw_energy,
            self.io_energy + o.io_energy,
            self.transfer_energy + o.transfer_energy,
            self.background_energy + o.background_energy,
        )
    }
}

/// Energy of every command in `timeline`, plus background over its duration.
pub fn account(timeline: &Timeline, p: &PowerParams) -> EnergyLedger {
    EnergyLedger::from_counts(&timeline.counts(), timeline.duration, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EnergyError {
    #[error("division by zero: the compared ledger has zero total energy")]
    DivisionByZero,
    #[error("baseline ledger has zero total energy")]
    EmptyBaseline,
}

/// `baseline.total / rowclone.total`.
pub fn energy_ratio(baseline: &EnergyLedger, rowclone: &EnergyLedger) -> Result<f64, EnergyError> {
    if rowclone.total == 0.0 {
        return Err(EnergyError::DivisionByZero);
    }
    if baseline.total <= 0.0 {
        return Err(EnergyError::EmptyBaseline);
    }
    Ok(baseline.total / rowclone.total)
}
