use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::time::Time;

/// JEDEC-style timing constraints, in nanoseconds on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    #[serde(rename = "tCK")]
    pub t_ck: Time,
    #[serde(rename = "tRCD")]
    pub t_rcd: Time,
    #[serde(rename = "tRAS")]
    pub t_ras: Time,
    #[serde(rename = "tRP")]
    pub t_rp: Time,
    #[serde(rename = "tRC")]
    pub t_rc: Time,
    #[serde(rename = "CL")]
    pub cl: Time,
    #[serde(rename = "CWL")]
    pub cwl: Time,
    #[serde(rename = "tBURST")]
    pub t_burst: Time,
    #[serde(rename = "tCCD")]
    pub t_ccd: Time,
    #[serde(rename = "tRRD")]
    pub t_rrd: Time,
    #[serde(rename = "tFAW")]
    pub t_faw: Time,
    #[serde(rename = "tWR")]
    pub t_wr: Time,
    #[serde(rename = "tRTP")]
    pub t_rtp: Time,
}

impl TimingParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("tCK", self.t_ck),
            ("tRCD", self.t_rcd),
            ("tRAS", self.t_ras),
            ("tRP", self.t_rp),
            ("tRC", self.t_rc),
            ("CL", self.cl),
            ("CWL", self.cwl),
            ("tBURST", self.t_burst),
            ("tCCD", self.t_ccd),
            ("tRRD", self.t_rrd),
            ("tFAW", self.t_faw),
            ("tWR", self.t_wr),
            ("tRTP", self.t_rtp),
        ];
        for (name, v) in fields {
            if v == Time::ZERO {
                return Err(ConfigError::new(name, "must be greater than 0"));
            }
        }
        let restore = self.t_ras + self.t_rp;
        let diff = self.t_rc.as_ps().abs_diff(restore.as_ps());
        if diff > self.t_ck.as_ps() {
            return Err(ConfigError::new("tRC", "tRC ≠ tRAS + tRP"));
        }
        if self.t_ccd < self.t_burst {
            return Err(ConfigError::new("tCCD", "tCCD < tBURST"));
        }
        if self.t_faw < self.t_rrd {
            return Err(ConfigError::new("tFAW", "tFAW < tRRD"));
        }
        Ok(())
    }
}
