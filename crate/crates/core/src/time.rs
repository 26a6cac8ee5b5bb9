//! Simulation time.
//!
//! Time is kept as an integer count of picoseconds so that timing arithmetic
//! is exact and replay is bit-for-bit deterministic. Configuration and reports
//! use nanoseconds.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A point in time or a duration, in picoseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time(u64);

impl Time {
    pub const ZERO: Time = Time(0);

    pub const fn from_ps(ps: u64) -> Self {
        Time(ps)
    }

    /// Rounds to the nearest picosecond. Negative and non-finite inputs clamp to zero.
    pub fn from_ns(ns: f64) -> Self {
        if !ns.is_finite() || ns <= 0.0 {
            return Time(0);
        }
        Time((ns * 1000.0).round() as u64)
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_ns(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, rhs: Time) -> Time {
        Time(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Time {
    type Output = Time;
    fn add(self, rhs: Time) -> Time {
        Time(self.0 + rhs.0)
    }
}

impl AddAssign for Time {
    fn add_assign(&mut self, rhs: Time) {
        self.0 += rhs.0;
    }
}

impl Sub for Time {
    type Output = Time;
    fn sub(self, rhs: Time) -> Time {
        Time(self.0 - rhs.0)
    }
}

impl Mul<u64> for Time {
    type Output = Time;
    fn mul(self, rhs: u64) -> Time {
        Time(self.0 * rhs)
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.as_ns())
    }
}

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_ns())
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let ns = f64::deserialize(d)?;
        if !ns.is_finite() || ns < 0.0 {
            return Err(serde::de::Error::custom(format!(
                "time must be a non-negative number of ns, got {ns}"
            )));
        }
        Ok(Time::from_ns(ns))
    }
}
