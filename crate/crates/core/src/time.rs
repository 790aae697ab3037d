//! Integer-nanosecond simulation time.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::SimError;

/// Nanoseconds since simulation start.
///
/// Arithmetic through the `Add`/`Sub` operators panics on overflow or underflow;
/// the `checked_*` variants return `None` instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 * 1e-6
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 * 1e-3
    }

    pub fn checked_add(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_add(rhs.0).map(SimTime)
    }

    pub fn checked_sub(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_sub(rhs.0).map(SimTime)
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_mul(self, k: u64) -> Option<SimTime> {
        self.0.checked_mul(k).map(SimTime)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        self.checked_add(rhs)
            .unwrap_or_else(|| panic!("SimTime overflow: {self} + {rhs}"))
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        self.checked_sub(rhs)
            .unwrap_or_else(|| panic!("SimTime underflow: {self} - {rhs}"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ns = self.0;
        if ns == 0 {
            write!(f, "0s")
        } else if ns.is_multiple_of(1_000_000_000) {
            write!(f, "{}s", ns / 1_000_000_000)
        } else if ns.is_multiple_of(1_000_000) {
            write!(f, "{}ms", ns / 1_000_000)
        } else if ns.is_multiple_of(1_000) {
            write!(f, "{}us", ns / 1_000)
        } else {
            write!(f, "{ns}ns")
        }
    }
}

/// Parses `"5s"`, `"50ms"`, `"400us"`, `"12ns"` and plain integers (nanoseconds).
/// Fractional values such as `"41.47ms"` are accepted and rounded to the nearest nanosecond.
impl FromStr for SimTime {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s
            .find(|c: char| !(c.is_ascii_digit() || c == '.'))
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let scale: u64 = match unit.trim() {
            "" | "ns" => 1,
            "us" | "µs" => 1_000,
            "ms" => 1_000_000,
            "s" => 1_000_000_000,
            other => return Err(SimError::config(format!("unknown time unit {other:?} in {s:?}"))),
        };
        if num.is_empty() {
            return Err(SimError::config(format!("missing number in time {s:?}")));
        }
        if let Ok(whole) = num.parse::<u64>() {
            return whole
                .checked_mul(scale)
                .map(SimTime)
                .ok_or_else(|| SimError::config(format!("time {s:?} overflows")));
        }
        let v: f64 = num
            .parse()
            .map_err(|_| SimError::config(format!("invalid time {s:?}")))?;
        let ns = (v * scale as f64).round();
        if !ns.is_finite() || ns < 0.0 || ns > u64::MAX as f64 {
            return Err(SimError::config(format!("time {s:?} out of range")));
        }
        Ok(SimTime(ns as u64))
    }
}

/// Serialized as the canonical unit string (`"400us"`), read from either a
/// string or an integer nanosecond count.
impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SimTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(ns) => Ok(SimTime(ns)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
