//! Credit-based shaper state.
//!
//! Credit is kept as an exact integer in nano-bits (bits × 10⁹) so that
//! `slope [bit/s] × Δt [ns]` never rounds.

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::time::SimTime;

const NANO: i128 = 1_000_000_000;

/// `idle_slope = fraction × port_rate`, `send_slope = idle_slope − port_rate`.
pub fn cbs_slopes(idle_slope_fraction: f64, port_rate_bps: u64) -> Result<(i64, i64)> {
    if !(idle_slope_fraction > 0.0 && idle_slope_fraction < 1.0) {
        return Err(SimError::config(format!(
            "CBS idle-slope fraction {idle_slope_fraction} outside (0, 1)"
        )));
    }
    if port_rate_bps == 0 {
        return Err(SimError::config("CBS port rate must be positive"));
    }
    let idle = (idle_slope_fraction * port_rate_bps as f64).round() as i64;
    Ok((idle, idle - port_rate_bps as i64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CbsPhase {
    /// Frames waiting, queue not transmitting.
    Accumulating,
    Transmitting,
    /// Nothing queued and not transmitting.
    IdleEmpty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CbsState {
    credit_nanobits: i128,
    idle_slope: i64,
    send_slope: i64,
    last_update: SimTime,
}

impl CbsState {
    pub fn new(idle_slope_fraction: f64, port_rate_bps: u64) -> Result<Self> {
        let (idle_slope, send_slope) = cbs_slopes(idle_slope_fraction, port_rate_bps)?;
        Ok(CbsState {
            credit_nanobits: 0,
            idle_slope,
            send_slope,
            last_update: SimTime::ZERO,
        })
    }

    pub fn with_credit_bits(mut self, bits: i64) -> Self {
        self.credit_nanobits = i128::from(bits) * NANO;
        self
    }

    pub fn idle_slope(&self) -> i64 {
        self.idle_slope
    }

    pub fn send_slope(&self) -> i64 {
        self.send_slope
    }

    pub fn last_update(&self) -> SimTime {
        self.last_update
    }

    pub fn credit_bits(&self) -> f64 {
        self.credit_nanobits as f64 / NANO as f64
    }

    pub fn credit_nanobits(&self) -> i128 {
        self.credit_nanobits
    }

    pub fn eligible(&self) -> bool {
        self.credit_nanobits >= 0
    }

    /// Advances credit to `now`, assuming `phase` held since the last update.
    ///
    /// An empty, idle queue drops positive credit to zero at once and recovers
    /// negative credit at the idle slope, capped at zero.
    pub fn update(&mut self, now: SimTime, phase: CbsPhase) {
        let dt = i128::from(now.saturating_sub(self.last_update).as_nanos());
        match phase {
            CbsPhase::Accumulating => self.credit_nanobits += i128::from(self.idle_slope) * dt,
            CbsPhase::Transmitting => self.credit_nanobits += i128::from(self.send_slope) * dt,
            CbsPhase::IdleEmpty => {
                if self.credit_nanobits > 0 {
                    self.credit_nanobits = 0;
                } else {
                    self.credit_nanobits =
                        (self.credit_nanobits + i128::from(self.idle_slope) * dt).min(0);
                }
            }
        }
        self.last_update = self.last_update.max(now);
    }

    /// Time from `last_update` until accumulating credit reaches zero; zero when already eligible.
    pub fn time_to_eligible(&self) -> SimTime {
        if self.credit_nanobits >= 0 {
            return SimTime::ZERO;
        }
        let deficit = -self.credit_nanobits;
        let ns = (deficit + i128::from(self.idle_slope) - 1) / i128::from(self.idle_slope);
        SimTime::from_nanos(ns as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slopes_from_fraction() {
        assert_eq!(cbs_slopes(0.5, 100_000_000).unwrap(), (50_000_000, -50_000_000));
        assert_eq!(cbs_slopes(0.1, 100_000_000).unwrap(), (10_000_000, -90_000_000));
        assert_eq!(cbs_slopes(0.9, 1_000_000_000).unwrap(), (900_000_000, -100_000_000));
        assert!(cbs_slopes(0.0, 100_000_000).is_err());
        assert!(cbs_slopes(1.0, 100_000_000).is_err());
        assert!(cbs_slopes(f64::NAN, 100_000_000).is_err());
    }

    #[test]
    fn accumulate_then_transmit() {
        let mut s = CbsState::new(0.5, 100_000_000).unwrap();
        s.update(SimTime::from_micros(120), CbsPhase::Accumulating);
        assert_eq!(s.credit_bits(), 6000.0);

        let mut t = CbsState::new(0.5, 100_000_000).unwrap();
        t.update(SimTime::from_micros(120), CbsPhase::Transmitting);
        assert_eq!(t.credit_bits(), -6000.0);
    }

    #[test]
    fn positive_credit_resets_when_empty() {
        let mut s = CbsState::new(0.5, 100_000_000).unwrap().with_credit_bits(3000);
        s.update(SimTime::from_nanos(1), CbsPhase::IdleEmpty);
        assert_eq!(s.credit_bits(), 0.0);
    }

    #[test]
    fn negative_credit_recovers_to_zero_when_empty() {
        let mut s = CbsState::new(0.5, 100_000_000).unwrap().with_credit_bits(-6000);
        s.update(SimTime::from_micros(60), CbsPhase::IdleEmpty);
        assert_eq!(s.credit_bits(), -3000.0);
        s.update(SimTime::from_micros(500), CbsPhase::IdleEmpty);
        assert_eq!(s.credit_bits(), 0.0);
    }

    #[test]
    fn zero_crossing_time() {
        let s = CbsState::new(0.5, 100_000_000).unwrap().with_credit_bits(-6000);
        assert_eq!(s.time_to_eligible(), SimTime::from_micros(120));
        let s = CbsState::new(0.3, 100_000_000).unwrap().with_credit_bits(-1);
        // 1 bit at 30 Mbit/s = 33.3 ns, rounded up
        assert_eq!(s.time_to_eligible(), SimTime::from_nanos(34));
    }
}
