//! Egress transmission selection: FIFO, strict priority, CBS, TAS and frame preemption.

pub mod cbs;
pub mod preemption;
pub mod tas;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fabric::{EgressPort, NUM_QUEUES};
use crate::time::SimTime;
use tas::{GateControlList, GclEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QueueMode {
    /// One shared queue, head-of-line service.
    #[default]
    Fifo,
    Priority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbsQueueConfig {
    pub queue: usize,
    pub idle_slope_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateEntryConfig {
    pub open: Vec<usize>,
    pub duration: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TasConfig {
    pub entries: Vec<GateEntryConfig>,
    #[serde(default)]
    pub base_time: SimTime,
    /// Generator whose frames should reach each gated port at the start of a cycle.
    /// When set, per-port base times are derived from that stream's arrival times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_to: Option<String>,
}

impl TasConfig {
    /// The 400 µs cycle: 60 µs reserved for queue 7, 340 µs for queues 0–6.
    pub fn protected_window() -> Self {
        TasConfig {
            entries: vec![
                GateEntryConfig {
                    open: vec![7],
                    duration: SimTime::from_micros(60),
                },
                GateEntryConfig {
                    open: (0..7).collect(),
                    duration: SimTime::from_micros(340),
                },
            ],
            base_time: SimTime::ZERO,
            align_to: None,
        }
    }

    pub fn gcl(&self, base_time: SimTime) -> Result<GateControlList> {
        let entries = self
            .entries
            .iter()
            .map(|e| GclEntry::new(&e.open, e.duration))
            .collect();
        GateControlList::new(base_time, entries)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ShaperConfig {
    pub mode: QueueMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cbs: Vec<CbsQueueConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tas: Option<TasConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub express_queues: Vec<usize>,
}

impl ShaperConfig {
    pub fn fifo() -> Self {
        ShaperConfig::default()
    }

    pub fn strict_priority() -> Self {
        ShaperConfig {
            mode: QueueMode::Priority,
            ..Default::default()
        }
    }

    /// Rejects combinations no scenario uses: shapers on a FIFO port, CBS together
    /// with TAS, and TAS together with preemption.
    pub fn validate(&self) -> Result<()> {
        if self.mode == QueueMode::Fifo
            && (!self.cbs.is_empty() || self.tas.is_some() || !self.express_queues.is_empty())
        {
            return Err(SimError::config("FIFO ports take no CBS, TAS or preemption settings"));
        }
        if !self.cbs.is_empty() && self.tas.is_some() {
            return Err(SimError::config("CBS and TAS cannot be combined on one port"));
        }
        if self.tas.is_some() && !self.express_queues.is_empty() {
            return Err(SimError::config("TAS and frame preemption cannot be combined on one port"));
        }
        let mut seen = [false; NUM_QUEUES];
        for c in &self.cbs {
            if c.queue >= NUM_QUEUES {
                return Err(SimError::config(format!("CBS queue {} out of range", c.queue)));
            }
            if std::mem::replace(&mut seen[c.queue], true) {
                return Err(SimError::config(format!("CBS queue {} configured twice", c.queue)));
            }
            cbs::cbs_slopes(c.idle_slope_fraction, 1)?;
        }
        if let Some(q) = self.express_queues.iter().find(|&&q| q >= NUM_QUEUES) {
            return Err(SimError::config(format!("express queue {q} out of range")));
        }
        if let Some(tas) = &self.tas {
            if let Some(q) = tas.entries.iter().flat_map(|e| &e.open).find(|&&q| q >= NUM_QUEUES) {
                return Err(SimError::config(format!("gate control entry opens queue {q}, out of range")));
            }
            tas.gcl(tas.base_time)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxSource {
    Queue(usize),
    /// Remainder of the held preempted frame.
    Resume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Transmit { source: TxSource, duration: SimTime },
    WaitUntil(SimTime),
    Idle,
}

/// Picks what an idle transmitter sends next. CBS credit must already be synced to `now`.
///
/// Express queues go first, then a held fragment, then the remaining queues from 7
/// down to 0. A queue qualifies when its head fits the open gate and its credit is
/// non-negative.
pub fn select_next(port: &EgressPort, now: SimTime) -> Selection {
    if port.mode == QueueMode::Fifo {
        return match port.queues[0].front() {
            Some(f) => Selection::Transmit {
                source: TxSource::Queue(0),
                duration: port.serialization(u64::from(f.size_bytes)),
            },
            None => Selection::Idle,
        };
    }

    let mut wake: Option<SimTime> = None;
    let try_queue = |q: usize, wake: &mut Option<SimTime>| -> Option<Selection> {
        let head = port.queues[q].front()?;
        let duration = port.serialization(u64::from(head.size_bytes));
        let mut ready_at = now;
        if let Some(gcl) = &port.gcl {
            // None: frame longer than any window of its queue, never sendable
            ready_at = ready_at.max(gcl.earliest_start(q, now, duration)?);
        }
        if let Some(c) = &port.cbs[q] {
            ready_at = ready_at.max(now + c.time_to_eligible());
        }
        if ready_at == now {
            Some(Selection::Transmit {
                source: TxSource::Queue(q),
                duration,
            })
        } else {
            *wake = Some(wake.map_or(ready_at, |w| w.min(ready_at)));
            None
        }
    };

    for q in (0..NUM_QUEUES).rev().filter(|&q| port.is_express(q)) {
        if let Some(s) = try_queue(q, &mut wake) {
            return s;
        }
    }
    if let Some(h) = &port.held {
        return Selection::Transmit {
            source: TxSource::Resume,
            duration: port.serialization(h.seg.segment_wire_bytes()),
        };
    }
    for q in (0..NUM_QUEUES).rev().filter(|&q| !port.is_express(q)) {
        if let Some(s) = try_queue(q, &mut wake) {
            return s;
        }
    }
    wake.map_or(Selection::Idle, Selection::WaitUntil)
}
