//! Time-aware shaper gate control lists.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GclEntry {
    /// Bit `q` set means the gate of queue `q` is open.
    pub gates: u8,
    pub duration: SimTime,
}

impl GclEntry {
    pub fn new(open_queues: &[usize], duration: SimTime) -> Self {
        let gates = open_queues.iter().fold(0u8, |m, &q| m | (1 << q));
        GclEntry { gates, duration }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GateControlList {
    base_time: SimTime,
    cycle_time: SimTime,
    entries: Vec<GclEntry>,
    /// Open intervals per queue as `[start, end)` offsets into the cycle; a run
    /// that wraps past the cycle end has `end > cycle_time`.
    windows: [Vec<(u64, u64)>; 8],
}

impl GateControlList {
    pub fn new(base_time: SimTime, entries: Vec<GclEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SimError::config("gate control list is empty"));
        }
        if let Some(e) = entries.iter().find(|e| e.duration == SimTime::ZERO) {
            return Err(SimError::config(format!(
                "gate control entry {:#010b} has zero duration",
                e.gates
            )));
        }
        let cycle: u64 = entries.iter().map(|e| e.duration.as_nanos()).sum();
        let windows = std::array::from_fn(|q| open_windows(&entries, q, cycle));
        Ok(GateControlList {
            base_time,
            cycle_time: SimTime::from_nanos(cycle),
            entries,
            windows,
        })
    }

    pub fn base_time(&self) -> SimTime {
        self.base_time
    }

    pub fn cycle_time(&self) -> SimTime {
        self.cycle_time
    }

    pub fn entries(&self) -> &[GclEntry] {
        &self.entries
    }

    fn offset(&self, now: SimTime) -> u64 {
        let rel = i128::from(now.as_nanos()) - i128::from(self.base_time.as_nanos());
        rel.rem_euclid(i128::from(self.cycle_time.as_nanos())) as u64
    }

    /// Gate bitmask of the entry active at `now`.
    pub fn gate_state(&self, now: SimTime) -> u8 {
        let mut off = self.offset(now);
        for e in &self.entries {
            let d = e.duration.as_nanos();
            if off < d {
                return e.gates;
            }
            off -= d;
        }
        unreachable!("offset is below the cycle time")
    }

    pub fn is_open(&self, queue: usize, now: SimTime) -> bool {
        self.gate_state(now) & (1 << queue) != 0
    }

    fn always_open(&self, queue: usize) -> bool {
        self.entries.iter().all(|e| e.gates & (1 << queue) != 0)
    }

    /// Absolute open windows of `queue` that end after `now`, in start order,
    /// covering at least the next full cycle.
    fn windows_after(&self, queue: usize, now: SimTime) -> Vec<(SimTime, SimTime)> {
        let cycle = i128::from(self.cycle_time.as_nanos());
        let rel = i128::from(now.as_nanos()) - i128::from(self.base_time.as_nanos());
        let k = rel.div_euclid(cycle);
        let base = i128::from(self.base_time.as_nanos());
        let mut out = Vec::new();
        for c in (k - 1)..=(k + 2) {
            for &(s, e) in &self.windows[queue] {
                let start = base + c * cycle + i128::from(s);
                let end = base + c * cycle + i128::from(e);
                if end > i128::from(now.as_nanos()) && end > 0 {
                    out.push((
                        SimTime::from_nanos(start.max(0) as u64),
                        SimTime::from_nanos(end as u64),
                    ));
                }
            }
        }
        out.sort();
        out
    }

    /// Instant at which the currently open gate of `queue` closes; `None` if it never does.
    pub fn next_close(&self, queue: usize, now: SimTime) -> Option<SimTime> {
        if self.always_open(queue) {
            return None;
        }
        self.windows_after(queue, now)
            .into_iter()
            .find(|&(s, e)| s <= now && now < e)
            .map(|(_, e)| e)
    }

    /// Length-aware guard band: the frame may start only if it finishes before the gate closes.
    pub fn can_start(&self, queue: usize, now: SimTime, tx_duration: SimTime) -> bool {
        if !self.is_open(queue, now) {
            return false;
        }
        match self.next_close(queue, now) {
            None => true,
            Some(close) => now + tx_duration <= close,
        }
    }

    /// Earliest instant `>= now` at which a frame of `tx_duration` may start on `queue`.
    pub fn earliest_start(&self, queue: usize, now: SimTime, tx_duration: SimTime) -> Option<SimTime> {
        if self.always_open(queue) {
            return Some(now);
        }
        self.windows_after(queue, now).into_iter().find_map(|(s, e)| {
            let start = s.max(now);
            (start + tx_duration <= e).then_some(start)
        })
    }
}

fn open_windows(entries: &[GclEntry], queue: usize, cycle: u64) -> Vec<(u64, u64)> {
    let mut runs: Vec<(u64, u64)> = Vec::new();
    let mut t = 0;
    for e in entries {
        let d = e.duration.as_nanos();
        if e.gates & (1 << queue) != 0 {
            match runs.last_mut() {
                Some(last) if last.1 == t => last.1 = t + d,
                _ => runs.push((t, t + d)),
            }
        }
        t += d;
    }
    if runs.len() > 1 && runs[0].0 == 0 && runs.last().is_some_and(|r| r.1 == cycle) {
        let first = runs.remove(0);
        runs.last_mut().expect("non-empty").1 = cycle + first.1;
    }
    runs
}
