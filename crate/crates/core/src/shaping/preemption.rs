//! Frame preemption bookkeeping for one preemptable frame.
//!
//! A frame goes on the wire as one or more segments. A segment that is cut
//! closes with a 4 B mCRC; every continuation segment carries 24 B of framing
//! overhead ahead of its payload.

use serde::Serialize;

/// Segment bytes that must be on the wire before a cut is allowed.
pub const MIN_SENT_BEFORE_CUT: u64 = 60;
/// Payload that must remain after a cut.
pub const MIN_REMAINDER: u64 = 64;
pub const CONTINUATION_OVERHEAD: u64 = 24;
pub const MCRC_BYTES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PreemptionState {
    pub frame_bytes: u64,
    /// Payload bytes carried by already-finished segments.
    pub payload_done: u64,
    /// Segments started so far (1 while the first segment is on the wire).
    pub fragment_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreemptDecision {
    Hold,
    /// Cut after `cut_wire_bytes` bytes of the current segment.
    Preempt { cut_wire_bytes: u64 },
}

impl PreemptionState {
    pub fn new(frame_bytes: u64) -> Self {
        PreemptionState {
            frame_bytes,
            payload_done: 0,
            fragment_count: 1,
        }
    }

    pub fn segment_overhead(&self) -> u64 {
        if self.fragment_count > 1 {
            CONTINUATION_OVERHEAD
        } else {
            0
        }
    }

    pub fn segment_payload(&self) -> u64 {
        self.frame_bytes - self.payload_done
    }

    /// Wire bytes of the current segment if it runs to completion.
    pub fn segment_wire_bytes(&self) -> u64 {
        self.segment_overhead() + self.segment_payload()
    }

    fn payload_sent(&self, wire_sent: u64) -> u64 {
        wire_sent
            .saturating_sub(self.segment_overhead())
            .min(self.segment_payload())
    }

    /// Earliest wire-byte count in the current segment at which a cut would be legal.
    pub fn earliest_cut(&self) -> Option<u64> {
        let at = MIN_SENT_BEFORE_CUT;
        (self.segment_payload().checked_sub(self.payload_sent(at))? >= MIN_REMAINDER).then_some(at)
    }

    /// Residual state after cutting the current segment at `cut_wire_bytes`.
    pub fn after_cut(&self, cut_wire_bytes: u64) -> PreemptionState {
        PreemptionState {
            frame_bytes: self.frame_bytes,
            payload_done: self.payload_done + self.payload_sent(cut_wire_bytes),
            fragment_count: self.fragment_count + 1,
        }
    }
}

/// Whether a preemptable segment with `wire_sent` bytes already on the wire may be cut now.
pub fn fp_preempt_check(active: &PreemptionState, wire_sent: u64) -> PreemptDecision {
    let remaining = active.segment_payload() - active.payload_sent(wire_sent);
    if wire_sent >= MIN_SENT_BEFORE_CUT && remaining >= MIN_REMAINDER {
        PreemptDecision::Preempt {
            cut_wire_bytes: wire_sent,
        }
    } else {
        PreemptDecision::Hold
    }
}
