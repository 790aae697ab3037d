//! 802.1Q-tagged frames, PCP/priority mapping and serialization arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::time::SimTime;

pub const MIN_FRAME_BYTES: u32 = 64;
pub const MAX_FRAME_BYTES: u32 = 1522;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ApplicationId {
    RemoteControl,
    Safety,
    #[serde(rename = "AR")]
    Ar,
    #[serde(rename = "AGV")]
    Agv,
    ConditionMonitoring,
    Update,
    ControlSignalActuators,
    ControlSignalVehicles,
}

impl ApplicationId {
    pub const ALL: [ApplicationId; 8] = [
        ApplicationId::RemoteControl,
        ApplicationId::Safety,
        ApplicationId::Ar,
        ApplicationId::Agv,
        ApplicationId::ConditionMonitoring,
        ApplicationId::Update,
        ApplicationId::ControlSignalActuators,
        ApplicationId::ControlSignalVehicles,
    ];

    /// The five applications whose requirements are judged.
    pub const MAIN: [ApplicationId; 5] = [
        ApplicationId::RemoteControl,
        ApplicationId::Safety,
        ApplicationId::Ar,
        ApplicationId::Agv,
        ApplicationId::ConditionMonitoring,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ApplicationId::RemoteControl => "RemoteControl",
            ApplicationId::Safety => "Safety",
            ApplicationId::Ar => "AR",
            ApplicationId::Agv => "AGV",
            ApplicationId::ConditionMonitoring => "ConditionMonitoring",
            ApplicationId::Update => "Update",
            ApplicationId::ControlSignalActuators => "ControlSignalActuators",
            ApplicationId::ControlSignalVehicles => "ControlSignalVehicles",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ApplicationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ApplicationId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        ApplicationId::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SimError::config(format!("unknown application {s:?}")))
    }
}

/// PCP assigned to each application.
///
/// Control signals issued by the local controllers ride in the remote-control class.
pub fn app_pcp(app: ApplicationId) -> u8 {
    match app {
        ApplicationId::RemoteControl => 7,
        ApplicationId::Safety => 6,
        ApplicationId::Ar => 5,
        ApplicationId::Agv => 4,
        ApplicationId::ConditionMonitoring => 3,
        ApplicationId::Update => 2,
        ApplicationId::ControlSignalActuators | ApplicationId::ControlSignalVehicles => 7,
    }
}

/// Queue index for a PCP. Identity except that PCP 0 (best effort) sits above
/// PCP 1 (background).
pub fn pcp_to_priority(pcp: u8) -> Result<usize> {
    match pcp {
        0 => Ok(1),
        1 => Ok(0),
        2..=7 => Ok(pcp as usize),
        _ => Err(SimError::config(format!("PCP {pcp} outside 0..=7"))),
    }
}

pub fn priority_to_pcp(priority: usize) -> Result<u8> {
    match priority {
        0 => Ok(1),
        1 => Ok(0),
        2..=7 => Ok(priority as u8),
        _ => Err(SimError::config(format!("priority {priority} outside 0..=7"))),
    }
}

/// `size_bytes * 8 / rate`, rounded up to the next nanosecond.
pub fn serialization_time(size_bytes: u64, link_rate_bps: u64) -> Result<SimTime> {
    if link_rate_bps == 0 {
        return Err(SimError::config("link rate must be positive"));
    }
    Ok(serialization_time_unchecked(size_bytes, link_rate_bps))
}

pub(crate) fn serialization_time_unchecked(size_bytes: u64, link_rate_bps: u64) -> SimTime {
    let bit_ns = u128::from(size_bytes) * 8 * 1_000_000_000;
    let rate = u128::from(link_rate_bps);
    SimTime::from_nanos(bit_ns.div_ceil(rate) as u64)
}

/// Whole bytes fully on the wire `elapsed` after a transmission started.
pub(crate) fn bytes_sent_after(elapsed: SimTime, link_rate_bps: u64) -> u64 {
    (u128::from(elapsed.as_nanos()) * u128::from(link_rate_bps) / 8_000_000_000) as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Frame {
    pub frame_id: u64,
    pub app: ApplicationId,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u32,
    pub pcp: u8,
    pub created_at: SimTime,
    /// Enqueue instant at each egress buffer visited, host buffer first.
    pub hops: Vec<SimTime>,
    pub delivered_at: Option<SimTime>,
}

impl Frame {
    pub fn new(
        frame_id: u64,
        app: ApplicationId,
        src: NodeId,
        dst: NodeId,
        size_bytes: u32,
        created_at: SimTime,
    ) -> Result<Frame> {
        if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&size_bytes) {
            return Err(SimError::config(format!(
                "frame size {size_bytes} B outside {MIN_FRAME_BYTES}..={MAX_FRAME_BYTES}"
            )));
        }
        Ok(Frame {
            frame_id,
            app,
            src,
            dst,
            size_bytes,
            pcp: app_pcp(app),
            created_at,
            hops: Vec::with_capacity(4),
            delivered_at: None,
        })
    }

    pub fn priority(&self) -> usize {
        // pcp is validated at construction
        pcp_to_priority(self.pcp).expect("valid pcp")
    }

    pub fn e2e_delay(&self) -> Option<SimTime> {
        self.delivered_at.map(|d| d - self.created_at)
    }
}
