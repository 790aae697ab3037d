//! Application traffic: periodic generators, condition-triggered controllers and
//! periodic reports.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::frame::{ApplicationId, MAX_FRAME_BYTES, MIN_FRAME_BYTES};
use crate::time::SimTime;

/// Constant-rate source. Every entry of `sources` is an independent replica with its
/// own phase; each replica cycles through `destinations` frame by frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub app: ApplicationId,
    pub sources: Vec<String>,
    pub destinations: Vec<String>,
    pub size_bytes: u32,
    pub interarrival: SimTime,
    #[serde(default)]
    pub start_at: SimTime,
    /// Defaults to the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_at: Option<SimTime>,
    /// Offset of the first frame after `start_at`; drawn uniformly from
    /// `[0, interarrival)` per replica when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<SimTime>,
    /// Delay between a frame's creation and its entry into the source's egress buffer.
    #[serde(default)]
    pub injection_delay: SimTime,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SimError::config(format!("generator {}: {m}", self.name)));
        if self.interarrival == SimTime::ZERO {
            return err("interarrival must be positive".into());
        }
        if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&self.size_bytes) {
            return err(format!("frame size {} B out of range", self.size_bytes));
        }
        if self.sources.is_empty() || self.destinations.is_empty() {
            return err("needs at least one source and one destination".into());
        }
        if let Some(p) = self.phase.filter(|&p| p >= self.interarrival) {
            return err(format!("phase {p} not below interarrival {}", self.interarrival));
        }
        Ok(())
    }

    /// Offered load of one replica.
    pub fn offered_bps(&self) -> f64 {
        f64::from(self.size_bytes) * 8.0 / self.interarrival.as_secs_f64()
    }

    /// Replica-wise rng stream name.
    pub fn replica_entity(&self, source: &str) -> String {
        format!("generator/{}/{}", self.name, source)
    }
}

/// Reacts to delivered trigger frames with a control frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub name: String,
    pub node: String,
    pub trigger: ApplicationId,
    pub probability: f64,
    pub app: ApplicationId,
    pub size_bytes: u32,
    /// Fixed recipient; by default the control frame goes back to the trigger's source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl ControllerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(SimError::config(format!(
                "controller {}: probability {} outside [0, 1]",
                self.name, self.probability
            )));
        }
        if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&self.size_bytes) {
            return Err(SimError::config(format!(
                "controller {}: frame size {} B out of range",
                self.name, self.size_bytes
            )));
        }
        Ok(())
    }
}

/// Periodic summary frame from a controller node to a storage node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub name: String,
    pub node: String,
    pub destination: String,
    pub app: ApplicationId,
    pub size_bytes: u32,
    pub period: SimTime,
    /// Skip a period in which the node received no frames of this app.
    #[serde(default)]
    pub require_input: bool,
}

impl ReportSpec {
    pub fn validate(&self) -> Result<()> {
        if self.period == SimTime::ZERO {
            return Err(SimError::config(format!("report {}: period must be positive", self.name)));
        }
        if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&self.size_bytes) {
            return Err(SimError::config(format!(
                "report {}: frame size {} B out of range",
                self.name, self.size_bytes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrafficSpec {
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub controllers: Vec<ControllerSpec>,
    #[serde(default)]
    pub reports: Vec<ReportSpec>,
}

impl TrafficSpec {
    pub fn generator(&self, name: &str) -> Option<&GeneratorSpec> {
        self.generators.iter().find(|g| g.name == name)
    }

    pub fn generator_mut(&mut self, name: &str) -> Option<&mut GeneratorSpec> {
        self.generators.iter_mut().find(|g| g.name == name)
    }

    /// Every node name referenced by the traffic.
    pub fn referenced_nodes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for g in &self.generators {
            out.extend(g.sources.iter().map(String::as_str));
            out.extend(g.destinations.iter().map(String::as_str));
        }
        for c in &self.controllers {
            out.push(&c.node);
            out.extend(c.target.as_deref());
        }
        for r in &self.reports {
            out.push(&r.node);
            out.push(&r.destination);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self
            .generators
            .iter()
            .map(|g| g.name.as_str())
            .chain(self.controllers.iter().map(|c| c.name.as_str()))
            .chain(self.reports.iter().map(|r| r.name.as_str()))
            .collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(SimError::config(format!("traffic entity {:?} defined twice", w[0])));
        }
        self.generators.iter().try_for_each(GeneratorSpec::validate)?;
        self.controllers.iter().try_for_each(ControllerSpec::validate)?;
        self.reports.iter().try_for_each(ReportSpec::validate)
    }
}

pub const CONDITION_SENSORS: usize = 20;

pub fn condition_sensor_names() -> Vec<String> {
    (1..=CONDITION_SENSORS).map(|i| format!("CS{i:02}")).collect()
}

/// Hosts of the default factory model.
pub fn default_hosts() -> Vec<String> {
    let mut hosts: Vec<String> = [
        "AR_Sender",
        "AR_Receiver",
        "robotcontroller",
        "RoboticArm",
        "Vehicle1",
        "Vehicle2",
        "Vehicles_control",
        "Actuators_control",
        "DataCenter",
        "SafetySensor",
        "SafetyMonitor",
        "UpdateUnit",
    ]
    .map(String::from)
    .to_vec();
    hosts.extend(condition_sensor_names());
    hosts
}

fn generator(
    name: &str,
    app: ApplicationId,
    sources: Vec<String>,
    destinations: Vec<String>,
    size_bytes: u32,
    interarrival: SimTime,
) -> GeneratorSpec {
    GeneratorSpec {
        name: name.into(),
        app,
        sources,
        destinations,
        size_bytes,
        interarrival,
        start_at: SimTime::ZERO,
        stop_at: None,
        phase: None,
        injection_delay: SimTime::ZERO,
    }
}

/// The factory's periodic sources. The AR stream starts at t = 0 so that it
/// occupies its path before any other flow arrives there.
pub fn default_traffic_table() -> Vec<GeneratorSpec> {
    let s = |n: &str| vec![n.to_string()];
    let mut ar = generator("ar", ApplicationId::Ar, s("AR_Sender"), s("AR_Receiver"), 1500, SimTime::from_micros(12));
    ar.phase = Some(SimTime::ZERO);
    let update_targets = default_hosts().into_iter().filter(|h| h != "UpdateUnit").collect();
    vec![
        ar,
        generator("ar_return", ApplicationId::Ar, s("AR_Receiver"), s("AR_Sender"), 1500, SimTime::from_millis(40)),
        generator(
            "condition_sensors",
            ApplicationId::ConditionMonitoring,
            condition_sensor_names(),
            s("Actuators_control"),
            500,
            SimTime::from_millis(100),
        ),
        generator("safety", ApplicationId::Safety, s("SafetySensor"), s("SafetyMonitor"), 500, SimTime::from_millis(100)),
        generator(
            "vehicles",
            ApplicationId::Agv,
            vec!["Vehicle1".into(), "Vehicle2".into()],
            s("Vehicles_control"),
            1500,
            SimTime::from_micros(500),
        ),
        generator(
            "robotcontroller",
            ApplicationId::RemoteControl,
            s("robotcontroller"),
            s("RoboticArm"),
            354,
            SimTime::from_micros(400),
        ),
        generator("update", ApplicationId::Update, s("UpdateUnit"), update_targets, 1500, SimTime::from_millis(10)),
    ]
}

pub fn default_traffic() -> TrafficSpec {
    TrafficSpec {
        generators: default_traffic_table(),
        controllers: vec![
            ControllerSpec {
                name: "actuators_control".into(),
                node: "Actuators_control".into(),
                trigger: ApplicationId::ConditionMonitoring,
                probability: 0.05,
                app: ApplicationId::ControlSignalActuators,
                size_bytes: 354,
                target: None,
            },
            ControllerSpec {
                name: "vehicles_control".into(),
                node: "Vehicles_control".into(),
                trigger: ApplicationId::Agv,
                probability: 0.05,
                app: ApplicationId::ControlSignalVehicles,
                size_bytes: 354,
                target: None,
            },
        ],
        reports: vec![ReportSpec {
            name: "datacenter_report".into(),
            node: "Actuators_control".into(),
            destination: "DataCenter".into(),
            app: ApplicationId::ConditionMonitoring,
            size_bytes: 500,
            period: SimTime::from_millis(100),
            require_input: true,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offered_loads() {
        let t = default_traffic_table();
        let g = |n: &str| t.iter().find(|g| g.name == n).unwrap();
        assert!((g("ar").offered_bps() - 1e9).abs() < 1.0);
        assert!((g("robotcontroller").offered_bps() - 7.08e6).abs() < 1.0);
        let cm = g("condition_sensors");
        assert!((cm.offered_bps() * cm.sources.len() as f64 - 0.8e6).abs() < 1.0);
        assert!((g("update").offered_bps() - 1.2e6).abs() < 1.0);
    }

    #[test]
    fn default_traffic_is_valid() {
        default_traffic().validate().unwrap();
        assert_eq!(condition_sensor_names().len(), 20);
    }

    #[test]
    fn rejects_bad_generator() {
        let mut g = default_traffic_table().remove(0);
        g.interarrival = SimTime::ZERO;
        assert!(g.validate().is_err());
        let mut g = default_traffic_table().remove(0);
        g.size_bytes = 40;
        assert!(g.validate().is_err());
    }
}
