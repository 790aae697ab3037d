//! Scenario configuration, built-in presets and overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compression::CompressionSpec;
use crate::error::{Result, SimError};
use crate::fabric::{HostSpec, LinkSpec, LinkTier, NodeKind, TopologySpec};
use crate::metrics::{DelayRule, Requirements};
use crate::shaping::{CbsQueueConfig, ShaperConfig, TasConfig};
use crate::time::SimTime;
use crate::traffic::{condition_sensor_names, default_traffic, TrafficSpec};

pub const MBPS_100: u64 = 100_000_000;
pub const GBPS_1: u64 = 1_000_000_000;
pub const DEFAULT_QUEUE_CAPACITY: usize = 7500;
pub const AR_QUEUE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub horizon: SimTime,
    /// Frames created this close to the horizon and still undelivered are left
    /// out of the RDR instead of counting as lost.
    #[serde(default)]
    pub drain: SimTime,
    /// Frames per switch egress queue; absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_capacity: Option<usize>,
    pub sample_interval: SimTime,
    /// Shaper of every switch egress port. Host buffers are always FIFO.
    pub shaper: ShaperConfig,
    pub topology: TopologySpec,
    pub traffic: TrafficSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression: Option<CompressionSpec>,
    #[serde(default)]
    pub requirements: Requirements,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::config(format!("invalid scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    /// Creation instant from which undelivered frames are excluded from the RDR.
    pub fn drain_start(&self) -> SimTime {
        self.horizon.saturating_sub(self.drain)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.queue_capacity == Some(0) {
            problems.push("queue capacity must be positive".into());
        }
        if self.sample_interval == SimTime::ZERO {
            problems.push("sample interval must be positive".into());
        }
        let hosts: BTreeMap<&str, &HostSpec> =
            self.topology.hosts.iter().map(|h| (h.name.as_str(), h)).collect();
        let mut missing: Vec<&str> = self
            .traffic
            .referenced_nodes()
            .into_iter()
            .filter(|n| !hosts.contains_key(n))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            problems.push(format!("traffic references unknown hosts: {}", missing.join(", ")));
        }
        for (what, r) in [
            ("shaper", self.shaper.validate()),
            ("traffic", self.traffic.validate()),
            ("requirements", self.requirements.validate()),
        ] {
            if let Err(e) = r {
                problems.push(format!("{what}: {e}"));
            }
        }
        if let Some(align) = self.shaper.tas.as_ref().and_then(|t| t.align_to.as_deref()) {
            if self.traffic.generator(align).is_none() {
                problems.push(format!("TAS aligned to unknown generator {align:?}"));
            }
        }
        if let Some(c) = &self.compression {
            if let Err(e) = c.validate() {
                problems.push(e.to_string());
            }
            if self.traffic.generator(&c.target).is_none() {
                problems.push(format!("compression targets unknown generator {:?}", c.target));
            }
        }
        match crate::fabric::build_topology(&self.topology) {
            Err(e) => problems.push(e.to_string()),
            Ok(net) => {
                for n in self.traffic.referenced_nodes() {
                    if net.node_id(n).is_some_and(|id| net.nodes[id].kind != NodeKind::Host) {
                        problems.push(format!("traffic endpoint {n:?} is a switch"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::config(problems.join("; ")))
        }
    }
}

/// Default factory: A–B is the core, C and D hang off B. AR_Sender attaches to A
/// through its own 1 Gbps access link.
pub fn default_topology(peripheral_rate_bps: u64) -> TopologySpec {
    let link = |a: &str, b: &str, rate_bps, tier| LinkSpec {
        a: a.into(),
        b: b.into(),
        rate_bps,
        propagation: SimTime::ZERO,
        tier,
    };
    let host = |name: &str, switch: &str| HostSpec {
        name: name.into(),
        switch: switch.into(),
        rate_bps: peripheral_rate_bps,
        propagation: SimTime::ZERO,
        tier: LinkTier::Peripheral,
    };
    let mut hosts = vec![
        HostSpec {
            rate_bps: GBPS_1,
            tier: LinkTier::Edge,
            ..host("AR_Sender", "A")
        },
        host("RoboticArm", "B"),
        host("UpdateUnit", "B"),
        host("robotcontroller", "C"),
        host("Vehicle1", "C"),
        host("Vehicle2", "C"),
    ];
    hosts.extend(condition_sensor_names().iter().map(|s| host(s, "C")));
    hosts.extend(
        [
            "AR_Receiver",
            "Vehicles_control",
            "Actuators_control",
            "DataCenter",
            "SafetySensor",
            "SafetyMonitor",
        ]
        .map(|n| host(n, "D")),
    );
    TopologySpec {
        switches: ["A", "B", "C", "D"].map(String::from).to_vec(),
        links: vec![
            link("A", "B", GBPS_1, LinkTier::Core),
            link("B", "C", peripheral_rate_bps, LinkTier::Peripheral),
            link("B", "D", peripheral_rate_bps, LinkTier::Peripheral),
        ],
        hosts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PresetId {
    Basic,
    TsnSp,
    TsnCbs,
    TsnTas,
    TsnFp,
    Upgrade,
    Enhanced,
}

impl PresetId {
    pub const ALL: [PresetId; 7] = [
        PresetId::Basic,
        PresetId::TsnSp,
        PresetId::TsnCbs,
        PresetId::TsnTas,
        PresetId::TsnFp,
        PresetId::Upgrade,
        PresetId::Enhanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetId::Basic => "basic",
            PresetId::TsnSp => "tsn-sp",
            PresetId::TsnCbs => "tsn-cbs",
            PresetId::TsnTas => "tsn-tas",
            PresetId::TsnFp => "tsn-fp",
            PresetId::Upgrade => "upgrade",
            PresetId::Enhanced => "enhanced",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PresetId::Basic => "FIFO everywhere, 100 Mbps peripheral links",
            PresetId::TsnSp => "strict priority on 8 queues",
            PresetId::TsnCbs => "strict priority + CBS (0.5) on the AR queue",
            PresetId::TsnTas => "strict priority + 400 us gate control list protecting queue 7",
            PresetId::TsnFp => "strict priority + preemption, express queues 6 and 7",
            PresetId::Upgrade => "tsn-fp with every link at 1 Gbps",
            PresetId::Enhanced => "CBS (0.5) + preemption + AR edge compression (22:1, or 2:1 at 1 Gbps)",
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PresetId::ALL.iter().map(|p| p.name()).collect();
                SimError::config(format!("unknown preset {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

fn express_67() -> Vec<usize> {
    vec![6, 7]
}

fn cbs_ar(fraction: f64) -> Vec<CbsQueueConfig> {
    vec![CbsQueueConfig {
        queue: AR_QUEUE,
        idle_slope_fraction: fraction,
    }]
}

fn base_config(name: &str, shaper: ShaperConfig) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        seed: 1,
        horizon: SimTime::from_secs(5),
        drain: SimTime::from_millis(50),
        queue_capacity: Some(DEFAULT_QUEUE_CAPACITY),
        sample_interval: SimTime::from_millis(50),
        shaper,
        topology: default_topology(MBPS_100),
        traffic: default_traffic(),
        compression: None,
        requirements: Requirements::default(),
    }
}

fn preset_config(preset: PresetId) -> ScenarioConfig {
    let sp = ShaperConfig::strict_priority;
    let name = preset.name();
    match preset {
        PresetId::Basic => base_config(name, ShaperConfig::fifo()),
        PresetId::TsnSp => base_config(name, sp()),
        PresetId::TsnCbs => base_config(
            name,
            ShaperConfig {
                cbs: cbs_ar(0.5),
                ..sp()
            },
        ),
        PresetId::TsnTas => base_config(
            name,
            ShaperConfig {
                tas: Some(TasConfig {
                    align_to: Some("robotcontroller".into()),
                    ..TasConfig::protected_window()
                }),
                ..sp()
            },
        ),
        PresetId::TsnFp => base_config(
            name,
            ShaperConfig {
                express_queues: express_67(),
                ..sp()
            },
        ),
        PresetId::Upgrade => {
            let mut c = preset_config(PresetId::TsnFp);
            c.name = name.into();
            c.topology.set_all_rates(GBPS_1);
            c
        }
        PresetId::Enhanced => {
            let mut c = base_config(
                name,
                ShaperConfig {
                    cbs: cbs_ar(0.5),
                    express_queues: express_67(),
                    ..sp()
                },
            );
            c.compression = Some(CompressionSpec::new("ar", 22.0));
            c
        }
    }
}

/// Parameters accepted by `--override key=value`.
pub const OVERRIDE_KEYS: [&str; 11] = [
    "seed",
    "horizon",
    "drain",
    "queue_capacity",
    "sample_interval",
    "cbs_fraction",
    "compression_ratio",
    "processing_ms_per_mp",
    "peripheral_rate_bps",
    "link_rate_bps",
    "delay_rule",
];

/// Parameters a sweep may vary.
pub const SWEEPABLE: [&str; 5] = [
    "cbs_fraction",
    "compression_ratio",
    "peripheral_rate_bps",
    "link_rate_bps",
    "queue_capacity",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub key: String,
    pub value: String,
}

impl FromStr for Override {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| SimError::config(format!("override {s:?} is not key=value")))?;
        let key = k.trim().replace('-', "_");
        if !OVERRIDE_KEYS.contains(&key.as_str()) {
            return Err(SimError::config(format!(
                "unknown override {key:?}; expected one of {}",
                OVERRIDE_KEYS.join(", ")
            )));
        }
        Ok(Override {
            key,
            value: v.trim().to_string(),
        })
    }
}

impl fmt::Display for Override {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.value)
    }
}

/// Accepts `100000000`, `100M`, `1G`, `1e9`.
pub fn parse_rate(s: &str) -> Result<u64> {
    let bad = || SimError::config(format!("invalid rate {s:?}"));
    let (num, scale) = match s.trim().char_indices().last() {
        Some((i, 'k' | 'K')) => (&s[..i], 1e3),
        Some((i, 'M')) => (&s[..i], 1e6),
        Some((i, 'G')) => (&s[..i], 1e9),
        _ => (s, 1.0),
    };
    let v: f64 = num.trim().parse().map_err(|_| bad())?;
    let r = (v * scale).round();
    if !(r >= 1.0 && r < u64::MAX as f64) {
        return Err(bad());
    }
    Ok(r as u64)
}

fn parse<T: FromStr>(o: &Override) -> Result<T> {
    o.value
        .parse()
        .map_err(|_| SimError::config(format!("invalid value for {}: {:?}", o.key, o.value)))
}

/// Applies one override in place.
pub fn apply_override(cfg: &mut ScenarioConfig, o: &Override) -> Result<()> {
    match o.key.as_str() {
        "seed" => cfg.seed = parse(o)?,
        "horizon" => cfg.horizon = o.value.parse()?,
        "drain" => cfg.drain = o.value.parse()?,
        "sample_interval" => cfg.sample_interval = o.value.parse()?,
        "queue_capacity" => {
            cfg.queue_capacity = match o.value.as_str() {
                "none" | "unbounded" => None,
                _ => Some(parse(o)?),
            }
        }
        "cbs_fraction" => {
            if cfg.shaper.cbs.is_empty() {
                return Err(SimError::config(format!(
                    "cbs_fraction override on {:?}, which has no CBS queue",
                    cfg.name
                )));
            }
            let f: f64 = parse(o)?;
            crate::shaping::cbs::cbs_slopes(f, 1)?;
            cfg.shaper.cbs.iter_mut().for_each(|c| c.idle_slope_fraction = f);
        }
        "compression_ratio" | "processing_ms_per_mp" => {
            let Some(c) = cfg.compression.as_mut() else {
                return Err(SimError::config(format!(
                    "{} override on {:?}, which has no compression",
                    o.key, cfg.name
                )));
            };
            let v: f64 = parse(o)?;
            if o.key == "compression_ratio" {
                c.ratio = v;
            } else {
                c.processing_ms_per_mp = v;
            }
        }
        "peripheral_rate_bps" => cfg.topology.set_tier_rate(LinkTier::Peripheral, parse_rate(&o.value)?),
        "link_rate_bps" => cfg.topology.set_all_rates(parse_rate(&o.value)?),
        "delay_rule" => {
            cfg.requirements.delay_rule = match o.value.as_str() {
                "max" => DelayRule::Max,
                "mean" => DelayRule::Mean,
                _ => return Err(SimError::config(format!("delay_rule must be max or mean, got {:?}", o.value))),
            }
        }
        other => return Err(SimError::config(format!("unknown override {other:?}"))),
    }
    Ok(())
}

fn check_contradictions(overrides: &[Override]) -> Result<()> {
    let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
    for o in overrides {
        if let Some(prev) = seen.insert(&o.key, &o.value) {
            if prev != o.value {
                return Err(SimError::config(format!(
                    "contradictory overrides {}={prev} and {}={}",
                    o.key, o.key, o.value
                )));
            }
        }
    }
    Ok(())
}

/// Expands a preset and applies overrides. The enhanced preset picks its
/// compression ratio from the peripheral rate (22:1 below 1 Gbps, 2:1 otherwise)
/// unless the ratio is overridden.
pub fn expand_preset(preset: PresetId, overrides: &[Override]) -> Result<ScenarioConfig> {
    check_contradictions(overrides)?;
    let mut cfg = preset_config(preset);
    for o in overrides {
        apply_override(&mut cfg, o)?;
    }
    if preset == PresetId::Enhanced && !overrides.iter().any(|o| o.key == "compression_ratio") {
        let peripheral = cfg
            .topology
            .links
            .iter()
            .find(|l| l.tier == LinkTier::Peripheral)
            .map_or(MBPS_100, |l| l.rate_bps);
        if let Some(c) = cfg.compression.as_mut() {
            c.ratio = if peripheral >= GBPS_1 { 2.0 } else { 22.0 };
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Applies overrides to an already loaded configuration.
pub fn with_overrides(mut cfg: ScenarioConfig, overrides: &[Override]) -> Result<ScenarioConfig> {
    check_contradictions(overrides)?;
    for o in overrides {
        apply_override(&mut cfg, o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
