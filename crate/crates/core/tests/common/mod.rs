//! Independent oracles and scenario builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use factory_tsn::fabric::{HostSpec, LinkTier, TopologySpec};
use factory_tsn::frame::ApplicationId;
use factory_tsn::scenario::{expand_preset, Override, PresetId, ScenarioConfig};
use factory_tsn::shaping::cbs::{CbsPhase, CbsState};
use factory_tsn::shaping::tas::{GateControlList, GclEntry};
use factory_tsn::shaping::ShaperConfig;
use factory_tsn::sim::{run, Simulation, TxRecord};
use factory_tsn::traffic::{GeneratorSpec, TrafficSpec};
use factory_tsn::SimTime;

pub const MBPS_100: u64 = 100_000_000;
pub const GBPS_1: u64 = 1_000_000_000;

pub fn preset(p: PresetId, overrides: &[&str]) -> ScenarioConfig {
    let ovs: Vec<Override> = overrides.iter().map(|s| s.parse().unwrap()).collect();
    expand_preset(p, &ovs).unwrap()
}

pub fn flow(name: &str, app: ApplicationId, src: &str, dst: &str, size: u32, ia: SimTime) -> GeneratorSpec {
    GeneratorSpec {
        name: name.into(),
        app,
        sources: vec![src.into()],
        destinations: vec![dst.into()],
        size_bytes: size,
        interarrival: ia,
        start_at: SimTime::ZERO,
        stop_at: None,
        phase: Some(SimTime::ZERO),
        injection_delay: SimTime::ZERO,
    }
}

/// One switch `S`; every host hangs off it with its own link rate.
pub fn one_switch(
    name: &str,
    shaper: ShaperConfig,
    hosts: &[(&str, u64)],
    generators: Vec<GeneratorSpec>,
    horizon: SimTime,
) -> ScenarioConfig {
    let mut cfg = preset(PresetId::Basic, &[]);
    cfg.name = name.into();
    cfg.horizon = horizon;
    cfg.shaper = shaper;
    cfg.topology = TopologySpec {
        switches: vec!["S".into()],
        links: vec![],
        hosts: hosts
            .iter()
            .map(|&(h, rate)| HostSpec {
                name: h.into(),
                switch: "S".into(),
                rate_bps: rate,
                propagation: SimTime::ZERO,
                tier: LinkTier::Edge,
            })
            .collect(),
    };
    cfg.traffic = TrafficSpec {
        generators,
        controllers: vec![],
        reports: vec![],
    };
    cfg.validate().unwrap();
    cfg
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn outcome<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

// ---- CBS -------------------------------------------------------------------

fn phase_strategy() -> impl Strategy<Value = CbsPhase> {
    prop_oneof![
        Just(CbsPhase::Accumulating),
        Just(CbsPhase::Transmitting),
        Just(CbsPhase::IdleEmpty)
    ]
}

/// Credit after one phase, written directly from the slope rules in bits.
fn credit_oracle(c: f64, phase: CbsPhase, dt_ns: u64, idle: f64, send: f64) -> f64 {
    let dt = dt_ns as f64 / 1e9;
    match phase {
        CbsPhase::Accumulating => c + idle * dt,
        CbsPhase::Transmitting => c + send * dt,
        CbsPhase::IdleEmpty if c > 0.0 => 0.0,
        CbsPhase::IdleEmpty => (c + idle * dt).min(0.0),
    }
}

/// 1000 random phase sequences: the shaper's credit follows the piecewise-linear
/// trajectory at every breakpoint, is independent of how a phase is split into
/// updates, and the eligibility time is the exact zero crossing.
pub fn cbs_suite(cases: u32) -> Result<(), String> {
    let seq = prop::collection::vec((phase_strategy(), 0u64..400_000, 1u64..4), 1..40);
    let strat = (1u32..99, prop_oneof![Just(MBPS_100), Just(GBPS_1)], -20_000i64..20_000, seq);
    outcome(runner(cases).run(&strat, |(pct, rate, c0, seq)| {
        let fraction = f64::from(pct) / 100.0;
        let mut s = CbsState::new(fraction, rate).unwrap().with_credit_bits(c0);
        let idle = (fraction * rate as f64).round();
        let send = idle - rate as f64;
        let mut expect = c0 as f64;
        let mut t = 0u64;
        for (phase, dt, pieces) in seq {
            // split the phase into `pieces` updates
            for k in 1..=pieces {
                s.update(SimTime::from_nanos(t + dt * k / pieces), phase);
            }
            t += dt;
            expect = credit_oracle(expect, phase, dt, idle, send);
            prop_assert!(
                (s.credit_bits() - expect).abs() <= 1e-6 * expect.abs().max(1.0),
                "credit {} vs oracle {}",
                s.credit_bits(),
                expect
            );
            prop_assert_eq!(s.eligible(), s.credit_nanobits() >= 0);
        }
        let wait = s.time_to_eligible();
        let mut a = s.clone();
        a.update(SimTime::from_nanos(t) + wait, CbsPhase::Accumulating);
        prop_assert!(a.eligible());
        if wait > SimTime::ZERO {
            let mut b = s.clone();
            b.update(SimTime::from_nanos(t + wait.as_nanos() - 1), CbsPhase::Accumulating);
            prop_assert!(!b.eligible());
        }
        Ok(())
    }))
}

// ---- TAS -------------------------------------------------------------------

struct BruteGcl {
    base: i64,
    states: Vec<u8>,
}

impl BruteGcl {
    fn new(base: u64, entries: &[(u8, u64)]) -> Self {
        let mut states = Vec::new();
        for &(g, d) in entries {
            states.extend(std::iter::repeat_n(g, d as usize));
        }
        BruteGcl { base: base as i64, states }
    }

    fn state(&self, t: u64) -> u8 {
        let n = self.states.len() as i64;
        self.states[(t as i64 - self.base).rem_euclid(n) as usize]
    }

    fn open(&self, q: usize, t: u64) -> bool {
        self.state(t) & (1 << q) != 0
    }

    fn fits(&self, q: usize, s: u64, d: u64) -> bool {
        (s..s + d).all(|t| self.open(q, t))
    }
}

/// Gate state, guard band and next start agree with a nanosecond-by-nanosecond
/// scan of the cycle.
pub fn tas_suite(cases: u32) -> Result<(), String> {
    let entries = prop::collection::vec((any::<u8>(), 1u64..40), 1..5);
    let strat = (entries, 0u64..150, 0u64..400, 0usize..8, 1u64..60);
    outcome(runner(cases).run(&strat, |(entries, base, now, q, d)| {
        let gcl = GateControlList::new(
            SimTime::from_nanos(base),
            entries
                .iter()
                .map(|&(g, dur)| GclEntry {
                    gates: g,
                    duration: SimTime::from_nanos(dur),
                })
                .collect(),
        )
        .unwrap();
        let brute = BruteGcl::new(base, &entries);
        let cycle = brute.states.len() as u64;
        for t in now..now + 2 * cycle {
            prop_assert_eq!(gcl.gate_state(SimTime::from_nanos(t)), brute.state(t));
        }
        let at = SimTime::from_nanos(now);
        let tx = SimTime::from_nanos(d);
        prop_assert_eq!(gcl.can_start(q, at, tx), brute.fits(q, now, d));
        let start = (now..now + 3 * cycle + d).find(|&s| brute.fits(q, s, d));
        prop_assert_eq!(gcl.earliest_start(q, at, tx), start.map(SimTime::from_nanos));
        let always = (0..cycle).all(|t| brute.open(q, t));
        let close = if always || !brute.open(q, now) {
            None
        } else {
            (now..now + 2 * cycle).find(|&t| !brute.open(q, t))
        };
        prop_assert_eq!(gcl.next_close(q, at), close.map(SimTime::from_nanos));
        Ok(())
    }))
}

// ---- Frame preemption -------------------------------------------------------

/// Checks every segment the switch put on the wire toward `Sink`.
pub fn check_fragments(records: &[TxRecord], egress: usize, ingress: &BTreeMap<u64, SimTime>) -> Result<(), TestCaseError> {
    let mut by_frame: BTreeMap<u64, Vec<&TxRecord>> = BTreeMap::new();
    let mut last_end = SimTime::ZERO;
    for r in records.iter().filter(|r| r.port == egress) {
        prop_assert!(r.start >= last_end, "segments overlap on the wire");
        last_end = r.end;
        by_frame.entry(r.frame_id).or_default().push(r);
    }
    // worst case: a non-cuttable continuation, 24 B overhead + 127 B payload
    let max_wait = factory_tsn::frame::serialization_time(24 + 127, MBPS_100).unwrap();
    for (id, segs) in by_frame {
        // a frame cut just before the horizon still has its remainder held
        let complete = !segs.last().expect("non-empty").preempted;
        let mut payload = 0;
        for (i, s) in segs.iter().enumerate() {
            let last = i + 1 == segs.len();
            prop_assert_eq!(s.fragment as usize, i + 1);
            prop_assert!(s.wire_bytes >= 64, "fragment of {} B", s.wire_bytes);
            let overhead = if i > 0 { 24 } else { 0 } + if s.preempted { 4 } else { 0 };
            prop_assert_eq!(s.wire_bytes, s.payload_bytes + overhead);
            prop_assert!(s.preempted || last, "inner segment not marked as cut");
            payload += s.payload_bytes;
        }
        if !complete {
            prop_assert!(payload < segs[0].frame_bytes);
            continue;
        }
        prop_assert_eq!(payload, segs[0].frame_bytes, "frame {} reassembles", id);
        if segs[0].queue == 7 {
            prop_assert_eq!(segs.len(), 1, "express frame {} was cut", id);
            if let Some(&arrived) = ingress.get(&id) {
                prop_assert!(segs[0].start - arrived <= max_wait, "express frame {} waited too long", id);
            }
        }
    }
    Ok(())
}

/// Saturating preemptable traffic plus a random express stream through one
/// 100 Mbps egress port with express queue 7.
pub fn fp_storm_config(seed: u64, pre_size: u32, exp_size: u32, exp_ia_us: u64, horizon_ms: u64) -> ScenarioConfig {
    let shaper = ShaperConfig {
        express_queues: vec![7],
        ..ShaperConfig::strict_priority()
    };
    let mut bulk = flow("bulk", ApplicationId::Agv, "Bulk", "Sink", pre_size, SimTime::from_micros(15));
    bulk.phase = None;
    let mut exp = flow("express", ApplicationId::RemoteControl, "Ctl", "Sink", exp_size, SimTime::from_micros(exp_ia_us));
    exp.phase = None;
    let mut cfg = one_switch(
        "fp-storm",
        shaper,
        &[("Bulk", GBPS_1), ("Ctl", GBPS_1), ("Sink", MBPS_100)],
        vec![bulk, exp],
        SimTime::from_millis(horizon_ms),
    );
    cfg.seed = seed;
    cfg.queue_capacity = Some(200);
    cfg
}

pub fn fp_suite(cases: u32) -> Result<(), String> {
    let strat = (any::<u64>(), 64u32..=1522, 64u32..=600, 60u64..400);
    outcome(runner(cases).run(&strat, |(seed, pre, exp, ia)| {
        let cfg = fp_storm_config(seed, pre, exp, ia, 20);
        let mut sim = Simulation::new(&cfg).unwrap();
        sim.record_transmissions();
        sim.run_until(cfg.horizon).unwrap();
        let net = sim.network();
        let (s, sink, ctl) = (
            net.node_id("S").unwrap(),
            net.node_id("Sink").unwrap(),
            net.node_id("Ctl").unwrap(),
        );
        let egress = net.next_port(s, sink).unwrap();
        let ctl_port = net.host_port(ctl);
        let ingress: BTreeMap<u64, SimTime> = sim
            .transmissions()
            .iter()
            .filter(|r| r.port == ctl_port)
            .map(|r| (r.frame_id, r.end))
            .collect();
        check_fragments(sim.transmissions(), egress, &ingress)?;
        let preempted = sim.transmissions().iter().filter(|r| r.preempted).count();
        let result = sim.finish().unwrap();
        prop_assert!(result.conservation_ok);
        // with large bulk frames the storm must actually cut something
        if pre >= 600 {
            prop_assert!(preempted > 0);
        }
        Ok(())
    }))
}

// ---- Conservation -------------------------------------------------------------

pub fn conservation_holds(r: &factory_tsn::sim::RunResult) -> Result<(), String> {
    if !r.conservation_ok {
        return Err(format!("{}: conservation flag false", r.scenario));
    }
    for a in &r.apps {
        if a.frames_sent != a.frames_received + a.frames_dropped + a.frames_in_flight
            || a.bytes_sent != a.bytes_received + a.bytes_dropped + a.bytes_in_flight
        {
            return Err(format!("{}: {} does not balance", r.scenario, a.app));
        }
    }
    let app_drops: u64 = r.apps.iter().map(|a| a.frames_dropped).sum();
    let port_drops: u64 = r.ports.iter().map(|p| p.drops).sum();
    if app_drops != port_drops {
        return Err(format!("{}: {app_drops} app drops vs {port_drops} port drops", r.scenario));
    }
    Ok(())
}

pub fn conservation_suite(cases: u32) -> Result<(), String> {
    let strat = (0usize..PresetId::ALL.len(), any::<u64>(), 1u64..300);
    outcome(runner(cases).run(&strat, |(i, seed, ms)| {
        let p = PresetId::ALL[i];
        let cfg = preset(p, &[&format!("seed={seed}"), &format!("horizon={ms}ms")]);
        let r = run(&cfg).unwrap();
        conservation_holds(&r).map_err(TestCaseError::fail)
    }))
}
