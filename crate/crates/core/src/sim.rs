//! The simulation world: traffic sources, switches and sinks driven by the event loop.
//!
//! Two ordering rules matter when events coincide. A generator schedules its next
//! tick before emitting the current frame, and a port that finishes a frame picks
//! its next frame before handing the finished one to the next hop. Together they
//! keep a stream whose rate equals the link rate back-to-back on every hop.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::compression::apply_compression;
use crate::engine::{entity_rng, Event, Handler, Scheduler};
use crate::error::{Result, SimError};
use crate::fabric::{
    build_topology, ActiveTx, EnqueueOutcome, HeldFragment, Network, NodeKind, PortId,
    Transmitter,
};
use crate::frame::{bytes_sent_after, serialization_time_unchecked, ApplicationId, Frame, NodeId};
use crate::metrics::{requirements_matrix, AppStats, AppSummary, RequirementRow};
use crate::scenario::ScenarioConfig;
use crate::shaping::preemption::{fp_preempt_check, PreemptDecision, PreemptionState, MCRC_BYTES};
use crate::shaping::{select_next, Selection, ShaperConfig, TxSource};
use crate::time::SimTime;
use crate::traffic::{ControllerSpec, GeneratorSpec, ReportSpec};

#[derive(Debug)]
pub enum Ev {
    GenTick { gen: usize, replica: usize },
    Inject(Box<Frame>),
    TxComplete { port: PortId, epoch: u64 },
    Arrival { node: NodeId, frame: Box<Frame> },
    Recheck { port: PortId },
    PreemptCut { port: PortId, epoch: u64 },
    Sample,
    ReportTick { report: usize },
}

impl Ev {
    fn describe(&self) -> String {
        match self {
            Ev::GenTick { gen, replica } => format!("generator tick {gen}/{replica}"),
            Ev::Inject(f) => format!("injection of frame {}", f.frame_id),
            Ev::TxComplete { port, .. } => format!("transmission complete on port {port}"),
            Ev::Arrival { node, frame } => format!("arrival of frame {} at node {node}", frame.frame_id),
            Ev::Recheck { port } => format!("recheck of port {port}"),
            Ev::PreemptCut { port, .. } => format!("preemption cut on port {port}"),
            Ev::Sample => "sample".into(),
            Ev::ReportTick { report } => format!("report tick {report}"),
        }
    }
}

/// One segment put on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxRecord {
    pub port: PortId,
    pub queue: usize,
    pub frame_id: u64,
    pub frame_bytes: u64,
    pub start: SimTime,
    pub end: SimTime,
    pub wire_bytes: u64,
    /// Payload bytes of the original frame carried by this segment.
    pub payload_bytes: u64,
    pub fragment: u32,
    pub preempted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortSample {
    pub time: SimTime,
    pub port: String,
    pub occupancy: usize,
    pub drops: u64,
    pub frames_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortSummary {
    pub port: String,
    pub rate_bps: u64,
    pub frames_sent: u64,
    pub wire_bytes_sent: u64,
    pub drops: u64,
    pub preemptions: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub horizon: SimTime,
    pub apps: Vec<AppSummary>,
    pub requirements: Vec<RequirementRow>,
    pub ports: Vec<PortSummary>,
    pub samples: Vec<PortSample>,
    pub events_executed: u64,
    pub trace_digest: u64,
    /// sent = received + dropped + in flight for every application.
    pub conservation_ok: bool,
    pub ar_processing_delay_ms: Option<f64>,
}

impl RunResult {
    pub fn app(&self, app: ApplicationId) -> &AppSummary {
        &self.apps[app.index()]
    }

    pub fn requirements_met(&self) -> bool {
        self.requirements.iter().all(RequirementRow::passed)
    }
}

struct GenRt {
    spec: GeneratorSpec,
    srcs: Vec<NodeId>,
    dsts: Vec<NodeId>,
    phases: Vec<SimTime>,
    next_dst: Vec<usize>,
    stop: SimTime,
}

struct CtrlRt {
    spec: ControllerSpec,
    node: NodeId,
    target: Option<NodeId>,
    rng: ChaCha8Rng,
}

struct ReportRt {
    spec: ReportSpec,
    node: NodeId,
    dst: NodeId,
    received: u64,
}

pub struct World {
    pub net: Network,
    gens: Vec<GenRt>,
    controllers: Vec<CtrlRt>,
    ctrl_by_node: BTreeMap<NodeId, Vec<usize>>,
    reports: Vec<ReportRt>,
    stats: Vec<AppStats>,
    next_frame_id: u64,
    stop: SimTime,
    sample_interval: SimTime,
    samples: Vec<PortSample>,
    switch_ports: Vec<PortId>,
    trace: Option<Vec<TxRecord>>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    sched: Scheduler<Ev>,
    world: World,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let mut net = build_topology(&cfg.topology)?;
        let id = |net: &Network, n: &str| net.node_id(n).expect("validated");
        let stop = cfg.horizon;

        let mut gens = Vec::new();
        for g in &cfg.traffic.generators {
            let spec = match &cfg.compression {
                Some(c) if c.enabled && c.target == g.name => apply_compression(g, c)?,
                _ => g.clone(),
            };
            let phases = spec
                .sources
                .iter()
                .map(|s| {
                    spec.phase.unwrap_or_else(|| {
                        let mut rng = entity_rng(cfg.seed, &spec.replica_entity(s));
                        SimTime::from_nanos(rng.random_range(0..spec.interarrival.as_nanos()))
                    })
                })
                .collect();
            gens.push(GenRt {
                srcs: spec.sources.iter().map(|s| id(&net, s)).collect(),
                dsts: spec.destinations.iter().map(|s| id(&net, s)).collect(),
                next_dst: vec![0; spec.sources.len()],
                phases,
                stop: spec.stop_at.unwrap_or(stop).min(stop),
                spec,
            });
        }

        let controllers: Vec<CtrlRt> = cfg
            .traffic
            .controllers
            .iter()
            .map(|c| CtrlRt {
                node: id(&net, &c.node),
                target: c.target.as_deref().map(|t| id(&net, t)),
                rng: entity_rng(cfg.seed, &format!("controller/{}", c.name)),
                spec: c.clone(),
            })
            .collect();
        let mut ctrl_by_node: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (i, c) in controllers.iter().enumerate() {
            ctrl_by_node.entry(c.node).or_default().push(i);
        }
        let reports = cfg
            .traffic
            .reports
            .iter()
            .map(|r| ReportRt {
                node: id(&net, &r.node),
                dst: id(&net, &r.destination),
                received: 0,
                spec: r.clone(),
            })
            .collect();

        install_shapers(&cfg, &mut net, &gens)?;
        let switch_ports = net
            .ports
            .iter()
            .filter(|p| net.nodes[p.owner].kind == NodeKind::Switch)
            .map(|p| p.id)
            .collect();

        let mut sched = Scheduler::new();
        for (gi, g) in gens.iter().enumerate() {
            for (r, &phase) in g.phases.iter().enumerate() {
                let first = g.spec.start_at + phase;
                if first < g.stop {
                    sched.schedule(first, Ev::GenTick { gen: gi, replica: r })?;
                }
            }
        }
        if stop > SimTime::ZERO {
            for i in 0..cfg.traffic.reports.len() {
                sched.schedule(SimTime::ZERO, Ev::ReportTick { report: i })?;
            }
        }
        if cfg.sample_interval <= cfg.horizon {
            sched.schedule(cfg.sample_interval, Ev::Sample)?;
        }

        Ok(Simulation {
            world: World {
                net,
                gens,
                controllers,
                ctrl_by_node,
                reports,
                stats: ApplicationId::ALL.iter().map(|&a| AppStats::new(a)).collect(),
                next_frame_id: 0,
                stop,
                sample_interval: cfg.sample_interval,
                samples: Vec::new(),
                switch_ports,
                trace: None,
            },
            sched,
            cfg,
        })
    }

    /// Keeps a record of every transmitted segment.
    pub fn record_transmissions(&mut self) {
        self.world.trace.get_or_insert_with(Vec::new);
    }

    pub fn transmissions(&self) -> &[TxRecord] {
        self.world.trace.as_deref().unwrap_or(&[])
    }

    pub fn network(&self) -> &Network {
        &self.world.net
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn run_until(&mut self, t: SimTime) -> Result<u64> {
        let t = t.min(self.cfg.horizon);
        if t < self.sched.now() {
            return Ok(0);
        }
        self.sched.run_until(t, &mut self.world)
    }

    /// Runs to the horizon and collects results.
    pub fn finish(mut self) -> Result<RunResult> {
        self.run_until(self.cfg.horizon)?;
        let Simulation { cfg, sched, mut world } = self;

        let mut in_flight: Vec<&Frame> = Vec::new();
        for p in &world.net.ports {
            in_flight.extend(p.queues.iter().flatten());
            if let Transmitter::Busy(a) = &p.tx {
                in_flight.push(&a.frame);
            }
            in_flight.extend(p.held.as_ref().map(|h| &h.frame));
        }
        for ev in sched.pending_payloads() {
            match ev {
                Ev::Inject(f) | Ev::Arrival { frame: f, .. } => in_flight.push(f),
                _ => {}
            }
        }
        let drain_start = cfg.drain_start();
        for f in in_flight {
            world.stats[f.app.index()].record_in_flight(u64::from(f.size_bytes), f.created_at >= drain_start);
        }
        let conservation_ok = world.stats.iter().all(|s| {
            s.frames_sent == s.frames_received + s.frames_dropped + s.frames_in_flight
                && s.bytes_sent == s.bytes_received + s.bytes_dropped + s.bytes_in_flight
        });

        let apps: Vec<AppSummary> = world.stats.iter().map(AppStats::summary).collect();
        let requirements = requirements_matrix(&apps, &cfg.requirements);
        let horizon_ns = cfg.horizon.as_nanos().max(1) as f64;
        let ports = world
            .switch_ports
            .iter()
            .map(|&p| {
                let p = &world.net.ports[p];
                PortSummary {
                    port: p.name.clone(),
                    rate_bps: p.rate_bps,
                    frames_sent: p.counters.frames_sent,
                    wire_bytes_sent: p.counters.wire_bytes_sent,
                    drops: p.counters.drops.iter().sum(),
                    preemptions: p.counters.preemptions,
                    utilization: p.counters.busy_ns.iter().sum::<u64>() as f64 / horizon_ns,
                }
            })
            .collect();
        let ar_processing_delay_ms = cfg
            .compression
            .as_ref()
            .filter(|c| c.enabled)
            .map(|c| c.processing_delay().as_millis_f64());
        Ok(RunResult {
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            horizon: cfg.horizon,
            apps,
            requirements,
            ports,
            samples: world.samples,
            events_executed: sched.executed_total(),
            trace_digest: sched.trace_digest(),
            conservation_ok,
            ar_processing_delay_ms,
        })
    }
}

/// Builds, runs to the horizon and summarizes one scenario.
pub fn run(cfg: &ScenarioConfig) -> Result<RunResult> {
    Simulation::new(cfg)?.finish()
}

fn install_shapers(cfg: &ScenarioConfig, net: &mut Network, gens: &[GenRt]) -> Result<()> {
    let shaper = &cfg.shaper;
    let plain = ShaperConfig {
        tas: None,
        ..shaper.clone()
    };
    // port -> gate control list base time
    let mut gated: BTreeMap<PortId, SimTime> = BTreeMap::new();
    if let Some(tas) = &shaper.tas {
        match &tas.align_to {
            Some(name) => {
                let g = gens
                    .iter()
                    .find(|g| g.spec.name == *name)
                    .ok_or_else(|| SimError::config(format!("TAS aligned to unknown generator {name:?}")))?;
                let path = net
                    .path(g.srcs[0], g.dsts[0])
                    .ok_or_else(|| SimError::config(format!("generator {name} has no route")))?;
                let cycle = tas.gcl(SimTime::ZERO)?.cycle_time().as_nanos();
                let mut t = g.spec.start_at + g.phases[0] + g.spec.injection_delay;
                for p in path {
                    let port = &net.ports[p];
                    if net.nodes[port.owner].kind == NodeKind::Switch {
                        gated.insert(p, SimTime::from_nanos(t.as_nanos() % cycle));
                    }
                    t = t + port.serialization(u64::from(g.spec.size_bytes)) + port.propagation;
                }
            }
            None => {
                for p in &net.ports {
                    if net.nodes[p.owner].kind == NodeKind::Switch {
                        gated.insert(p.id, tas.base_time);
                    }
                }
            }
        }
    }
    for p in 0..net.ports.len() {
        let owner = net.ports[p].owner;
        if net.nodes[owner].kind == NodeKind::Host {
            net.ports[p].configure(&ShaperConfig::fifo(), None, None)?;
            continue;
        }
        let gcl = match (gated.get(&p), &shaper.tas) {
            (Some(&base), Some(tas)) => Some(tas.gcl(base)?),
            _ => None,
        };
        net.ports[p].configure(&plain, cfg.queue_capacity, gcl)?;
    }
    Ok(())
}

impl Handler<Ev> for World {
    fn handle(&mut self, sched: &mut Scheduler<Ev>, event: Event<Ev>) -> Result<()> {
        let now = event.fire_at;
        let what = event.payload.describe();
        self.dispatch(sched, now, event.payload).map_err(|e| match e {
            e @ SimError::Runtime { .. } => e,
            other => SimError::Runtime {
                at: now,
                event: what,
                message: other.to_string(),
            },
        })
    }
}

impl World {
    fn dispatch(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, ev: Ev) -> Result<()> {
        match ev {
            Ev::GenTick { gen, replica } => self.generator_tick(sched, now, gen, replica),
            Ev::Inject(frame) => self.inject(sched, now, *frame),
            Ev::TxComplete { port, epoch } => self.tx_complete(sched, now, port, epoch),
            Ev::Arrival { node, frame } => self.arrive(sched, now, node, *frame),
            Ev::Recheck { port } => {
                if self.net.ports[port].recheck_at == Some(now) {
                    self.net.ports[port].recheck_at = None;
                    self.try_start(sched, now, port)?;
                }
                Ok(())
            }
            Ev::PreemptCut { port, epoch } => {
                if self.net.ports[port].epoch == epoch {
                    self.cut_active(sched, now, port)?;
                }
                Ok(())
            }
            Ev::Sample => {
                for &p in &self.switch_ports {
                    let port = &self.net.ports[p];
                    self.samples.push(PortSample {
                        time: now,
                        port: port.name.clone(),
                        occupancy: port.occupancy(),
                        drops: port.counters.drops.iter().sum(),
                        frames_sent: port.counters.frames_sent,
                    });
                }
                if let Some(next) = now.checked_add(self.sample_interval) {
                    sched.schedule(next, Ev::Sample)?;
                }
                Ok(())
            }
            Ev::ReportTick { report } => self.report_tick(sched, now, report),
        }
    }

    fn new_frame(&mut self, app: ApplicationId, src: NodeId, dst: NodeId, size: u32, now: SimTime) -> Result<Frame> {
        let f = Frame::new(self.next_frame_id, app, src, dst, size, now)?;
        self.next_frame_id += 1;
        self.stats[app.index()].record_sent(u64::from(size));
        Ok(f)
    }

    fn generator_tick(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, gen: usize, replica: usize) -> Result<()> {
        let g = &mut self.gens[gen];
        if let Some(next) = now.checked_add(g.spec.interarrival).filter(|&t| t < g.stop) {
            sched.schedule(next, Ev::GenTick { gen, replica })?;
        }
        let src = g.srcs[replica];
        let dst = g.dsts[g.next_dst[replica]];
        g.next_dst[replica] = (g.next_dst[replica] + 1) % g.dsts.len();
        let (app, size, delay) = (g.spec.app, g.spec.size_bytes, g.spec.injection_delay);
        let frame = self.new_frame(app, src, dst, size, now)?;
        if delay == SimTime::ZERO {
            self.inject(sched, now, frame)
        } else {
            sched.schedule(now + delay, Ev::Inject(Box::new(frame)))?;
            Ok(())
        }
    }

    fn report_tick(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, report: usize) -> Result<()> {
        let r = &mut self.reports[report];
        if let Some(next) = now.checked_add(r.spec.period).filter(|&t| t < self.stop) {
            sched.schedule(next, Ev::ReportTick { report })?;
        }
        let emit = !r.spec.require_input || r.received > 0;
        r.received = 0;
        if emit && now < self.stop {
            let (app, node, dst, size) = (r.spec.app, r.node, r.dst, r.spec.size_bytes);
            let frame = self.new_frame(app, node, dst, size, now)?;
            self.inject(sched, now, frame)?;
        }
        Ok(())
    }

    fn inject(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, frame: Frame) -> Result<()> {
        let port = self.net.host_port(frame.src);
        self.enqueue(sched, now, port, frame)
    }

    fn arrive(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, node: NodeId, frame: Frame) -> Result<()> {
        if node == frame.dst {
            return self.deliver(sched, now, node, frame);
        }
        let port = self.net.next_port(node, frame.dst).ok_or_else(|| {
            SimError::domain(format!(
                "no route from {} to {}",
                self.net.node_name(node),
                self.net.node_name(frame.dst)
            ))
        })?;
        self.enqueue(sched, now, port, frame)
    }

    fn enqueue(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, p: PortId, frame: Frame) -> Result<()> {
        let port = &mut self.net.ports[p];
        port.sync_cbs(now);
        let express = port.is_express(port.queue_index(&frame));
        let (app, bytes) = (frame.app, u64::from(frame.size_bytes));
        if port.enqueue(frame, now) == EnqueueOutcome::Dropped {
            self.stats[app.index()].record_dropped(bytes);
            return Ok(());
        }
        if port.is_idle() {
            self.try_start(sched, now, p)
        } else if express {
            self.consider_preemption(sched, now, p)
        } else {
            Ok(())
        }
    }

    fn deliver(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, node: NodeId, mut frame: Frame) -> Result<()> {
        frame.delivered_at = Some(now);
        let injected = frame.hops.first().copied().unwrap_or(frame.created_at);
        self.stats[frame.app.index()].record_received(
            u64::from(frame.size_bytes),
            now - frame.created_at,
            now - injected,
        );
        for r in self.reports.iter_mut().filter(|r| r.node == node && r.spec.app == frame.app) {
            r.received += 1;
        }
        let Some(ids) = self.ctrl_by_node.get(&node) else {
            return Ok(());
        };
        let mut reactions = Vec::new();
        for &i in ids {
            let c = &mut self.controllers[i];
            if c.spec.trigger == frame.app && c.rng.random_bool(c.spec.probability) {
                reactions.push((c.spec.app, c.target.unwrap_or(frame.src), c.spec.size_bytes));
            }
        }
        for (app, dst, size) in reactions {
            let f = self.new_frame(app, node, dst, size, now)?;
            self.inject(sched, now, f)?;
        }
        Ok(())
    }

    fn tx_complete(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, p: PortId, epoch: u64) -> Result<()> {
        let port = &mut self.net.ports[p];
        if port.epoch != epoch {
            return Ok(());
        }
        port.sync_cbs(now);
        let Transmitter::Busy(active) = std::mem::replace(&mut port.tx, Transmitter::Idle) else {
            return Err(SimError::domain(format!("completion on idle port {}", port.name)));
        };
        let ActiveTx {
            frame,
            queue,
            seg,
            started,
            pending_cut,
            ..
        } = *active;
        port.counters.busy_ns[queue] += (now - started).as_nanos();
        if let Some(cut) = pending_cut {
            port.counters.preemptions += 1;
            port.counters.wire_bytes_sent += cut + MCRC_BYTES;
            port.held = Some(HeldFragment {
                frame,
                queue,
                seg: seg.after_cut(cut),
            });
            return self.try_start(sched, now, p);
        }
        port.counters.frames_sent += 1;
        port.counters.wire_bytes_sent += seg.segment_wire_bytes();
        let (peer, prop) = (port.peer, port.propagation);
        self.try_start(sched, now, p)?;
        if prop == SimTime::ZERO {
            self.arrive(sched, now, peer, frame)
        } else {
            sched.schedule(
                now + prop,
                Ev::Arrival {
                    node: peer,
                    frame: Box::new(frame),
                },
            )?;
            Ok(())
        }
    }

    fn try_start(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, p: PortId) -> Result<()> {
        let port = &mut self.net.ports[p];
        if !port.is_idle() {
            return Ok(());
        }
        port.sync_cbs(now);
        match select_next(port, now) {
            Selection::Idle => Ok(()),
            Selection::WaitUntil(t) => {
                if port.recheck_at.is_none_or(|r| r <= now || t < r) {
                    port.recheck_at = Some(t);
                    sched.schedule(t, Ev::Recheck { port: p })?;
                }
                Ok(())
            }
            Selection::Transmit { source, duration } => {
                let (frame, queue, seg) = match source {
                    TxSource::Queue(q) => {
                        let f = port.queues[q].pop_front().expect("selected queue is non-empty");
                        let seg = PreemptionState::new(u64::from(f.size_bytes));
                        (f, q, seg)
                    }
                    TxSource::Resume => {
                        let h = port.held.take().expect("selected fragment is held");
                        (h.frame, h.queue, h.seg)
                    }
                };
                let ends = now + duration;
                if let Some(trace) = self.trace.as_mut() {
                    trace.push(TxRecord {
                        port: p,
                        queue,
                        frame_id: frame.frame_id,
                        frame_bytes: seg.frame_bytes,
                        start: now,
                        end: ends,
                        wire_bytes: seg.segment_wire_bytes(),
                        payload_bytes: seg.segment_payload(),
                        fragment: seg.fragment_count,
                        preempted: false,
                    });
                }
                port.tx = Transmitter::Busy(Box::new(ActiveTx {
                    express: port.is_express(queue),
                    frame,
                    queue,
                    seg,
                    started: now,
                    ends,
                    pending_cut: None,
                    cut_scheduled: false,
                }));
                port.epoch += 1;
                sched.schedule(ends, Ev::TxComplete { port: p, epoch: port.epoch })?;
                Ok(())
            }
        }
    }

    /// An express frame was queued behind a preemptable transmission.
    fn consider_preemption(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, p: PortId) -> Result<()> {
        let port = &mut self.net.ports[p];
        let (rate, epoch) = (port.rate_bps, port.epoch);
        let Transmitter::Busy(a) = &mut port.tx else {
            return Ok(());
        };
        if a.express || a.pending_cut.is_some() || a.cut_scheduled {
            return Ok(());
        }
        let sent = byte_boundary(now - a.started, rate);
        if sent >= a.seg.segment_wire_bytes() {
            return Ok(());
        }
        match fp_preempt_check(&a.seg, sent) {
            PreemptDecision::Preempt { .. } => self.cut_active(sched, now, p),
            PreemptDecision::Hold => {
                if let Some(at) = a.seg.earliest_cut().filter(|&c| c > sent) {
                    a.cut_scheduled = true;
                    let when = a.started + serialization_time_unchecked(at, rate);
                    sched.schedule(when, Ev::PreemptCut { port: p, epoch })?;
                }
                Ok(())
            }
        }
    }

    /// Cuts the active segment at the current byte boundary; the segment then
    /// closes with an mCRC.
    fn cut_active(&mut self, sched: &mut Scheduler<Ev>, now: SimTime, p: PortId) -> Result<()> {
        let port = &mut self.net.ports[p];
        let rate = port.rate_bps;
        let Transmitter::Busy(a) = &mut port.tx else {
            return Ok(());
        };
        let sent = byte_boundary(now - a.started, rate);
        let PreemptDecision::Preempt { cut_wire_bytes } = fp_preempt_check(&a.seg, sent) else {
            a.cut_scheduled = false;
            return Ok(());
        };
        a.pending_cut = Some(cut_wire_bytes);
        a.cut_scheduled = false;
        a.ends = a.started + serialization_time_unchecked(cut_wire_bytes + MCRC_BYTES, rate);
        let (frame_id, started, ends) = (a.frame.frame_id, a.started, a.ends);
        let payload = a.seg.after_cut(cut_wire_bytes).payload_done - a.seg.payload_done;
        port.epoch += 1;
        sched.schedule(ends, Ev::TxComplete { port: p, epoch: port.epoch })?;
        if let Some(rec) = self
            .trace
            .as_mut()
            .and_then(|t| t.iter_mut().rev().find(|r| r.port == p && r.frame_id == frame_id && r.start == started))
        {
            rec.end = ends;
            rec.wire_bytes = cut_wire_bytes + MCRC_BYTES;
            rec.payload_bytes = payload;
            rec.preempted = true;
        }
        Ok(())
    }
}

/// Bytes on the wire at the first byte boundary at or after `elapsed`.
fn byte_boundary(elapsed: SimTime, rate_bps: u64) -> u64 {
    let sent = bytes_sent_after(elapsed, rate_bps);
    if serialization_time_unchecked(sent, rate_bps) < elapsed {
        sent + 1
    } else {
        sent
    }
}
