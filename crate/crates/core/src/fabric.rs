//! Topology, static routing and egress ports.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::frame::{serialization_time_unchecked, Frame, NodeId};
use crate::shaping::cbs::{CbsPhase, CbsState};
use crate::shaping::preemption::PreemptionState;
use crate::shaping::tas::GateControlList;
use crate::shaping::{QueueMode, ShaperConfig};
use crate::time::SimTime;

pub const NUM_QUEUES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinkTier {
    Core,
    #[default]
    Peripheral,
    /// Access link of a high-rate source placed next to the core.
    Edge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub rate_bps: u64,
    #[serde(default)]
    pub propagation: SimTime,
    #[serde(default)]
    pub tier: LinkTier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostSpec {
    pub name: String,
    pub switch: String,
    pub rate_bps: u64,
    #[serde(default)]
    pub propagation: SimTime,
    #[serde(default)]
    pub tier: LinkTier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub switches: Vec<String>,
    pub links: Vec<LinkSpec>,
    pub hosts: Vec<HostSpec>,
}

impl TopologySpec {
    /// Sets every link of `tier` (switch-to-switch and host access) to `rate_bps`.
    pub fn set_tier_rate(&mut self, tier: LinkTier, rate_bps: u64) {
        for l in self.links.iter_mut().filter(|l| l.tier == tier) {
            l.rate_bps = rate_bps;
        }
        for h in self.hosts.iter_mut().filter(|h| h.tier == tier) {
            h.rate_bps = rate_bps;
        }
    }

    pub fn set_all_rates(&mut self, rate_bps: u64) {
        self.links.iter_mut().for_each(|l| l.rate_bps = rate_bps);
        self.hosts.iter_mut().for_each(|h| h.rate_bps = rate_bps);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    Switch,
    Host,
}

pub type PortId = usize;

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    /// Egress ports owned by this node.
    pub ports: Vec<PortId>,
    /// Destination node → egress port. Empty for hosts, which have a single port.
    pub forwarding: HashMap<NodeId, PortId>,
}

#[derive(Debug, Clone)]
pub struct ActiveTx {
    pub frame: Frame,
    pub queue: usize,
    pub seg: PreemptionState,
    pub started: SimTime,
    pub ends: SimTime,
    pub express: bool,
    /// Cut point in wire bytes once the segment has been cut; `ends` then
    /// includes the closing mCRC.
    pub pending_cut: Option<u64>,
    /// A cut at the earliest legal point is scheduled but not yet applied.
    pub cut_scheduled: bool,
}

#[derive(Debug, Clone)]
pub enum Transmitter {
    Idle,
    Busy(Box<ActiveTx>),
}

#[derive(Debug, Clone)]
pub struct HeldFragment {
    pub frame: Frame,
    pub queue: usize,
    pub seg: PreemptionState,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PortCounters {
    pub drops: [u64; NUM_QUEUES],
    pub enqueued: [u64; NUM_QUEUES],
    pub frames_sent: u64,
    pub wire_bytes_sent: u64,
    pub preemptions: u64,
    /// Transmission time per queue.
    pub busy_ns: [u64; NUM_QUEUES],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Queued,
    Dropped,
}

#[derive(Debug, Clone)]
pub struct EgressPort {
    pub id: PortId,
    pub name: String,
    pub owner: NodeId,
    pub peer: NodeId,
    pub rate_bps: u64,
    pub propagation: SimTime,
    pub mode: QueueMode,
    pub queues: [VecDeque<Frame>; NUM_QUEUES],
    /// Per-queue capacity in frames; `None` means unbounded.
    pub capacity: Option<usize>,
    pub cbs: [Option<CbsState>; NUM_QUEUES],
    pub gcl: Option<GateControlList>,
    /// Bit `q` set: queue `q` is express.
    pub express: u8,
    pub tx: Transmitter,
    pub held: Option<HeldFragment>,
    pub counters: PortCounters,
    /// Bumped whenever a scheduled completion is invalidated.
    pub epoch: u64,
    pub recheck_at: Option<SimTime>,
}

impl EgressPort {
    pub fn new(
        id: PortId,
        name: String,
        owner: NodeId,
        peer: NodeId,
        rate_bps: u64,
        propagation: SimTime,
    ) -> Self {
        EgressPort {
            id,
            name,
            owner,
            peer,
            rate_bps,
            propagation,
            mode: QueueMode::Fifo,
            queues: Default::default(),
            capacity: None,
            cbs: Default::default(),
            gcl: None,
            express: 0,
            tx: Transmitter::Idle,
            held: None,
            counters: PortCounters::default(),
            epoch: 0,
            recheck_at: None,
        }
    }

    /// Installs a shaper. `gcl` is passed separately because its base time may be
    /// port specific.
    pub fn configure(
        &mut self,
        shaper: &ShaperConfig,
        capacity: Option<usize>,
        gcl: Option<GateControlList>,
    ) -> Result<()> {
        self.mode = shaper.mode;
        self.capacity = capacity;
        for c in &shaper.cbs {
            self.cbs[c.queue] = Some(CbsState::new(c.idle_slope_fraction, self.rate_bps)?);
        }
        self.gcl = gcl;
        self.express = shaper.express_queues.iter().fold(0, |m, &q| m | (1 << q));
        Ok(())
    }

    pub fn queue_index(&self, frame: &Frame) -> usize {
        match self.mode {
            QueueMode::Fifo => 0,
            QueueMode::Priority => frame.priority(),
        }
    }

    pub fn is_idle(&self) -> bool {
        matches!(self.tx, Transmitter::Idle)
    }

    pub fn occupancy(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_express(&self, queue: usize) -> bool {
        self.mode == QueueMode::Priority && self.express & (1 << queue) != 0
    }

    pub fn serialization(&self, bytes: u64) -> SimTime {
        serialization_time_unchecked(bytes, self.rate_bps)
    }

    /// Frames of `queue` that are waiting, counting a held fragment.
    fn backlogged(&self, queue: usize) -> bool {
        !self.queues[queue].is_empty() || self.held.as_ref().is_some_and(|h| h.queue == queue)
    }

    fn transmitting(&self, queue: usize) -> bool {
        matches!(&self.tx, Transmitter::Busy(a) if a.queue == queue)
    }

    /// Brings every CBS credit up to `now` under the phase that held since the last change.
    pub fn sync_cbs(&mut self, now: SimTime) {
        for q in 0..NUM_QUEUES {
            if self.cbs[q].is_none() {
                continue;
            }
            let phase = if self.transmitting(q) {
                CbsPhase::Transmitting
            } else if self.backlogged(q) {
                CbsPhase::Accumulating
            } else {
                CbsPhase::IdleEmpty
            };
            if let Some(state) = self.cbs[q].as_mut() {
                state.update(now, phase);
            }
        }
    }

    /// Tail-drop enqueue. Callers sync CBS first.
    pub fn enqueue(&mut self, mut frame: Frame, now: SimTime) -> EnqueueOutcome {
        let q = self.queue_index(&frame);
        if self.capacity.is_some_and(|cap| self.queues[q].len() >= cap) {
            self.counters.drops[q] += 1;
            return EnqueueOutcome::Dropped;
        }
        frame.hops.push(now);
        self.counters.enqueued[q] += 1;
        self.queues[q].push_back(frame);
        EnqueueOutcome::Queued
    }
}

/// Built topology: nodes, ports and forwarding tables.
#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub ports: Vec<EgressPort>,
    names: BTreeMap<String, NodeId>,
}

impl Network {
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.names.get(name).copied()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn host_port(&self, host: NodeId) -> PortId {
        self.nodes[host].ports[0]
    }

    /// Egress port a frame for `dst` takes when leaving `node`.
    pub fn next_port(&self, node: NodeId, dst: NodeId) -> Option<PortId> {
        let n = &self.nodes[node];
        match n.kind {
            NodeKind::Host => n.ports.first().copied(),
            NodeKind::Switch => n.forwarding.get(&dst).copied(),
        }
    }

    /// Egress ports traversed from `src` to `dst`, host port first.
    pub fn path(&self, src: NodeId, dst: NodeId) -> Option<Vec<PortId>> {
        let mut out = Vec::new();
        let mut at = src;
        while at != dst {
            let p = self.next_port(at, dst)?;
            out.push(p);
            at = self.ports[p].peer;
            if out.len() > self.nodes.len() {
                return None;
            }
        }
        Some(out)
    }

    pub fn switch_hops(&self, src: NodeId, dst: NodeId) -> Option<usize> {
        self.path(src, dst).map(|p| p.len().saturating_sub(1))
    }
}

/// Builds nodes, full-duplex ports and shortest-path forwarding tables.
///
/// Node ids are assigned switches first, then hosts, in declaration order;
/// equal-length paths are broken toward the lowest next-hop id.
pub fn build_topology(spec: &TopologySpec) -> Result<Network> {
    let mut names = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut dupes = Vec::new();
    let decls = spec
        .switches
        .iter()
        .map(|s| (s.clone(), NodeKind::Switch))
        .chain(spec.hosts.iter().map(|h| (h.name.clone(), NodeKind::Host)));
    for (name, kind) in decls {
        if names.contains_key(&name) {
            dupes.push(name.clone());
            continue;
        }
        let id = nodes.len();
        names.insert(name.clone(), id);
        nodes.push(Node {
            id,
            name,
            kind,
            ports: Vec::new(),
            forwarding: HashMap::new(),
        });
    }
    if !dupes.is_empty() {
        return Err(SimError::config(format!("duplicate node ids: {}", dupes.join(", "))));
    }

    let mut ports: Vec<EgressPort> = Vec::new();
    let mut add_link = |nodes: &mut Vec<Node>, a: NodeId, b: NodeId, rate: u64, prop: SimTime| {
        for (from, to) in [(a, b), (b, a)] {
            let id = ports.len();
            let name = format!("{}->{}", nodes[from].name, nodes[to].name);
            ports.push(EgressPort::new(id, name, from, to, rate, prop));
            nodes[from].ports.push(id);
        }
    };

    let mut bad = Vec::new();
    let switch_id = |name: &str| {
        names
            .get(name)
            .copied()
            .filter(|&id| nodes[id].kind == NodeKind::Switch)
    };
    let mut links = Vec::new();
    for l in &spec.links {
        match (switch_id(&l.a), switch_id(&l.b)) {
            (Some(a), Some(b)) if a != b => links.push((a, b, l.rate_bps, l.propagation)),
            _ => bad.push(format!("link {}-{}", l.a, l.b)),
        }
        if l.rate_bps == 0 {
            bad.push(format!("link {}-{} has zero rate", l.a, l.b));
        }
    }
    for h in &spec.hosts {
        match switch_id(&h.switch) {
            Some(s) => links.push((names[&h.name], s, h.rate_bps, h.propagation)),
            None => bad.push(format!("host {} (switch {:?})", h.name, h.switch)),
        }
        if h.rate_bps == 0 {
            bad.push(format!("host {} has zero rate", h.name));
        }
    }
    if !bad.is_empty() {
        return Err(SimError::config(format!("unattached or invalid: {}", bad.join(", "))));
    }
    for (a, b, rate, prop) in links {
        add_link(&mut nodes, a, b, rate, prop);
    }

    // adjacency: node -> (neighbor, port)
    let adj: Vec<Vec<(NodeId, PortId)>> = nodes
        .iter()
        .map(|n| {
            let mut v: Vec<_> = n.ports.iter().map(|&p| (ports[p].peer, p)).collect();
            v.sort();
            v
        })
        .collect();

    let switches: Vec<NodeId> = nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Switch)
        .map(|n| n.id)
        .collect();
    if let Some(&first) = switches.first() {
        let dist = bfs(&nodes, &adj, first);
        let unreachable: Vec<&str> = nodes
            .iter()
            .filter(|n| dist[n.id].is_none())
            .map(|n| n.name.as_str())
            .collect();
        if !unreachable.is_empty() {
            return Err(SimError::config(format!(
                "topology is disconnected; unreachable from {}: {}",
                nodes[first].name,
                unreachable.join(", ")
            )));
        }
    }

    for dst in 0..nodes.len() {
        if nodes[dst].kind != NodeKind::Host {
            continue;
        }
        let dist = bfs(&nodes, &adj, dst);
        for &s in &switches {
            let best = adj[s]
                .iter()
                .filter_map(|&(nb, p)| dist[nb].map(|d| (d, nb, p)))
                .filter(|&(_, nb, _)| nb == dst || nodes[nb].kind == NodeKind::Switch)
                .min();
            if let Some((_, _, p)) = best {
                nodes[s].forwarding.insert(dst, p);
            }
        }
    }

    Ok(Network { nodes, ports, names })
}

/// Hop distances to `from`, relaying only through switches.
fn bfs(nodes: &[Node], adj: &[Vec<(NodeId, PortId)>], from: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; nodes.len()];
    dist[from] = Some(0);
    let mut q = VecDeque::from([from]);
    while let Some(n) = q.pop_front() {
        if n != from && nodes[n].kind == NodeKind::Host {
            continue;
        }
        let d = dist[n].expect("visited");
        for &(nb, _) in &adj[n] {
            if dist[nb].is_none() {
                dist[nb] = Some(d + 1);
                q.push_back(nb);
            }
        }
    }
    dist
}
