//! Deterministic discrete-event simulator.
//!
//! Each send is encoded to its wire frame and delivered after the link
//! delay. Events are ordered by `(time, sender, seq)`, which keeps every
//! link FIFO. Scripted actions run one at a time, each after the previous
//! one has fully settled.

mod scenario;
mod trace;

pub use scenario::{Action, Mode, Scenario, ScenarioError, ScriptedAction, DEFAULT_K_PERMILLE};
pub use trace::{ElectionRecord, MessageCounts, Phase, Snapshot, TraceEvent, TraceLevel, TraceRecord};

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::ToString;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::election::{DcdtView, ElectionState, Outgoing, ProtocolFault};
use crate::membership::{bootstrap_join, recovery_initiator, Decision, LeaderBook, Notice};
use crate::overlay::{DelayMicros, NodeId, OverlayGraph};
use crate::wire::{MessageKind, ProtocolMessage, WireCentrality};

/// Everything one node holds.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeRuntime {
    pub id: NodeId,
    /// Participants this node knows of; `n` is its size.
    pub members: BTreeSet<NodeId>,
    pub known_leader: Option<NodeId>,
    pub election: ElectionState,
    pub dcdt: DcdtView,
    pub book: Option<LeaderBook>,
    notices: Vec<Notice>,
    awaiting_parent: bool,
    phase2_armed: bool,
}

impl NodeRuntime {
    fn new(
        id: NodeId,
        members: BTreeSet<NodeId>,
        known_leader: Option<NodeId>,
        links: &[(NodeId, DelayMicros)],
    ) -> Self {
        let election = ElectionState::new(id, members.len(), links.iter().copied(), known_leader);
        NodeRuntime {
            id,
            members,
            known_leader,
            election,
            dcdt: DcdtView::new(id, known_leader),
            book: None,
            notices: Vec::new(),
            awaiting_parent: false,
            phase2_armed: false,
        }
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    /// Parent in the tree; `None` for the leader or a detached node.
    pub fn parent(&self) -> Option<NodeId> {
        let d = self.dcdt.leader_direction;
        (d != self.id).then_some(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Timer {
    Phase2,
    Finalize,
}

#[derive(Clone, Debug)]
enum EventKind {
    Deliver { to: NodeId, frame: Vec<u8> },
    Timer(Timer),
}

#[derive(Clone, Debug)]
struct Event {
    time: u64,
    sender: NodeId,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.sender, self.seq).cmp(&(other.time, other.sender, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Idle,
    Phase1,
    Phase2,
    Subscribe,
    Timed,
    JoinNotice(NodeId),
    LeaveNotice(NodeId),
    Reparent(NodeId),
    Broadcast(Decision),
    Recovery,
}

pub struct Simulator {
    graph: OverlayGraph,
    nodes: BTreeMap<NodeId, NodeRuntime>,
    queue: BinaryHeap<Reverse<Event>>,
    now: u64,
    seq: u64,
    stage: Stage,
    mode: Mode,
    level: TraceLevel,
    rng: ChaCha8Rng,
    join_delay: RangeInclusive<u64>,
    trace: Vec<TraceRecord>,
    counts: MessageCounts,
    election_base: MessageCounts,
    election_started: u64,
    elections: Vec<ElectionRecord>,
    snapshots: Vec<Snapshot>,
}

/// Runs a scenario to completion.
pub fn run_scenario(scenario: &Scenario, level: TraceLevel) -> Result<Simulator, ScenarioError> {
    let mut sim = Simulator::new(scenario.graph.clone(), scenario.mode, scenario.seed, level)?;
    sim.join_delay = scenario.join_delay.clone();
    let mut actions = scenario.actions.clone();
    actions.sort_by_key(|a| a.at);
    for a in actions {
        sim.now = sim.now.max(a.at);
        sim.apply(a.action)?;
    }
    Ok(sim)
}

impl Simulator {
    pub fn new(graph: OverlayGraph, mode: Mode, seed: u64, level: TraceLevel) -> Result<Self, ScenarioError> {
        if graph.node_count() == 0 {
            return Err(crate::overlay::OverlayError::Empty.into());
        }
        if !graph.is_connected() {
            return Err(crate::overlay::OverlayError::Disconnected.into());
        }
        let members: BTreeSet<NodeId> = graph.nodes().collect();
        let nodes = graph
            .nodes()
            .map(|v| {
                let links: Vec<_> = graph.neighbors(v).collect();
                (v, NodeRuntime::new(v, members.clone(), None, &links))
            })
            .collect();
        Ok(Simulator {
            graph,
            nodes,
            queue: BinaryHeap::new(),
            now: 0,
            seq: 0,
            stage: Stage::Idle,
            mode,
            level,
            rng: ChaCha8Rng::seed_from_u64(seed),
            join_delay: 1..=50,
            trace: Vec::new(),
            counts: MessageCounts::default(),
            election_base: MessageCounts::default(),
            election_started: 0,
            elections: Vec::new(),
            snapshots: Vec::new(),
        })
    }

    pub fn set_join_delay(&mut self, delays: RangeInclusive<u64>) {
        self.join_delay = delays;
    }

    pub fn graph(&self) -> &OverlayGraph {
        &self.graph
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn node(&self, v: NodeId) -> Option<&NodeRuntime> {
        self.nodes.get(&v)
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, NodeRuntime> {
        &self.nodes
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn counts(&self) -> &MessageCounts {
        &self.counts
    }

    pub fn elections(&self) -> &[ElectionRecord] {
        &self.elections
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    /// True when nothing is in flight and no timer is pending.
    pub fn is_quiescent(&self) -> bool {
        self.queue.is_empty()
    }

    /// The leader every node agrees on, if any.
    pub fn leader(&self) -> Option<NodeId> {
        let mut views = self.nodes.values().map(|r| r.dcdt.leader);
        let first = views.next()?;
        let agreed = views.all(|l| l == first) && self.nodes.get(&first).is_some_and(|r| r.dcdt.is_leader());
        agreed.then_some(first)
    }

    /// Candidates of the latest election.
    pub fn candidates(&self) -> BTreeSet<NodeId> {
        self.nodes.values().filter(|r| r.dcdt.candidate).map(|r| r.id).collect()
    }

    /// Runs one scripted action and everything it sets off.
    pub fn apply(&mut self, action: Action) -> Result<(), ScenarioError> {
        self.settle()?;
        self.record(TraceEvent::Action { action: action.to_string() });
        match action {
            Action::StartElection => self.start_election(),
            Action::Join { contact, attach } => self.join(contact, attach)?,
            Action::Leave { node } => self.leave(node)?,
            Action::FailLeader => {
                let leader = self.leader().ok_or(ScenarioError::NoLeader)?;
                self.leader_departure(leader)?;
            }
        }
        self.settle()?;
        self.snapshots.push(Snapshot { time: self.now, graph: self.graph.clone(), leader: self.leader() });
        Ok(())
    }

    /// Starts an election at every node at the current instant.
    pub fn start_election(&mut self) {
        self.election_base = self.counts.clone();
        self.election_started = self.now;
        if self.nodes.len() == 1 {
            let (&v, r) = self.nodes.iter_mut().next().expect("one node");
            r.election = ElectionState::new(v, 1, [], Some(v));
            r.dcdt = DcdtView::solitary(v);
            self.finish_election();
            return;
        }
        let timed = matches!(self.mode, Mode::Timed { .. });
        self.stage = if timed { Stage::Timed } else { Stage::Phase1 };
        self.record(TraceEvent::Phase { phase: if timed { Phase::Timed } else { Phase::Phase1 } });
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        for v in ids {
            let links: Vec<_> = self.graph.neighbors(v).collect();
            let r = self.nodes.get_mut(&v).unwrap();
            let known = r.known_leader;
            r.election = ElectionState::new(v, r.members.len(), links, known);
            r.dcdt = DcdtView::new(v, known);
            r.book = None;
            r.notices.clear();
            r.awaiting_parent = false;
            r.phase2_armed = false;
            let out = r.election.start_election();
            self.send(v, out);
        }
    }

    /// Processes the next event. Returns false when the queue is empty.
    pub fn step(&mut self) -> Result<bool, ScenarioError> {
        let Some(Reverse(ev)) = self.queue.pop() else {
            return Ok(false);
        };
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        match ev.kind {
            EventKind::Deliver { to, frame } => self.deliver(ev.sender, to, &frame)?,
            EventKind::Timer(t) => self.fire(ev.sender, t),
        }
        Ok(true)
    }

    /// Drains the queue and advances phases until the system is idle.
    pub fn settle(&mut self) -> Result<(), ScenarioError> {
        loop {
            while self.step()? {}
            match self.stage {
                Stage::Idle => return Ok(()),
                Stage::Phase1 => {
                    self.stage = Stage::Phase2;
                    self.record(TraceEvent::Phase { phase: Phase::Phase2 });
                    for v in self.ids() {
                        let r = &mut self.nodes.get_mut(&v).unwrap();
                        let out = r.dcdt.begin_phase2(&r.election);
                        self.send(v, out);
                    }
                }
                Stage::Phase2 => {
                    self.stage = Stage::Subscribe;
                    self.record(TraceEvent::Phase { phase: Phase::Subscribe });
                    for v in self.ids() {
                        let r = &mut self.nodes.get_mut(&v).unwrap();
                        let out = r.dcdt.finalize(&r.election);
                        self.send(v, out);
                    }
                }
                Stage::Subscribe | Stage::Timed => self.finish_election(),
                Stage::JoinNotice(v) => self.decide_join(v)?,
                Stage::LeaveNotice(v) => self.detach_departed(v)?,
                Stage::Reparent(v) => self.decide_leave(v)?,
                Stage::Broadcast(Decision::Reelect) | Stage::Recovery => self.start_election(),
                Stage::Broadcast(Decision::BroadcastOnly) => {
                    self.stage = Stage::Idle;
                    self.record(TraceEvent::Phase { phase: Phase::Idle });
                }
            }
        }
    }

    fn ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    fn record(&mut self, event: TraceEvent) {
        self.trace.push(TraceRecord { time: self.now, event });
    }

    fn fault(&mut self, node: NodeId, fault: ProtocolFault) -> ScenarioError {
        self.record(TraceEvent::Fault { node, detail: fault.to_string() });
        ScenarioError::Protocol { node, fault }
    }

    fn send(&mut self, from: NodeId, out: Vec<Outgoing>) {
        for Outgoing { to, msg } in out {
            let Some(d) = self.graph.delay(from, to) else {
                continue;
            };
            let frame = msg.encode().expect("protocol messages fit their wire fields");
            self.counts.add(msg.kind());
            self.push(self.now.saturating_add(d.0), from, EventKind::Deliver { to, frame });
        }
    }

    fn push(&mut self, time: u64, sender: NodeId, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(Event { time, sender, seq: self.seq, kind }));
    }

    fn wait_for(&self, v: NodeId) -> u64 {
        let Mode::Timed { k_permille } = self.mode else {
            return 0;
        };
        let max_d = self.nodes[&v].election.max_delay().0 as u128;
        (max_d * k_permille as u128).div_ceil(1000).min(u64::MAX as u128) as u64
    }

    fn fire(&mut self, v: NodeId, timer: Timer) {
        let wait = self.wait_for(v);
        let Some(r) = self.nodes.get_mut(&v) else {
            return;
        };
        let out = match timer {
            Timer::Phase2 => r.dcdt.begin_phase2(&r.election),
            Timer::Finalize => r.dcdt.finalize(&r.election),
        };
        self.send(v, out);
        if timer == Timer::Phase2 {
            self.push(self.now.saturating_add(wait), v, EventKind::Timer(Timer::Finalize));
        }
    }

    fn deliver(&mut self, from: NodeId, to: NodeId, frame: &[u8]) -> Result<(), ScenarioError> {
        let msg = ProtocolMessage::decode(frame)?;
        if self.level == TraceLevel::Full {
            self.record(TraceEvent::Deliver { from, to, kind: msg.kind(), frame: hex::encode(frame) });
        }
        let timed = matches!(self.mode, Mode::Timed { .. });
        let Some(r) = self.nodes.get_mut(&to) else {
            return Ok(());
        };
        let mut arm = false;
        let result: Result<Vec<Outgoing>, ProtocolFault> = match msg {
            ProtocolMessage::Election { source, link_delay, path_delay } => {
                let out = r.election.handle_election(from, source, link_delay, path_delay);
                if timed && out.is_ok() && !r.phase2_armed && r.election.phase1_complete() {
                    r.phase2_armed = true;
                    arm = true;
                }
                out
            }
            ProtocolMessage::Inform { candidate, centrality } => {
                r.dcdt.handle_inform(&r.election, from, candidate, centrality)
            }
            ProtocolMessage::Control(ref text) => match msg.subscription() {
                Some(sub) => r.dcdt.handle_subscription(&r.election, from, sub).map(|_| Vec::new()),
                None => {
                    let _ = text;
                    Err(ProtocolFault::Unexpected { from, kind: MessageKind::Control })
                }
            },
            ProtocolMessage::Join { node, link_delay, path_delay } => {
                if r.dcdt.is_leader() {
                    r.notices.push(Notice { node, via: from, link_delay, path_delay });
                    Ok(Vec::new())
                } else {
                    Ok(relay_up(r, &self.graph, |d| ProtocolMessage::Join {
                        node,
                        link_delay: d,
                        path_delay: path_delay.plus(d),
                    }))
                }
            }
            ProtocolMessage::Leave { node } => {
                if r.dcdt.is_leader() {
                    r.notices.push(Notice {
                        node,
                        via: from,
                        link_delay: DelayMicros::ZERO,
                        path_delay: DelayMicros::ZERO,
                    });
                    Ok(Vec::new())
                } else {
                    Ok(relay_up(r, &self.graph, |_| ProtocolMessage::Leave { node }))
                }
            }
            ProtocolMessage::Arrival { node } => {
                if node == to {
                    if r.awaiting_parent {
                        r.awaiting_parent = false;
                        r.dcdt.leader_direction = from;
                        r.dcdt.fg_list = r.election.live_neighbors().filter(|&y| y != from).collect();
                        Ok(alloc::vec![Outgoing { to: from, msg: ProtocolMessage::subs() }])
                    } else {
                        Ok(Vec::new())
                    }
                } else if r.members.insert(node) {
                    r.election.set_n(r.members.len());
                    Ok(flood(r, from, ProtocolMessage::Arrival { node }))
                } else {
                    Ok(Vec::new())
                }
            }
            ProtocolMessage::Depart { node } => {
                if r.members.remove(&node) {
                    r.election.set_n(r.members.len());
                    Ok(flood(r, from, ProtocolMessage::Depart { node }))
                } else {
                    Ok(Vec::new())
                }
            }
            ProtocolMessage::RequestId { .. } | ProtocolMessage::ReplyId { .. } => {
                Err(ProtocolFault::Unexpected { from, kind: msg.kind() })
            }
        };
        if arm {
            let wait = self.wait_for(to);
            self.push(self.now.saturating_add(wait), to, EventKind::Timer(Timer::Phase2));
        }
        match result {
            Ok(out) => {
                self.send(to, out);
                Ok(())
            }
            Err(f) => Err(self.fault(to, f)),
        }
    }

    fn finish_election(&mut self) {
        self.stage = Stage::Idle;
        let leader = self.leader();
        for r in self.nodes.values_mut() {
            r.known_leader = Some(r.dcdt.leader);
        }
        if let Some(l) = leader {
            let r = self.nodes.get_mut(&l).unwrap();
            r.book = Some(LeaderBook::from_state(&r.election));
        }
        let candidates: Vec<NodeId> = self.candidates().into_iter().collect();
        let sent = |k: MessageKind| self.counts.get(k) - self.election_base.get(k);
        let record = ElectionRecord {
            started_at: self.election_started,
            finished_at: self.now,
            n: self.graph.node_count(),
            edges: self.graph.edge_count(),
            leader,
            candidates: candidates.clone(),
            election_sends: sent(MessageKind::Election),
            inform_sends: sent(MessageKind::Inform),
            control_sends: sent(MessageKind::Control),
        };
        self.record(TraceEvent::Elected { leader, candidates, election_sends: record.election_sends });
        self.elections.push(record);
    }

    fn join(&mut self, contact: Option<NodeId>, attach: usize) -> Result<(), ScenarioError> {
        let leader = self.leader().ok_or(ScenarioError::NoLeader)?;
        let contact = match contact {
            Some(c) => c,
            None => {
                let live: Vec<NodeId> = self.graph.nodes().collect();
                live[self.rng.random_range(0..live.len())]
            }
        };
        let c = self.nodes.get(&contact).ok_or(ScenarioError::UnknownNode(contact))?;
        let mut members = c.members.clone();
        let best = c.dcdt.best;
        let joined = bootstrap_join(&mut self.graph, contact, attach, self.join_delay.clone(), &mut self.rng)?;
        let id = joined.id;
        members.insert(id);
        let mut r = NodeRuntime::new(id, members, Some(leader), &joined.links);
        r.dcdt.leader = leader;
        r.dcdt.best = best.or(Some(WireCentrality(0)));
        r.awaiting_parent = true;
        self.nodes.insert(id, r);
        let mut out = Vec::with_capacity(joined.links.len());
        for &(peer, d) in &joined.links {
            let p = self.nodes.get_mut(&peer).unwrap();
            p.election.add_neighbor(id, d);
            p.dcdt.fg_list.insert(id);
            out.push(Outgoing { to: peer, msg: ProtocolMessage::Join { node: id, link_delay: d, path_delay: d } });
        }
        self.send(id, out);
        self.stage = Stage::JoinNotice(id);
        self.record(TraceEvent::Phase { phase: Phase::JoinNotice });
        Ok(())
    }

    fn decide_join(&mut self, v: NodeId) -> Result<(), ScenarioError> {
        let leader = self.leader().ok_or(ScenarioError::NoLeader)?;
        let r = self.nodes.get_mut(&leader).unwrap();
        let notices: Vec<Notice> = core::mem::take(&mut r.notices).into_iter().filter(|m| m.node == v).collect();
        let book = r.book.get_or_insert_with(|| LeaderBook::from_state(&r.election));
        let decision = book.apply_join(v, &notices);
        r.members.insert(v);
        r.election.set_n(r.members.len());
        let out = flood(r, leader, ProtocolMessage::Arrival { node: v });
        self.record(TraceEvent::Decision { leader, subject: v, decision });
        self.send(leader, out);
        self.stage = Stage::Broadcast(decision);
        self.record(TraceEvent::Phase { phase: Phase::Broadcast });
        Ok(())
    }

    fn check_removable(&self, v: NodeId) -> Result<(), ScenarioError> {
        if !self.graph.contains(v) {
            return Err(ScenarioError::UnknownNode(v));
        }
        let mut g = self.graph.clone();
        g.remove_node(v)?;
        if g.node_count() == 0 || !g.is_connected() {
            return Err(ScenarioError::Partition(v));
        }
        Ok(())
    }

    fn leave(&mut self, v: NodeId) -> Result<(), ScenarioError> {
        let leader = self.leader().ok_or(ScenarioError::NoLeader)?;
        if v == leader {
            return self.leader_departure(v);
        }
        self.check_removable(v)?;
        let r = &self.nodes[&v];
        let out = r.parent().map(|p| Outgoing { to: p, msg: ProtocolMessage::Leave { node: v } }).into_iter().collect();
        self.send(v, out);
        self.stage = Stage::LeaveNotice(v);
        self.record(TraceEvent::Phase { phase: Phase::LeaveNotice });
        Ok(())
    }

    /// Removes `v` from the overlay; neighbours notice the lost links.
    /// Returns the neighbours whose parent was `v`.
    fn remove_node(&mut self, v: NodeId) -> Result<Vec<NodeId>, ScenarioError> {
        let former = self.graph.remove_node(v)?;
        self.nodes.remove(&v);
        let mut orphans = Vec::new();
        for y in former.keys() {
            let r = self.nodes.get_mut(y).unwrap();
            r.election.remove_neighbor(v);
            r.dcdt.fg_list.remove(&v);
            r.dcdt.child_list.remove(&v);
            if r.dcdt.leader_direction == v {
                r.dcdt.leader_direction = *y;
                orphans.push(*y);
            }
        }
        Ok(orphans)
    }

    fn reaches_leader(&self, mut p: NodeId, avoid: NodeId) -> bool {
        for _ in 0..=self.nodes.len() {
            if p == avoid {
                return false;
            }
            let Some(r) = self.nodes.get(&p) else {
                return false;
            };
            match r.parent() {
                None => return r.dcdt.is_leader(),
                Some(next) => p = next,
            }
        }
        false
    }

    fn detach_departed(&mut self, v: NodeId) -> Result<(), ScenarioError> {
        let orphans = self.remove_node(v)?;
        for y in orphans {
            let choice = self.nodes[&y].dcdt.fg_list.iter().copied().find(|&p| self.reaches_leader(p, y));
            self.record(TraceEvent::Reparent { node: y, parent: choice });
            if let Some(p) = choice {
                let r = self.nodes.get_mut(&y).unwrap();
                r.dcdt.leader_direction = p;
                r.dcdt.fg_list.remove(&p);
                self.send(y, alloc::vec![Outgoing { to: p, msg: ProtocolMessage::subs() }]);
            }
        }
        self.stage = Stage::Reparent(v);
        self.record(TraceEvent::Phase { phase: Phase::Reparent });
        Ok(())
    }

    fn decide_leave(&mut self, v: NodeId) -> Result<(), ScenarioError> {
        let leader = self.leader().ok_or(ScenarioError::NoLeader)?;
        let r = self.nodes.get_mut(&leader).unwrap();
        let notice = core::mem::take(&mut r.notices).into_iter().find(|m| m.node == v).unwrap_or(Notice {
            node: v,
            via: v,
            link_delay: DelayMicros::ZERO,
            path_delay: DelayMicros::ZERO,
        });
        let book = r.book.get_or_insert_with(|| LeaderBook::from_state(&r.election));
        let decision = book.apply_leave(notice);
        r.members.remove(&v);
        r.election.set_n(r.members.len());
        let out = flood(r, leader, ProtocolMessage::Depart { node: v });
        self.record(TraceEvent::Decision { leader, subject: v, decision });
        self.send(leader, out);
        self.stage = Stage::Broadcast(decision);
        self.record(TraceEvent::Phase { phase: Phase::Broadcast });
        Ok(())
    }

    fn leader_departure(&mut self, leader: NodeId) -> Result<(), ScenarioError> {
        self.check_removable(leader)?;
        let former: Vec<NodeId> = self.graph.neighbors(leader).map(|(y, _)| y).collect();
        self.remove_node(leader)?;
        if self.nodes.len() == 1 {
            let (&v, r) = self.nodes.iter_mut().next().expect("one node");
            r.members = [v].into_iter().collect();
            r.election = ElectionState::new(v, 1, [], Some(v));
            r.dcdt = DcdtView::solitary(v);
            r.known_leader = Some(v);
            r.book = Some(LeaderBook::from_state(&r.election));
            self.stage = Stage::Idle;
            return Ok(());
        }
        let initiator = recovery_initiator(&self.graph, &former).ok_or(ScenarioError::Partition(leader))?;
        let r = self.nodes.get_mut(&initiator).unwrap();
        r.members.remove(&leader);
        r.election.set_n(r.members.len());
        let out = flood(r, initiator, ProtocolMessage::Depart { node: leader });
        self.send(initiator, out);
        self.stage = Stage::Recovery;
        self.record(TraceEvent::Phase { phase: Phase::Recovery });
        Ok(())
    }
}

/// Membership floods use every current link: after a departure a link
/// that lost the last election's delay race may be the only bridge left.
fn flood(r: &NodeRuntime, from: NodeId, msg: ProtocolMessage) -> Vec<Outgoing> {
    r.election.ledgers().keys().copied().filter(|&z| z != from).map(|to| Outgoing { to, msg: msg.clone() }).collect()
}

fn relay_up(r: &NodeRuntime, g: &OverlayGraph, make: impl Fn(DelayMicros) -> ProtocolMessage) -> Vec<Outgoing> {
    match r.parent() {
        Some(p) => {
            let d = g.delay(r.id, p).unwrap_or_default();
            alloc::vec![Outgoing { to: p, msg: make(d) }]
        }
        None => Vec::new(),
    }
}
