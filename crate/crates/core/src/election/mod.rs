//! Per-node election state machine.
//!
//! Phase 1 floods one ELECTION message per node. On the way every node
//! learns its shortest path delay from each source and records, per
//! neighbour link `(x, y)`, how many sources are "behind" itself (`O_xy`),
//! how many are behind the neighbour (`I_xy`), and the delay totals of the
//! sources that are reached well from both ends (`T_x^C`, `T_y^C`). Slow
//! direct links that are beaten by a detour are marked dead.
//!
//! The bookkeeping is exact when copies of each source's ELECTION arrive in
//! delay order, which is what a network with simultaneous start and
//! delay-timed links produces.
//!
//! Phase 2 lives in [`dcdt`]: nodes compare themselves with each live
//! neighbour using only the recorded weights, candidates flood INFORM, and
//! everyone subscribes towards the winner.

mod dcdt;

pub use dcdt::DcdtView;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::overlay::{DelayMicros, NodeId};
use crate::ratio::{Closeness, Delta};
use crate::wire::{MessageKind, ProtocolMessage};

/// A message a node wants delivered to one of its neighbours.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outgoing {
    pub to: NodeId,
    pub msg: ProtocolMessage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolFault {
    #[error("message from {0}, which is not a neighbour")]
    UnknownNeighbor(NodeId),
    #[error("unexpected {kind:?} from {from}")]
    Unexpected { from: NodeId, kind: MessageKind },
}

/// Where a source sits relative to a link `(x, y)`, seen from `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Class {
    /// Reaches `y` through `x`.
    A,
    /// Reaches `x` through `y`.
    B,
    /// Reaches both ends without crossing the link.
    C,
}

/// What `x` knows about one source `s` on one neighbour link `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkRecord {
    /// A shortest-path copy of `s` arrived via `y`.
    pub received: bool,
    /// `s` was forwarded to `y` and still counts in `O_xy`.
    pub forwarded: bool,
    /// Best known delay from `s` to `y` (`D_sy`).
    pub delay: DelayMicros,
}

impl Default for LinkRecord {
    fn default() -> Self {
        LinkRecord { received: false, forwarded: false, delay: DelayMicros::INFINITE }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceRecord {
    pub heard: bool,
    /// `D_sx`.
    pub delay: DelayMicros,
    /// Neighbours that delivered a shortest-path copy.
    pub gateways: Vec<NodeId>,
    pub links: BTreeMap<NodeId, LinkRecord>,
}

impl Default for SourceRecord {
    fn default() -> Self {
        SourceRecord { heard: false, delay: DelayMicros::INFINITE, gateways: Vec::new(), links: BTreeMap::new() }
    }
}

impl SourceRecord {
    pub fn link(&self, y: NodeId) -> LinkRecord {
        self.links.get(&y).copied().unwrap_or_default()
    }
}

/// Branch weights of one neighbour link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeighborLedger {
    pub link_delay: DelayMicros,
    /// `I_xy`
    pub inbound: u32,
    /// `O_xy`
    pub outbound: u32,
    /// `T_x^C`
    pub t_self: u64,
    /// `T_y^C`
    pub t_neighbor: u64,
    pub dead: bool,
}

impl NeighborLedger {
    pub fn fresh(link_delay: DelayMicros) -> Self {
        NeighborLedger { link_delay, inbound: 0, outbound: 0, t_self: 0, t_neighbor: 0, dead: false }
    }

    /// Signed margin `delta_xy`; positive means `x` is strictly closer to
    /// everyone than `y` is.
    pub fn delta(&self) -> Delta {
        let t_diff = self.t_self as i128 - self.t_neighbor as i128;
        let d = self.link_delay.0;
        if d > 0 {
            let branch = self.outbound as i128 - self.inbound as i128;
            Delta::new(branch * d as i128 - t_diff, d as u128)
        } else {
            Delta::integer(-t_diff)
        }
    }
}

/// Superiority of `x` over `y`: strict margin wins, ties go to the
/// current leader and otherwise to the lower id.
pub fn superior(x: NodeId, y: NodeId, delta: Delta, current_leader: Option<NodeId>) -> bool {
    match delta.signum() {
        1 => true,
        -1 => false,
        _ => !((y < x && Some(x) != current_leader) || Some(y) == current_leader),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElectionState {
    self_id: NodeId,
    n: usize,
    current_leader: Option<NodeId>,
    ledgers: BTreeMap<NodeId, NeighborLedger>,
    sources: BTreeMap<NodeId, SourceRecord>,
    message_count: usize,
}

impl ElectionState {
    /// Fresh state with every variable at its initial value.
    pub fn new<I>(self_id: NodeId, n: usize, neighbors: I, current_leader: Option<NodeId>) -> Self
    where
        I: IntoIterator<Item = (NodeId, DelayMicros)>,
    {
        let ledgers = neighbors.into_iter().map(|(y, d)| (y, NeighborLedger::fresh(d))).collect();
        ElectionState { self_id, n, current_leader, ledgers, sources: BTreeMap::new(), message_count: 0 }
    }

    pub fn self_id(&self) -> NodeId {
        self.self_id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn current_leader(&self) -> Option<NodeId> {
        self.current_leader
    }

    pub fn message_count(&self) -> usize {
        self.message_count
    }

    pub fn phase1_complete(&self) -> bool {
        self.message_count + 1 >= self.n
    }

    pub fn ledgers(&self) -> &BTreeMap<NodeId, NeighborLedger> {
        &self.ledgers
    }

    pub fn ledger(&self, y: NodeId) -> Option<&NeighborLedger> {
        self.ledgers.get(&y)
    }

    pub fn source(&self, s: NodeId) -> Option<&SourceRecord> {
        self.sources.get(&s)
    }

    pub fn sources(&self) -> &BTreeMap<NodeId, SourceRecord> {
        &self.sources
    }

    pub fn is_neighbor(&self, y: NodeId) -> bool {
        self.ledgers.contains_key(&y)
    }

    pub fn is_dead(&self, y: NodeId) -> bool {
        self.ledgers.get(&y).is_some_and(|l| l.dead)
    }

    pub fn live_neighbors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ledgers.iter().filter(|(_, l)| !l.dead).map(|(y, _)| *y)
    }

    /// A link created after the election; it starts with empty weights.
    pub fn add_neighbor(&mut self, y: NodeId, d: DelayMicros) {
        self.ledgers.entry(y).or_insert_with(|| NeighborLedger::fresh(d));
    }

    pub fn remove_neighbor(&mut self, y: NodeId) -> Option<NeighborLedger> {
        self.ledgers.remove(&y)
    }

    pub fn set_n(&mut self, n: usize) {
        self.n = n;
    }

    /// `D_sx`, infinite when nothing was heard from `s`.
    pub fn delay_from(&self, s: NodeId) -> DelayMicros {
        self.sources.get(&s).map_or(DelayMicros::INFINITE, |r| r.delay)
    }

    /// `max_s D_sx` over the sources heard so far.
    pub fn max_delay(&self) -> DelayMicros {
        self.sources.values().filter(|r| r.heard).map(|r| r.delay).max().unwrap_or_default()
    }

    /// Closeness from the recorded delays: `(n - 1) / sum_s D_sx`.
    pub fn closeness(&self) -> Closeness {
        let sum = self
            .sources
            .iter()
            .filter(|(s, r)| **s != self.self_id && r.heard)
            .fold(0u64, |acc, (_, r)| acc.saturating_add(r.delay.0));
        Closeness::new(self.n.saturating_sub(1) as u64, sum)
    }

    /// Broadcasts this node's own ELECTION to every neighbour.
    pub fn start_election(&mut self) -> Vec<Outgoing> {
        let me = self.self_id;
        let rec = self.sources.entry(me).or_default();
        rec.heard = true;
        rec.delay = DelayMicros::ZERO;
        let mut out = Vec::with_capacity(self.ledgers.len());
        for (&z, ledger) in self.ledgers.iter_mut() {
            let link = rec.links.entry(z).or_default();
            link.forwarded = true;
            link.delay = ledger.link_delay;
            ledger.outbound += 1;
            out.push(Outgoing {
                to: z,
                msg: ProtocolMessage::Election {
                    source: me,
                    link_delay: ledger.link_delay,
                    path_delay: DelayMicros::ZERO,
                },
            });
        }
        out
    }

    /// Processes one ELECTION copy of `source` that arrived from neighbour `from`.
    pub fn handle_election(
        &mut self,
        from: NodeId,
        source: NodeId,
        link_delay: DelayMicros,
        path_delay: DelayMicros,
    ) -> Result<Vec<Outgoing>, ProtocolFault> {
        let d_xy = self.ledgers.get(&from).ok_or(ProtocolFault::UnknownNeighbor(from))?.link_delay;
        let via_y = path_delay;
        let candidate = DelayMicros(path_delay.0.saturating_add((link_delay.0 + d_xy.0) / 2));
        let mut out = Vec::new();

        let rec = self.sources.entry(source).or_default();
        if !rec.heard {
            rec.heard = true;
            rec.delay = candidate;
            self.message_count += 1;
            self.accept(source, from, via_y);
            self.forward(source, from, &mut out);
        } else if candidate < rec.delay {
            self.reset_direction(source);
            self.sources.get_mut(&source).unwrap().delay = candidate;
            self.accept(source, from, via_y);
            self.adjust_send(source, from);
            self.forward(source, from, &mut out);
        } else if candidate == rec.delay {
            self.accept(source, from, via_y);
            self.adjust_send(source, from);
        } else if rec.delay.plus(d_xy) > via_y {
            // both ends reach the source well: set C for this link
            let d_sx = rec.delay;
            rec.links.entry(from).or_default().delay = via_y;
            let ledger = self.ledgers.get_mut(&from).unwrap();
            ledger.t_self = ledger.t_self.saturating_add(d_sx.0);
            ledger.t_neighbor = ledger.t_neighbor.saturating_add(via_y.0);
            self.adjust_send(source, from);
        }

        let rec = &self.sources[&source];
        let own_copy_back = source == self.self_id && via_y < d_xy;
        let slow_direct = source == from && !rec.delay.is_infinite() && rec.delay < d_xy;
        if own_copy_back || slow_direct {
            if own_copy_back {
                self.sources.get_mut(&source).unwrap().links.entry(from).or_default().delay = via_y;
            }
            self.ledgers.get_mut(&from).unwrap().dead = true;
            self.adjust_send(source, from);
        }
        Ok(out)
    }

    fn accept(&mut self, source: NodeId, from: NodeId, via_y: DelayMicros) {
        let rec = self.sources.get_mut(&source).unwrap();
        if !rec.gateways.contains(&from) {
            rec.gateways.push(from);
        }
        let link = rec.links.entry(from).or_default();
        if !link.received {
            link.received = true;
            self.ledgers.get_mut(&from).unwrap().inbound += 1;
        }
        link.delay = via_y;
    }

    fn adjust_send(&mut self, source: NodeId, to: NodeId) {
        let rec = self.sources.get_mut(&source).unwrap();
        let link = rec.links.entry(to).or_default();
        if link.forwarded {
            link.forwarded = false;
            let ledger = self.ledgers.get_mut(&to).unwrap();
            debug_assert!(ledger.outbound > 0);
            ledger.outbound = ledger.outbound.saturating_sub(1);
        }
    }

    fn reset_direction(&mut self, source: NodeId) {
        let rec = self.sources.get_mut(&source).unwrap();
        for y in core::mem::take(&mut rec.gateways) {
            let link = rec.links.entry(y).or_default();
            if link.received {
                link.received = false;
                let ledger = self.ledgers.get_mut(&y).unwrap();
                debug_assert!(ledger.inbound > 0);
                ledger.inbound = ledger.inbound.saturating_sub(1);
            }
        }
    }

    fn forward(&mut self, source: NodeId, from: NodeId, out: &mut Vec<Outgoing>) {
        let rec = self.sources.get_mut(&source).unwrap();
        let d_sx = rec.delay;
        for (&z, ledger) in self.ledgers.iter_mut() {
            if z == from {
                continue;
            }
            let reach = d_sx.plus(ledger.link_delay);
            let link = rec.links.entry(z).or_default();
            if link.delay > reach {
                if !link.forwarded {
                    link.forwarded = true;
                    ledger.outbound += 1;
                }
                link.delay = reach;
                out.push(Outgoing {
                    to: z,
                    msg: ProtocolMessage::Election { source, link_delay: ledger.link_delay, path_delay: d_sx },
                });
            }
        }
    }

    /// Classifies `source` with respect to the link towards `y` from the
    /// delays recorded here. `D_sy` is infinite when `s` never crossed `y`.
    pub fn classify_source(&self, source: NodeId, y: NodeId) -> Option<Class> {
        let d = self.ledgers.get(&y)?.link_delay;
        let rec = self.sources.get(&source)?;
        Some(classify(rec.delay, rec.link(y).delay, d))
    }

    /// `(delta_xy, phi_xy)` for neighbour `y`.
    pub fn superiority(&self, y: NodeId) -> Option<(Delta, bool)> {
        let delta = self.ledgers.get(&y)?.delta();
        Some((delta, superior(self.self_id, y, delta, self.current_leader)))
    }

    /// True when this node beats every live neighbour.
    pub fn decide_candidacy(&self) -> bool {
        self.ledgers
            .iter()
            .filter(|(_, l)| !l.dead)
            .all(|(&y, l)| superior(self.self_id, y, l.delta(), self.current_leader))
    }
}

/// Set membership of a source from `D_sx`, `D_sy` and the link delay.
pub fn classify(d_sx: DelayMicros, d_sy: DelayMicros, link: DelayMicros) -> Class {
    if link.0 == 0 && d_sx == d_sy {
        Class::C
    } else if d_sy >= d_sx.plus(link) {
        Class::A
    } else if d_sx >= d_sy.plus(link) {
        Class::B
    } else {
        Class::C
    }
}
