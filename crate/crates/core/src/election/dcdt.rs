//! Candidate announcement and tree construction.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{ElectionState, Outgoing, ProtocolFault};
use crate::overlay::NodeId;
use crate::ratio::Closeness;
use crate::wire::{ProtocolMessage, WireCentrality};

/// A node's view of the leader and of its place in the distribution tree.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DcdtView {
    self_id: NodeId,
    current_leader: Option<NodeId>,
    pub leader: NodeId,
    pub best: Option<WireCentrality>,
    /// Next hop towards the leader; the leader points at itself.
    pub leader_direction: NodeId,
    /// Live neighbours other than the leader direction.
    pub fg_list: BTreeSet<NodeId>,
    pub child_list: BTreeSet<NodeId>,
    pub candidate: bool,
    pub own_closeness: Option<Closeness>,
    seen: BTreeSet<NodeId>,
}

impl DcdtView {
    pub fn new(self_id: NodeId, current_leader: Option<NodeId>) -> Self {
        DcdtView {
            self_id,
            current_leader,
            leader: self_id,
            best: None,
            leader_direction: self_id,
            fg_list: BTreeSet::new(),
            child_list: BTreeSet::new(),
            candidate: false,
            own_closeness: None,
            seen: BTreeSet::new(),
        }
    }

    /// A settled view for a lone node.
    pub fn solitary(self_id: NodeId) -> Self {
        let mut v = DcdtView::new(self_id, Some(self_id));
        v.candidate = true;
        v.own_closeness = Some(Closeness::ZERO);
        v.best = Some(WireCentrality(0));
        v
    }

    pub fn self_id(&self) -> NodeId {
        self.self_id
    }

    pub fn is_leader(&self) -> bool {
        self.leader == self.self_id
    }

    fn beats_holder(&self, challenger: NodeId) -> bool {
        if Some(challenger) == self.current_leader {
            true
        } else if Some(self.leader) == self.current_leader {
            false
        } else {
            challenger < self.leader
        }
    }

    fn prefers(&self, candidate: NodeId, c: WireCentrality) -> bool {
        match self.best {
            None => true,
            Some(b) => c > b || (c == b && self.beats_holder(candidate)),
        }
    }

    /// Decides candidacy from the recorded weights and, if a candidate,
    /// announces itself to every live neighbour.
    pub fn begin_phase2(&mut self, state: &ElectionState) -> Vec<Outgoing> {
        self.candidate = state.decide_candidacy();
        if !self.candidate {
            return Vec::new();
        }
        let c = state.closeness();
        let wc = WireCentrality::from_closeness(&c);
        self.own_closeness = Some(c);
        self.seen.insert(self.self_id);
        if self.prefers(self.self_id, wc) {
            self.leader = self.self_id;
            self.best = Some(wc);
            self.leader_direction = self.self_id;
        }
        let msg = ProtocolMessage::Inform { candidate: self.self_id, centrality: wc };
        state.live_neighbors().map(|to| Outgoing { to, msg: msg.clone() }).collect()
    }

    /// First copy of each candidate's INFORM is relayed over live links;
    /// the sender of the first copy becomes the direction if it wins.
    pub fn handle_inform(
        &mut self,
        state: &ElectionState,
        from: NodeId,
        candidate: NodeId,
        centrality: WireCentrality,
    ) -> Result<Vec<Outgoing>, ProtocolFault> {
        if !state.is_neighbor(from) {
            return Err(ProtocolFault::UnknownNeighbor(from));
        }
        if !self.seen.insert(candidate) {
            return Ok(Vec::new());
        }
        if self.prefers(candidate, centrality) {
            self.leader = candidate;
            self.best = Some(centrality);
            self.leader_direction = from;
        }
        let msg = ProtocolMessage::Inform { candidate, centrality };
        Ok(state.live_neighbors().filter(|&z| z != from).map(|to| Outgoing { to, msg: msg.clone() }).collect())
    }

    /// Fixes FG_LIST and subscribes towards the leader.
    pub fn finalize(&mut self, state: &ElectionState) -> Vec<Outgoing> {
        let direction = self.leader_direction;
        self.fg_list = state.live_neighbors().filter(|&y| y != direction).collect();
        let mut out = Vec::with_capacity(self.fg_list.len() + 1);
        if direction != self.self_id {
            out.push(Outgoing { to: direction, msg: ProtocolMessage::subs() });
        }
        out.extend(self.fg_list.iter().map(|&to| Outgoing { to, msg: ProtocolMessage::usubs() }));
        out
    }

    pub fn handle_subscription(
        &mut self,
        state: &ElectionState,
        from: NodeId,
        subscribe: bool,
    ) -> Result<(), ProtocolFault> {
        if !state.is_neighbor(from) {
            return Err(ProtocolFault::UnknownNeighbor(from));
        }
        if subscribe {
            self.child_list.insert(from);
        } else {
            self.child_list.remove(&from);
        }
        Ok(())
    }
}
