use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::membership::Decision;
use crate::overlay::{NodeId, OverlayGraph};
use crate::wire::MessageKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceLevel {
    /// Every delivery with its frame bytes.
    #[default]
    Full,
    /// Actions, phases and outcomes only.
    Summary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Phase {
    Phase1,
    Phase2,
    Subscribe,
    Timed,
    JoinNotice,
    LeaveNotice,
    Reparent,
    Broadcast,
    Recovery,
    Idle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "event", rename_all = "snake_case"))]
pub enum TraceEvent {
    Deliver { from: NodeId, to: NodeId, kind: MessageKind, frame: String },
    Action { action: String },
    Phase { phase: Phase },
    Decision { leader: NodeId, subject: NodeId, decision: Decision },
    Reparent { node: NodeId, parent: Option<NodeId> },
    Elected { leader: Option<NodeId>, candidates: Vec<NodeId>, election_sends: u64 },
    Fault { node: NodeId, detail: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    pub time: u64,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub event: TraceEvent,
}

/// Messages sent, by kind.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MessageCounts(pub BTreeMap<MessageKind, u64>);

impl MessageCounts {
    pub fn add(&mut self, kind: MessageKind) {
        *self.0.entry(kind).or_default() += 1;
    }

    pub fn get(&self, kind: MessageKind) -> u64 {
        self.0.get(&kind).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

/// Outcome of one election round.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElectionRecord {
    pub started_at: u64,
    pub finished_at: u64,
    pub n: usize,
    pub edges: usize,
    /// Set when every node agrees on the same leader.
    pub leader: Option<NodeId>,
    pub candidates: Vec<NodeId>,
    pub election_sends: u64,
    pub inform_sends: u64,
    pub control_sends: u64,
}

impl ElectionRecord {
    /// The `n * |E|` reference for ELECTION traffic.
    pub fn reference(&self) -> u64 {
        self.n as u64 * self.edges as u64
    }
}

/// Topology and leader once a scripted action has settled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub time: u64,
    pub graph: OverlayGraph,
    pub leader: Option<NodeId>,
}
