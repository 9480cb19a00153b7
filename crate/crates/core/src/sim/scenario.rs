use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;

use thiserror::Error;

use crate::election::ProtocolFault;
use crate::membership::MembershipError;
use crate::overlay::{NodeId, OverlayError, OverlayGraph};
use crate::wire::CodecError;

/// How a node decides that a phase is over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    /// Phases advance when no message is in flight anywhere.
    #[default]
    Quiescence,
    /// Each node waits `k * max(D_sx)` on its own clock; `k` is in
    /// thousandths.
    Timed { k_permille: u32 },
}

pub const DEFAULT_K_PERMILLE: u32 = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Action {
    StartElection,
    /// A new node bootstraps through `contact` (random live node if
    /// `None`) and links to `attach` peers.
    Join {
        contact: Option<NodeId>,
        attach: usize,
    },
    Leave {
        node: NodeId,
    },
    FailLeader,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::StartElection => write!(f, "start_election"),
            Action::Join { contact: Some(c), attach } => write!(f, "join contact={c} attach={attach}"),
            Action::Join { contact: None, attach } => write!(f, "join attach={attach}"),
            Action::Leave { node } => write!(f, "leave node={node}"),
            Action::FailLeader => write!(f, "fail_leader"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScriptedAction {
    /// Earliest start time in microseconds; actions wait for the system
    /// to settle.
    pub at: u64,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub graph: OverlayGraph,
    pub actions: Vec<ScriptedAction>,
    pub mode: Mode,
    pub seed: u64,
    /// Delay range for links created by joins.
    pub join_delay: RangeInclusive<u64>,
}

impl Scenario {
    pub fn new(graph: OverlayGraph, seed: u64) -> Self {
        Scenario { graph, actions: Vec::new(), mode: Mode::Quiescence, seed, join_delay: 1..=50 }
    }

    /// Initial election on `graph`.
    pub fn election(graph: OverlayGraph, seed: u64) -> Self {
        let mut s = Scenario::new(graph, seed);
        s.push(0, Action::StartElection);
        s
    }

    /// A single node that elects itself, then `joins` nodes arriving one
    /// per `interval` microseconds.
    pub fn sequential_joins(joins: usize, attach: usize, interval: u64, seed: u64) -> Self {
        let mut g = OverlayGraph::new();
        g.add_node(NodeId(0)).expect("fresh graph");
        let mut s = Scenario::election(g, seed);
        for i in 1..=joins {
            s.push(i as u64 * interval, Action::Join { contact: None, attach });
        }
        s
    }

    pub fn push(&mut self, at: u64, action: Action) -> &mut Self {
        self.actions.push(ScriptedAction { at, action });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("node {0} is not live")]
    UnknownNode(NodeId),
    #[error("removing node {0} would disconnect the overlay")]
    Partition(NodeId),
    #[error("no settled leader")]
    NoLeader,
    #[error("node {node}: {fault}")]
    Protocol { node: NodeId, fault: ProtocolFault },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Membership(#[from] MembershipError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
}
