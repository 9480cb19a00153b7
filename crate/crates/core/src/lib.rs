//! Leader election by delay-based closeness centrality.
//!
//! Every peer floods an ELECTION message, records shortest path delays and
//! per-link branch weights, and then decides locally whether it is at least
//! as central as each of its neighbours. Candidates flood their closeness
//! and the best one becomes the root of a data collection and distribution
//! tree (DCDT).
//!
//! The crate is `no_std` (it needs `alloc`). It contains:
//!
//! - [`overlay`]: the weighted overlay graph and a seeded topology generator,
//! - [`oracle`]: brute-force ground truth (all pairs delays, closeness, MST),
//! - [`wire`]: the byte-exact message codec,
//! - [`election`]: the per-node protocol state machine,
//! - [`membership`]: join/leave handling at the leader,
//! - [`sim`]: a deterministic discrete-event simulator,
//! - [`metrics`]: waiting time and static-vs-dynamic comparisons,
//! - [`audit`]: checks of a finished run against the oracle.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod audit;
pub mod election;
pub mod membership;
pub mod metrics;
pub mod oracle;
pub mod overlay;
pub mod ratio;
pub mod sim;
pub mod wire;

pub use election::{Class, DcdtView, ElectionState, NeighborLedger, Outgoing, ProtocolFault};
pub use overlay::{DelayMicros, NodeId, OverlayError, OverlayGraph};
pub use ratio::{Closeness, Delta};
pub use wire::{CodecError, ProtocolMessage, WireCentrality};
