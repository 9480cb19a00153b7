//! Joins, departures and the leader's re-election trigger.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::election::{superior, ElectionState, NeighborLedger};
use crate::overlay::{DelayMicros, NodeId, OverlayError, OverlayGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MembershipError {
    #[error("contact {0} is not a live node")]
    NoLiveContact(NodeId),
    #[error("no free node id")]
    IdSpaceExhausted,
    #[error(transparent)]
    Overlay(#[from] OverlayError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Decision {
    BroadcastOnly,
    Reelect,
}

/// A JOIN or LEAVE as seen by the leader.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Notice {
    pub node: NodeId,
    /// Leader's neighbour the notice arrived from; equals `node` when the
    /// subject is directly attached to the leader.
    pub via: NodeId,
    pub link_delay: DelayMicros,
    pub path_delay: DelayMicros,
}

impl Notice {
    pub fn is_direct(&self) -> bool {
        self.via == self.node
    }
}

/// Result of a bootstrap: the new id and the links that were created.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Joined {
    pub id: NodeId,
    pub links: Vec<(NodeId, DelayMicros)>,
}

/// Adds a node to `g` under the smallest unused id and links it to
/// `min(attach, |V|)` distinct live nodes picked uniformly at random.
pub fn bootstrap_join<R: Rng + ?Sized>(
    g: &mut OverlayGraph,
    contact: NodeId,
    attach: usize,
    delays: RangeInclusive<u64>,
    rng: &mut R,
) -> Result<Joined, MembershipError> {
    if !g.contains(contact) {
        return Err(MembershipError::NoLiveContact(contact));
    }
    if attach == 0 {
        return Err(OverlayError::ZeroAttachDegree.into());
    }
    if delays.is_empty() {
        return Err(OverlayError::EmptyDelayRange.into());
    }
    let id = g.smallest_unused_id().ok_or(MembershipError::IdSpaceExhausted)?;
    let live: Vec<NodeId> = g.nodes().collect();
    let k = attach.min(live.len());
    let mut picked: Vec<NodeId> = index::sample(rng, live.len(), k).into_iter().map(|i| live[i]).collect();
    picked.sort();
    g.add_node(id)?;
    let mut links = Vec::with_capacity(k);
    for peer in picked {
        let d = DelayMicros(rng.random_range(delays.clone()));
        g.add_edge(id, peer, d)?;
        links.push((peer, d));
    }
    Ok(Joined { id, links })
}

/// Node that restarts the election after the leader is gone: the former
/// neighbour with the highest remaining degree, ties to the lowest id.
pub fn recovery_initiator(g: &OverlayGraph, former_neighbors: &[NodeId]) -> Option<NodeId> {
    former_neighbors
        .iter()
        .copied()
        .filter(|v| g.contains(*v))
        .max_by(|a, b| g.degree(*a).cmp(&g.degree(*b)).then(b.cmp(a)))
}

/// The leader's copy of its branch weights, kept current between elections.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeaderBook {
    pub leader: NodeId,
    pub n: usize,
    pub links: BTreeMap<NodeId, NeighborLedger>,
}

impl LeaderBook {
    pub fn from_state(state: &ElectionState) -> Self {
        LeaderBook {
            leader: state.self_id(),
            n: state.n(),
            links: state.ledgers().iter().filter(|(_, l)| !l.dead).map(|(y, l)| (*y, *l)).collect(),
        }
    }

    fn all_strictly_superior(&self) -> bool {
        self.links.iter().all(|(&y, l)| {
            let delta = l.delta();
            delta.signum() > 0 && superior(self.leader, y, delta, Some(self.leader))
        })
    }

    /// Applies every notice of one join. Only a single-link join straight
    /// onto the leader can leave the leader and its tree unchanged.
    pub fn apply_join(&mut self, node: NodeId, notices: &[Notice]) -> Decision {
        let old_n = self.n;
        self.n += 1;
        let direct = notices.iter().find(|m| m.is_direct()).copied();
        for l in self.links.values_mut() {
            l.outbound += 1;
        }
        for m in notices.iter().filter(|m| !m.is_direct()) {
            if let Some(l) = self.links.get_mut(&m.via) {
                l.outbound = l.outbound.saturating_sub(1);
                l.inbound += 1;
            }
        }
        if let Some(m) = direct {
            let mut l = NeighborLedger::fresh(m.link_delay);
            l.outbound = old_n as u32;
            l.inbound = 1;
            self.links.insert(node, l);
        }
        if notices.len() == 1 && direct.is_some() && self.all_strictly_superior() {
            Decision::BroadcastOnly
        } else {
            Decision::Reelect
        }
    }

    /// Applies a departure; only a system shrinking to one node skips
    /// the election.
    pub fn apply_leave(&mut self, notice: Notice) -> Decision {
        self.n = self.n.saturating_sub(1);
        if self.links.remove(&notice.node).is_none() {
            if let Some(l) = self.links.get_mut(&notice.via) {
                l.inbound = l.inbound.saturating_sub(1);
            }
        }
        for (y, l) in self.links.iter_mut() {
            if *y != notice.via {
                l.outbound = l.outbound.saturating_sub(1);
            }
        }
        if self.n <= 1 {
            Decision::BroadcastOnly
        } else {
            Decision::Reelect
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(nodes: &[u16], edges: &[(u16, u16, u64)]) -> OverlayGraph {
        OverlayGraph::from_parts(
            nodes.iter().map(|&v| NodeId(v)),
            edges.iter().map(|&(a, b, d)| (NodeId(a), NodeId(b), DelayMicros(d))),
        )
        .unwrap()
    }

    #[test]
    fn joiner_takes_smallest_unused_id() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = graph(&[0], &[]);
        let j = bootstrap_join(&mut g, NodeId(0), 1, 1..=50, &mut rng).unwrap();
        assert_eq!(j.id, NodeId(1));
        let mut g = graph(&[0, 1, 3], &[(0, 1, 1), (1, 3, 1)]);
        let j = bootstrap_join(&mut g, NodeId(0), 1, 1..=50, &mut rng).unwrap();
        assert_eq!(j.id, NodeId(2));
    }

    #[test]
    fn attach_degree_sets_link_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut g = crate::overlay::generate_overlay(10, 2, 1..=20, 3).unwrap();
        let before = g.edge_count();
        let j = bootstrap_join(&mut g, NodeId(0), 2, 1..=50, &mut rng).unwrap();
        assert_eq!(j.links.len(), 2);
        assert_eq!(g.edge_count(), before + 2);
        assert_eq!(g.degree(j.id), 2);
    }

    #[test]
    fn join_needs_live_contact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = graph(&[0], &[]);
        assert_eq!(
            bootstrap_join(&mut g, NodeId(4), 1, 1..=50, &mut rng),
            Err(MembershipError::NoLiveContact(NodeId(4)))
        );
    }

    #[test]
    fn initiator_is_highest_degree_then_lowest_id() {
        let g = graph(&[1, 2, 3, 4], &[(1, 2, 1), (2, 3, 1), (3, 4, 1), (1, 3, 1)]);
        assert_eq!(recovery_initiator(&g, &[1, 2, 4].map(NodeId)), Some(NodeId(1)));
        assert_eq!(recovery_initiator(&g, &[4, 3].map(NodeId)), Some(NodeId(3)));
        assert_eq!(recovery_initiator(&g, &[]), None);
    }

    fn book(n: usize, links: &[(u16, u32, u32, u64)]) -> LeaderBook {
        LeaderBook {
            leader: NodeId(0),
            n,
            links: links
                .iter()
                .map(|&(y, o, i, d)| {
                    let mut l = NeighborLedger::fresh(DelayMicros(d));
                    l.outbound = o;
                    l.inbound = i;
                    (NodeId(y), l)
                })
                .collect(),
        }
    }

    #[test]
    fn leaf_on_star_centre_is_broadcast_only() {
        // star centre 0 with leaves 1..=4
        let mut b = book(5, &[(1, 4, 1, 1), (2, 4, 1, 1), (3, 4, 1, 1), (4, 4, 1, 1)]);
        let m = Notice { node: NodeId(5), via: NodeId(5), link_delay: DelayMicros(1), path_delay: DelayMicros(1) };
        assert_eq!(b.apply_join(NodeId(5), &[m]), Decision::BroadcastOnly);
        assert_eq!(b.n, 6);
        assert_eq!(b.links[&NodeId(5)].outbound, 5);
        assert_eq!(b.links[&NodeId(1)].outbound, 5);
    }

    #[test]
    fn join_behind_a_branch_reelects() {
        // path 0-1-2 seen from centre 1, node 3 joins at 2
        let mut b = book(3, &[(0, 2, 1, 1), (2, 2, 1, 1)]);
        b.leader = NodeId(1);
        let m = Notice { node: NodeId(3), via: NodeId(2), link_delay: DelayMicros(1), path_delay: DelayMicros(2) };
        assert_eq!(b.apply_join(NodeId(3), &[m]), Decision::Reelect);
        let l = b.links[&NodeId(2)];
        assert_eq!((l.outbound, l.inbound), (2, 2));
        assert!(l.delta().signum() <= 0);
    }

    #[test]
    fn multi_link_join_reelects() {
        let mut b = book(5, &[(1, 4, 1, 1), (2, 4, 1, 1), (3, 4, 1, 1), (4, 4, 1, 1)]);
        let a = Notice { node: NodeId(5), via: NodeId(5), link_delay: DelayMicros(1), path_delay: DelayMicros(1) };
        let c = Notice { node: NodeId(5), via: NodeId(1), link_delay: DelayMicros(1), path_delay: DelayMicros(2) };
        assert_eq!(b.apply_join(NodeId(5), &[a, c]), Decision::Reelect);
    }

    #[test]
    fn leave_down_to_one_node_skips_election() {
        let mut b = book(2, &[(1, 1, 1, 3)]);
        let m = Notice { node: NodeId(1), via: NodeId(1), link_delay: DelayMicros(3), path_delay: DelayMicros(3) };
        assert_eq!(b.apply_leave(m), Decision::BroadcastOnly);
        assert!(b.links.is_empty());
        let mut b = book(3, &[(1, 2, 1, 1), (2, 2, 1, 1)]);
        let m = Notice { node: NodeId(1), via: NodeId(1), link_delay: DelayMicros(1), path_delay: DelayMicros(1) };
        assert_eq!(b.apply_leave(m), Decision::Reelect);
    }
}
