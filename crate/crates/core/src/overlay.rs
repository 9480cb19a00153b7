//! Overlay topology: peers, symmetric link delays and a seeded generator.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Peer identifier. Fits the 2-byte Node ID field of every wire message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct NodeId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u16> for NodeId {
    fn from(v: u16) -> Self {
        NodeId(v)
    }
}

/// A delay in integer microseconds. `INFINITE` stands for "not known yet".
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct DelayMicros(pub u64);

impl DelayMicros {
    pub const ZERO: DelayMicros = DelayMicros(0);
    pub const INFINITE: DelayMicros = DelayMicros(u64::MAX);

    pub fn is_infinite(self) -> bool {
        self.0 == u64::MAX
    }

    /// Saturating addition; anything plus infinity stays infinite.
    pub fn plus(self, other: DelayMicros) -> DelayMicros {
        DelayMicros(self.0.saturating_add(other.0))
    }

    pub fn as_u64(self) -> u64 {
        self.0
    }
}

impl fmt::Display for DelayMicros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}us", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OverlayError {
    #[error("an overlay needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("an overlay can hold at most 65536 nodes, got {0}")]
    TooManyNodes(usize),
    #[error("attach degree must be at least 1")]
    ZeroAttachDegree,
    #[error("delay range is empty")]
    EmptyDelayRange,
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {0} is not part of the overlay")]
    UnknownNode(NodeId),
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
    #[error("overlay is not connected")]
    Disconnected,
    #[error("overlay is empty")]
    Empty,
}

/// Undirected overlay `G = (V, E)` with one symmetric delay per link.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OverlayGraph {
    adjacency: BTreeMap<NodeId, BTreeMap<NodeId, DelayMicros>>,
}

impl OverlayGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds and validates a graph. Connectivity is checked as well.
    pub fn from_parts<N, E>(nodes: N, edges: E) -> Result<Self, OverlayError>
    where
        N: IntoIterator<Item = NodeId>,
        E: IntoIterator<Item = (NodeId, NodeId, DelayMicros)>,
    {
        let mut g = OverlayGraph::new();
        for v in nodes {
            g.add_node(v)?;
        }
        for (a, b, d) in edges {
            g.add_edge(a, b, d)?;
        }
        if !g.is_connected() {
            return Err(OverlayError::Disconnected);
        }
        Ok(g)
    }

    pub fn add_node(&mut self, v: NodeId) -> Result<(), OverlayError> {
        if self.adjacency.contains_key(&v) {
            return Err(OverlayError::DuplicateNode(v));
        }
        self.adjacency.insert(v, BTreeMap::new());
        Ok(())
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId, delay: DelayMicros) -> Result<(), OverlayError> {
        if a == b {
            return Err(OverlayError::SelfLoop(a));
        }
        for v in [a, b] {
            if !self.adjacency.contains_key(&v) {
                return Err(OverlayError::UnknownNode(v));
            }
        }
        if self.adjacency[&a].contains_key(&b) {
            return Err(OverlayError::DuplicateEdge(a.min(b), a.max(b)));
        }
        self.adjacency.get_mut(&a).unwrap().insert(b, delay);
        self.adjacency.get_mut(&b).unwrap().insert(a, delay);
        Ok(())
    }

    /// Removes a node and all of its links. Returns its former neighbours.
    pub fn remove_node(&mut self, v: NodeId) -> Result<BTreeMap<NodeId, DelayMicros>, OverlayError> {
        let links = self.adjacency.remove(&v).ok_or(OverlayError::UnknownNode(v))?;
        for nb in links.keys() {
            if let Some(m) = self.adjacency.get_mut(nb) {
                m.remove(&v);
            }
        }
        Ok(links)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.adjacency.contains_key(&v)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.keys().copied()
    }

    /// Neighbours of `v` with their link delays, in ascending id order.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, DelayMicros)> + '_ {
        self.adjacency.get(&v).into_iter().flat_map(|m| m.iter().map(|(k, d)| (*k, *d)))
    }

    pub fn neighbor_map(&self, v: NodeId) -> Option<&BTreeMap<NodeId, DelayMicros>> {
        self.adjacency.get(&v)
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency.get(&v).map_or(0, BTreeMap::len)
    }

    pub fn delay(&self, a: NodeId, b: NodeId) -> Option<DelayMicros> {
        self.adjacency.get(&a)?.get(&b).copied()
    }

    /// Edges as `(a, b, delay)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, DelayMicros)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (&a, m) in &self.adjacency {
            for (&b, &d) in m {
                if a < b {
                    out.push((a, b, d));
                }
            }
        }
        out
    }

    /// Smallest id not currently in use.
    pub fn smallest_unused_id(&self) -> Option<NodeId> {
        let mut expected: u32 = 0;
        for v in self.adjacency.keys() {
            if u32::from(v.0) != expected {
                break;
            }
            expected += 1;
        }
        u16::try_from(expected).ok().map(NodeId)
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.adjacency.keys().next() else {
            return true;
        };
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(start);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for (w, _) in self.neighbors(v) {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == self.adjacency.len()
    }

    /// Same topology with every delay multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> OverlayGraph {
        let mut g = self.clone();
        for m in g.adjacency.values_mut() {
            for d in m.values_mut() {
                *d = DelayMicros(d.0 * factor);
            }
        }
        g
    }
}

/// Random connected overlay: node `i` links to `min(i, attach_degree)`
/// distinct earlier nodes, each link delay drawn uniformly from `delays`.
pub fn generate_overlay(
    n: usize,
    attach_degree: usize,
    delays: RangeInclusive<u64>,
    seed: u64,
) -> Result<OverlayGraph, OverlayError> {
    if n < 2 {
        return Err(OverlayError::TooFewNodes(n));
    }
    if n > usize::from(u16::MAX) + 1 {
        return Err(OverlayError::TooManyNodes(n));
    }
    if attach_degree == 0 {
        return Err(OverlayError::ZeroAttachDegree);
    }
    if delays.is_empty() {
        return Err(OverlayError::EmptyDelayRange);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = OverlayGraph::new();
    for i in 0..n {
        let v = NodeId(i as u16);
        g.add_node(v)?;
        let k = i.min(attach_degree);
        if k == 0 {
            continue;
        }
        let mut targets: Vec<usize> = index::sample(&mut rng, i, k).into_vec();
        targets.sort_unstable();
        for t in targets {
            let d = rng.random_range(delays.clone());
            g.add_edge(v, NodeId(t as u16), DelayMicros(d))?;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_generation_is_forced() {
        let g = generate_overlay(2, 1, 5..=5, 0).unwrap();
        assert_eq!(g.edges(), alloc::vec![(NodeId(0), NodeId(1), DelayMicros(5))]);
    }

    #[test]
    fn fifty_nodes_degree_two() {
        let g = generate_overlay(50, 2, 1..=20, 7).unwrap();
        assert_eq!(g.node_count(), 50);
        assert!(g.is_connected());
        // node 1 adds one link, nodes 2..49 add two each
        assert_eq!(g.edge_count(), 1 + 2 * 48);
        assert!(g.edge_count() <= 97);
        for (_, _, d) in g.edges() {
            assert!((1..=20).contains(&d.0));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(generate_overlay(1, 1, 1..=2, 0), Err(OverlayError::TooFewNodes(1)));
        assert_eq!(generate_overlay(3, 0, 1..=2, 0), Err(OverlayError::ZeroAttachDegree));
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 5..=4;
        assert_eq!(generate_overlay(3, 1, empty, 0), Err(OverlayError::EmptyDelayRange));
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_overlay(30, 3, 1..=50, 99).unwrap();
        let b = generate_overlay(30, 3, 1..=50, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_overlay(30, 3, 1..=50, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn edge_validation() {
        let mut g = OverlayGraph::new();
        g.add_node(NodeId(0)).unwrap();
        g.add_node(NodeId(1)).unwrap();
        assert_eq!(g.add_edge(NodeId(0), NodeId(0), DelayMicros(1)), Err(OverlayError::SelfLoop(NodeId(0))));
        g.add_edge(NodeId(0), NodeId(1), DelayMicros(1)).unwrap();
        assert!(matches!(g.add_edge(NodeId(1), NodeId(0), DelayMicros(2)), Err(OverlayError::DuplicateEdge(..))));
        assert!(matches!(g.add_edge(NodeId(0), NodeId(9), DelayMicros(2)), Err(OverlayError::UnknownNode(_))));
        let disconnected = OverlayGraph::from_parts([NodeId(0), NodeId(1)], []);
        assert_eq!(disconnected, Err(OverlayError::Disconnected));
    }

    #[test]
    fn smallest_unused() {
        let g = OverlayGraph::from_parts(
            [NodeId(0), NodeId(1), NodeId(3)],
            [(NodeId(0), NodeId(1), DelayMicros(1)), (NodeId(1), NodeId(3), DelayMicros(1))],
        )
        .unwrap();
        assert_eq!(g.smallest_unused_id(), Some(NodeId(2)));
    }
}
