//! Brute-force ground truth over an [`OverlayGraph`].
//!
//! Everything here is computed centrally from the full topology, never from
//! protocol state, so it can be used to judge the distributed election.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::overlay::{DelayMicros, NodeId, OverlayError, OverlayGraph};
use crate::ratio::Closeness;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    nodes: Vec<NodeId>,
    dist: BTreeMap<(NodeId, NodeId), DelayMicros>,
    pub closeness: BTreeMap<NodeId, Closeness>,
    pub eccentricity: BTreeMap<NodeId, DelayMicros>,
    pub ideal_leader: NodeId,
    /// Shortest-delay tree rooted at `ideal_leader`; the root maps to itself.
    pub spt_parent: BTreeMap<NodeId, NodeId>,
}

impl OracleResult {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Shortest path delay between two nodes of the graph.
    pub fn dist(&self, a: NodeId, b: NodeId) -> DelayMicros {
        self.dist[&(a, b)]
    }

    /// `sum_y dist(y, x)`.
    pub fn delay_sum(&self, x: NodeId) -> u64 {
        self.nodes.iter().map(|&y| self.dist(y, x).0).sum()
    }

    /// Nodes tied with the maximum closeness.
    pub fn best_nodes(&self) -> Vec<NodeId> {
        let best = self.closeness[&self.ideal_leader];
        self.closeness.iter().filter(|(_, c)| **c == best).map(|(v, _)| *v).collect()
    }

    /// Shortest-delay parent of every node in a tree rooted at `root`,
    /// picking the lowest-id next hop on ties.
    pub fn spt_rooted_at(&self, g: &OverlayGraph, root: NodeId) -> BTreeMap<NodeId, NodeId> {
        let mut parent = BTreeMap::new();
        for &x in &self.nodes {
            if x == root {
                parent.insert(x, x);
                continue;
            }
            let target = self.dist(root, x);
            let hop = g
                .neighbors(x)
                .find(|&(p, d)| self.dist(root, p).plus(d) == target)
                .map(|(p, _)| p)
                .expect("connected graph has a shortest-path predecessor");
            parent.insert(x, hop);
        }
        parent
    }
}

/// Single-source shortest delays by Dijkstra.
pub fn shortest_delays(g: &OverlayGraph, source: NodeId) -> BTreeMap<NodeId, DelayMicros> {
    let mut dist: BTreeMap<NodeId, DelayMicros> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((DelayMicros::ZERO, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist.contains_key(&v) {
            continue;
        }
        dist.insert(v, d);
        for (w, link) in g.neighbors(v) {
            if !dist.contains_key(&w) {
                heap.push(Reverse((d.plus(link), w)));
            }
        }
    }
    dist
}

/// Argmax of closeness. Ties go to `current_leader` when it is among the
/// tied nodes, otherwise to the lowest id.
pub fn pick_leader(closeness: &BTreeMap<NodeId, Closeness>, current_leader: Option<NodeId>) -> Option<NodeId> {
    let best = closeness.values().max()?;
    let tied: Vec<NodeId> = closeness.iter().filter(|(_, c)| *c == best).map(|(v, _)| *v).collect();
    match current_leader {
        Some(l) if tied.contains(&l) => Some(l),
        _ => tied.first().copied(),
    }
}

pub fn oracle_all_pairs(g: &OverlayGraph) -> Result<OracleResult, OverlayError> {
    oracle_with_leader(g, None)
}

/// Like [`oracle_all_pairs`], with `current_leader` used in the tie rule.
pub fn oracle_with_leader(g: &OverlayGraph, current_leader: Option<NodeId>) -> Result<OracleResult, OverlayError> {
    if g.node_count() == 0 {
        return Err(OverlayError::Empty);
    }
    if !g.is_connected() {
        return Err(OverlayError::Disconnected);
    }
    let nodes: Vec<NodeId> = g.nodes().collect();
    let n = nodes.len() as u64;
    let mut dist = BTreeMap::new();
    for &s in &nodes {
        for (t, d) in shortest_delays(g, s) {
            dist.insert((s, t), d);
        }
    }
    let mut closeness = BTreeMap::new();
    let mut eccentricity = BTreeMap::new();
    for &x in &nodes {
        let sum: u64 = nodes.iter().map(|&y| dist[&(y, x)].0).sum();
        closeness.insert(x, Closeness::new(n - 1, sum));
        let ecc = nodes.iter().map(|&y| dist[&(y, x)]).max().unwrap_or_default();
        eccentricity.insert(x, ecc);
    }
    let ideal_leader = pick_leader(&closeness, current_leader).expect("non-empty graph");
    let mut result = OracleResult { nodes, dist, closeness, eccentricity, ideal_leader, spt_parent: BTreeMap::new() };
    result.spt_parent = result.spt_rooted_at(g, ideal_leader);
    Ok(result)
}

/// Kruskal MST by delay; equal delays are taken in ascending `(a, b)` order.
pub fn oracle_mst(g: &OverlayGraph) -> Result<Vec<(NodeId, NodeId, DelayMicros)>, OverlayError> {
    if g.node_count() == 0 {
        return Err(OverlayError::Empty);
    }
    if !g.is_connected() {
        return Err(OverlayError::Disconnected);
    }
    let mut edges = g.edges();
    edges.sort_by_key(|&(a, b, d)| (d, a, b));
    let index: BTreeMap<NodeId, usize> = g.nodes().enumerate().map(|(i, v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut tree = Vec::with_capacity(index.len().saturating_sub(1));
    for (a, b, d) in edges {
        let ra = find(&mut parent, index[&a]);
        let rb = find(&mut parent, index[&b]);
        if ra != rb {
            parent[ra] = rb;
            tree.push((a, b, d));
        }
    }
    Ok(tree)
}

/// Closeness of `x` when delays are measured along the given spanning tree.
pub fn tree_closeness(tree: &[(NodeId, NodeId, DelayMicros)], x: NodeId) -> Result<Closeness, OverlayError> {
    let mut g = OverlayGraph::new();
    for &(a, b, _) in tree {
        for v in [a, b] {
            if !g.contains(v) {
                g.add_node(v)?;
            }
        }
    }
    if !g.contains(x) {
        g.add_node(x)?;
    }
    for &(a, b, d) in tree {
        g.add_edge(a, b, d)?;
    }
    if !g.is_connected() {
        return Err(OverlayError::Disconnected);
    }
    let sum: u64 = shortest_delays(&g, x).values().map(|d| d.0).sum();
    Ok(Closeness::new(g.node_count() as u64 - 1, sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn graph(n: u16, edges: &[(u16, u16, u64)]) -> OverlayGraph {
        OverlayGraph::from_parts(
            (0..n).map(NodeId),
            edges.iter().map(|&(a, b, d)| (NodeId(a), NodeId(b), DelayMicros(d))),
        )
        .unwrap()
    }

    #[test]
    fn two_nodes() {
        let o = oracle_all_pairs(&graph(2, &[(0, 1, 4)])).unwrap();
        assert_eq!(o.closeness[&NodeId(0)], Closeness::new(1, 4));
        assert_eq!(o.closeness[&NodeId(1)], Closeness::new(1, 4));
        assert_eq!(o.ideal_leader, NodeId(0));
    }

    #[test]
    fn star() {
        let o = oracle_all_pairs(&graph(5, &[(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1)])).unwrap();
        assert_eq!(o.closeness[&NodeId(0)], Closeness::new(1, 1));
        // leaf: 1 to the centre, 2 to each of the three other leaves
        assert_eq!(o.closeness[&NodeId(3)], Closeness::new(4, 7));
        assert_eq!(o.ideal_leader, NodeId(0));
        assert_eq!(o.eccentricity[&NodeId(0)], DelayMicros(1));
        assert_eq!(o.eccentricity[&NodeId(3)], DelayMicros(2));
    }

    #[test]
    fn path_of_three() {
        let o = oracle_all_pairs(&graph(3, &[(0, 1, 1), (1, 2, 1)])).unwrap();
        assert_eq!(o.closeness[&NodeId(1)], Closeness::new(1, 1));
        assert_eq!(o.closeness[&NodeId(0)], Closeness::new(2, 3));
        assert_eq!(o.ideal_leader, NodeId(1));
        assert_eq!(o.spt_parent[&NodeId(0)], NodeId(1));
        assert_eq!(o.spt_parent[&NodeId(2)], NodeId(1));
    }

    #[test]
    fn tie_prefers_current_leader() {
        let g = graph(2, &[(0, 1, 4)]);
        assert_eq!(oracle_with_leader(&g, Some(NodeId(1))).unwrap().ideal_leader, NodeId(1));
        assert_eq!(oracle_with_leader(&g, Some(NodeId(7))).unwrap().ideal_leader, NodeId(0));
    }

    #[test]
    fn disconnected_is_rejected() {
        let mut g = OverlayGraph::new();
        g.add_node(NodeId(0)).unwrap();
        g.add_node(NodeId(1)).unwrap();
        assert_eq!(oracle_all_pairs(&g), Err(OverlayError::Disconnected));
        assert_eq!(oracle_mst(&g), Err(OverlayError::Disconnected));
    }

    #[test]
    fn mst_examples() {
        let t = oracle_mst(&graph(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 5)])).unwrap();
        assert_eq!(t, vec![(NodeId(0), NodeId(1), DelayMicros(1)), (NodeId(1), NodeId(2), DelayMicros(1))]);
        let t = oracle_mst(&graph(2, &[(0, 1, 3)])).unwrap();
        assert_eq!(t.len(), 1);
        let t = oracle_mst(&graph(3, &[(0, 1, 2), (1, 2, 2), (0, 2, 2)])).unwrap();
        assert_eq!(t, vec![(NodeId(0), NodeId(1), DelayMicros(2)), (NodeId(0), NodeId(2), DelayMicros(2))]);
    }

    #[test]
    fn spt_uses_lowest_next_hop() {
        // diamond 0-1-3, 0-2-3 with equal delays; root 0
        let g = graph(4, &[(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)]);
        let o = oracle_all_pairs(&g).unwrap();
        let spt = o.spt_rooted_at(&g, NodeId(0));
        assert_eq!(spt[&NodeId(3)], NodeId(1));
    }
}
