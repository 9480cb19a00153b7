//! Evaluation metrics computed from oracle distances.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use thiserror::Error;

use crate::oracle::{oracle_all_pairs, OracleResult};
use crate::overlay::{DelayMicros, NodeId, OverlayError, OverlayGraph};
use crate::ratio::Closeness;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("waiting time needs at least one delay")]
    NoDelays,
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
}

/// `mean + 3 * population std-dev`, rounded up to whole microseconds.
///
/// Evaluated exactly: the result is the least integer `w` with
/// `n*w - S1 >= 0` and `(n*w - S1)^2 >= 9 * (n*S2 - S1^2)`.
pub fn waiting_time(delays: &[DelayMicros]) -> Result<DelayMicros, MetricsError> {
    if delays.is_empty() {
        return Err(MetricsError::NoDelays);
    }
    let n = delays.len() as u128;
    let s1: u128 = delays.iter().map(|d| d.0 as u128).sum();
    let s2: u128 = delays.iter().map(|d| (d.0 as u128) * (d.0 as u128)).sum();
    let q = n * s2 - s1 * s1;
    let ok = |w: u128| {
        let lhs = n * w;
        lhs >= s1 && {
            let e = lhs - s1;
            e.checked_mul(e).is_none_or(|sq| sq >= 9 * q)
        }
    };
    // mean is a lower bound, mean + 3*max is an upper one
    let mut lo = s1 / n;
    let max = delays.iter().map(|d| d.0 as u128).max().unwrap_or(0);
    let mut hi = lo + 3 * max + 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(DelayMicros(lo.min(u64::MAX as u128) as u64))
}

/// Average and maximum delay from every other node to `at`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchDelays {
    pub avg_us: f64,
    pub max_us: u64,
}

pub fn branch_delays(o: &OracleResult, at: NodeId) -> Result<BranchDelays, MetricsError> {
    if !o.closeness.contains_key(&at) {
        return Err(MetricsError::UnknownNode(at));
    }
    let peers = o.nodes().len().saturating_sub(1);
    let sum = o.delay_sum(at);
    Ok(BranchDelays { avg_us: if peers == 0 { 0.0 } else { sum as f64 / peers as f64 }, max_us: o.eccentricity[&at].0 })
}

/// One growth step of a static-vs-dynamic comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub n: usize,
    pub leader: NodeId,
    pub static_delays: BranchDelays,
    pub dynamic_delays: BranchDelays,
    /// Exact `dynamic avg < static avg`.
    pub strictly_better: bool,
    /// Exact `dynamic avg <= static avg`.
    pub no_worse: bool,
}

pub fn comparison_row(g: &OverlayGraph, static_ref: NodeId, leader: NodeId) -> Result<ComparisonRow, MetricsError> {
    if !g.contains(static_ref) {
        return Err(MetricsError::UnknownNode(static_ref));
    }
    if !g.contains(leader) {
        return Err(MetricsError::UnknownNode(leader));
    }
    let o = oracle_all_pairs(g)?;
    let s = o.delay_sum(static_ref);
    let d = o.delay_sum(leader);
    Ok(ComparisonRow {
        n: g.node_count(),
        leader,
        static_delays: branch_delays(&o, static_ref)?,
        dynamic_delays: branch_delays(&o, leader)?,
        strictly_better: d < s,
        no_worse: d <= s,
    })
}

/// Per-node line of a metrics report.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeMetrics {
    pub node: NodeId,
    pub closeness: Closeness,
    pub eccentricity: DelayMicros,
    pub is_candidate: bool,
    pub is_leader: bool,
}

pub fn node_metrics(o: &OracleResult, candidates: &BTreeSet<NodeId>, leader: Option<NodeId>) -> Vec<NodeMetrics> {
    o.nodes()
        .iter()
        .map(|&v| NodeMetrics {
            node: v,
            closeness: o.closeness[&v],
            eccentricity: o.eccentricity[&v],
            is_candidate: candidates.contains(&v),
            is_leader: Some(v) == leader,
        })
        .collect()
}
