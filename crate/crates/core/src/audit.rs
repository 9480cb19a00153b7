//! Cross-checks of a settled simulation against the brute-force oracle.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::election::{classify, Class};
use crate::oracle::{oracle_with_leader, OracleResult};
use crate::overlay::{DelayMicros, NodeId, OverlayError};
use crate::sim::Simulator;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    LeaderMismatch { elected: Option<NodeId>, oracle: NodeId },
    NoCandidate,
    CandidateNotSuperior { x: NodeId, y: NodeId },
    Distance { s: NodeId, x: NodeId, got: DelayMicros, want: DelayMicros },
    Asymmetric { x: NodeId, y: NodeId, inbound: u32, outbound: u32 },
    BranchWeight { x: NodeId, y: NodeId, outbound: u32, inbound: u32, a: u32, b: u32 },
    DeadLinkWeights { x: NodeId, y: NodeId },
    NotSpanningTree { x: NodeId },
    TreeDelay { x: NodeId, got: DelayMicros, want: DelayMicros },
    StaleCount { x: NodeId, n: usize, want: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LeaderMismatch { elected, oracle } => write!(f, "elected {elected:?}, oracle {oracle}"),
            Violation::NoCandidate => write!(f, "no candidate"),
            Violation::CandidateNotSuperior { x, y } => write!(f, "candidate {x} not superior to {y}"),
            Violation::Distance { s, x, got, want } => write!(f, "D[{s}->{x}] = {got}, want {want}"),
            Violation::Asymmetric { x, y, inbound, outbound } => {
                write!(f, "I[{x},{y}] = {inbound} but O[{y},{x}] = {outbound}")
            }
            Violation::BranchWeight { x, y, outbound, inbound, a, b } => {
                write!(f, "link ({x},{y}): O={outbound} I={inbound}, |A|={a} |B|={b}")
            }
            Violation::DeadLinkWeights { x, y } => write!(f, "dead link ({x},{y}) keeps weights"),
            Violation::NotSpanningTree { x } => write!(f, "{x} does not reach the leader"),
            Violation::TreeDelay { x, got, want } => write!(f, "tree delay to {x} = {got}, want {want}"),
            Violation::StaleCount { x, n, want } => write!(f, "node {x} has n = {n}, want {want}"),
        }
    }
}

/// What was checked and what failed.
#[derive(Clone, Debug)]
pub struct Audit {
    pub oracle: OracleResult,
    pub elected: Option<NodeId>,
    pub candidates: BTreeSet<NodeId>,
    /// Some pair of nodes is joined by two distinct shortest paths.
    pub ambiguous_paths: bool,
    pub violations: Vec<Violation>,
}

impl Audit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn any(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

/// Checks the latest election of `sim`. Phase 1 bookkeeping is only
/// meaningful right after an election, before membership changes.
pub fn audit_election(sim: &Simulator) -> Result<Audit, OverlayError> {
    let g = sim.graph();
    let current = sim.nodes().values().next().and_then(|r| r.election.current_leader());
    let oracle = oracle_with_leader(g, current)?;
    let elected = sim.leader();
    let candidates = sim.candidates();
    let mut v = Vec::new();

    if elected != Some(oracle.ideal_leader) {
        v.push(Violation::LeaderMismatch { elected, oracle: oracle.ideal_leader });
    }
    if candidates.is_empty() && g.node_count() > 1 {
        v.push(Violation::NoCandidate);
    }
    let nodes: Vec<NodeId> = g.nodes().collect();
    let n = nodes.len();
    for (&x, r) in sim.nodes() {
        let st = &r.election;
        if r.n() != n {
            v.push(Violation::StaleCount { x, n: r.n(), want: n });
        }
        if candidates.contains(&x) {
            for y in st.live_neighbors() {
                if !st.superiority(y).is_some_and(|(_, phi)| phi) {
                    v.push(Violation::CandidateNotSuperior { x, y });
                }
            }
        }
        for &s in &nodes {
            let got = st.delay_from(s);
            let want = oracle.dist(s, x);
            if got != want {
                v.push(Violation::Distance { s, x, got, want });
            }
        }
        for (&y, l) in st.ledgers() {
            let Some(peer) = sim.node(y) else { continue };
            let back = peer.election.ledger(x).map_or(0, |pl| pl.outbound);
            if l.dead {
                if l.inbound != 0 || l.outbound != 0 {
                    v.push(Violation::DeadLinkWeights { x, y });
                }
                continue;
            }
            if l.inbound != back {
                v.push(Violation::Asymmetric { x, y, inbound: l.inbound, outbound: back });
            }
            let (mut a, mut b) = (0u32, 0u32);
            for &s in &nodes {
                match classify(oracle.dist(s, x), oracle.dist(s, y), l.link_delay) {
                    Class::A => a += 1,
                    Class::B => b += 1,
                    Class::C => {}
                }
            }
            if l.outbound != a || l.inbound != b {
                v.push(Violation::BranchWeight { x, y, outbound: l.outbound, inbound: l.inbound, a, b });
            }
        }
    }

    if let Some(leader) = elected {
        for &x in &nodes {
            let mut at = x;
            let mut total = DelayMicros::ZERO;
            let mut ok = false;
            for _ in 0..=n {
                if at == leader {
                    ok = true;
                    break;
                }
                let Some(p) = sim.node(at).and_then(|r| r.parent()) else { break };
                let Some(d) = g.delay(at, p) else { break };
                total = total.plus(d);
                at = p;
            }
            if !ok {
                v.push(Violation::NotSpanningTree { x });
            } else if total != oracle.dist(leader, x) {
                v.push(Violation::TreeDelay { x, got: total, want: oracle.dist(leader, x) });
            }
        }
    }

    let ambiguous_paths = nodes.iter().any(|&s| {
        nodes.iter().any(|&x| {
            s != x && g.neighbors(x).filter(|&(p, d)| oracle.dist(s, p).plus(d) == oracle.dist(s, x)).count() > 1
        })
    });

    Ok(Audit { oracle, elected, candidates, ambiguous_paths, violations: v })
}

/// Parent pointers form a tree rooted at the agreed leader covering
/// every live node.
pub fn dcdt_spans(sim: &Simulator) -> bool {
    let Some(leader) = sim.leader() else { return false };
    let n = sim.nodes().len();
    sim.nodes().keys().all(|&x| {
        let mut at = x;
        for _ in 0..=n {
            if at == leader {
                return true;
            }
            match sim.node(at).and_then(|r| r.parent()) {
                Some(p) if sim.graph().delay(at, p).is_some() => at = p,
                _ => return false,
            }
        }
        false
    })
}
