//! Metrics reports and the files a run leaves behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use leader_core::metrics::{branch_delays, comparison_row, node_metrics, waiting_time, BranchDelays, ComparisonRow};
use leader_core::oracle::{oracle_all_pairs, OracleResult};
use leader_core::overlay::{DelayMicros, NodeId, OverlayGraph};
use leader_core::ratio::Closeness;
use leader_core::sim::{ElectionRecord, MessageCounts, Simulator, TraceRecord};
use serde::{Deserialize, Serialize};

pub const METRICS_HEADER: &str = "node_id,closeness_num,closeness_den,closeness,eccentricity_us,is_candidate,is_leader";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centrality {
    pub num: u64,
    pub den: u64,
    pub value: f64,
}

impl From<Closeness> for Centrality {
    fn from(c: Closeness) -> Self {
        Centrality { num: c.numerator(), den: c.denominator(), value: c.to_f64() }
    }
}

/// One line of metrics.csv.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub node_id: u16,
    pub closeness_num: u64,
    pub closeness_den: u64,
    pub closeness: f64,
    pub eccentricity_us: u64,
    pub is_candidate: bool,
    pub is_leader: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageSummary {
    pub by_kind: BTreeMap<String, u64>,
    pub total: u64,
    pub election_sends: u64,
    /// Sum of `n * |E|` over all elections run.
    pub election_reference: u64,
}

impl MessageSummary {
    fn new(counts: &MessageCounts, elections: &[ElectionRecord]) -> Self {
        MessageSummary {
            by_kind: counts.0.iter().map(|(k, v)| (k.name().to_string(), *v)).collect(),
            total: counts.total(),
            election_sends: elections.iter().map(|e| e.election_sends).sum(),
            election_reference: elections.iter().map(ElectionRecord::reference).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub edges: usize,
    pub leader: Option<u16>,
    pub leader_centrality: Option<Centrality>,
    pub leader_eccentricity_us: Option<u64>,
    pub static_ref: u16,
    pub static_delays: BranchDelays,
    pub dynamic_delays: Option<BranchDelays>,
    /// `mean + 3 sigma` of the delays from every other node to the leader.
    pub waiting_time_us: Option<u64>,
    pub messages: Option<MessageSummary>,
    pub elections: Vec<ElectionRecord>,
    pub nodes: Vec<NodeRow>,
}

/// Lowest live id; the default static reference.
pub fn default_static_ref(g: &OverlayGraph) -> Result<NodeId> {
    g.nodes().next().ok_or_else(|| anyhow!("empty graph"))
}

pub fn build_report(
    g: &OverlayGraph,
    o: &OracleResult,
    candidates: &BTreeSet<NodeId>,
    leader: Option<NodeId>,
    static_ref: NodeId,
) -> Result<MetricsReport> {
    let nodes = node_metrics(o, candidates, leader)
        .into_iter()
        .map(|m| NodeRow {
            node_id: m.node.0,
            closeness_num: m.closeness.numerator(),
            closeness_den: m.closeness.denominator(),
            closeness: m.closeness.to_f64(),
            eccentricity_us: m.eccentricity.0,
            is_candidate: m.is_candidate,
            is_leader: m.is_leader,
        })
        .collect();
    let waiting = match leader {
        Some(l) if g.node_count() > 1 => {
            let delays: Vec<DelayMicros> = o.nodes().iter().filter(|&&v| v != l).map(|&v| o.dist(v, l)).collect();
            Some(waiting_time(&delays)?.0)
        }
        _ => None,
    };
    Ok(MetricsReport {
        n: g.node_count(),
        edges: g.edge_count(),
        leader: leader.map(|l| l.0),
        leader_centrality: leader.map(|l| o.closeness[&l].into()),
        leader_eccentricity_us: leader.map(|l| o.eccentricity[&l].0),
        static_ref: static_ref.0,
        static_delays: branch_delays(o, static_ref)?,
        dynamic_delays: leader.map(|l| branch_delays(o, l)).transpose()?,
        waiting_time_us: waiting,
        messages: None,
        elections: Vec::new(),
        nodes,
    })
}

pub fn report_for_run(sim: &Simulator, static_ref: Option<NodeId>) -> Result<MetricsReport> {
    let g = sim.graph();
    let static_ref = match static_ref {
        Some(s) => s,
        None => default_static_ref(g)?,
    };
    let o = oracle_all_pairs(g)?;
    let mut r = build_report(g, &o, &sim.candidates(), sim.leader(), static_ref)?;
    r.messages = Some(MessageSummary::new(sim.counts(), sim.elections()));
    r.elections = sim.elections().to_vec();
    Ok(r)
}

/// Report for a bare graph: the oracle's pick is the leader and every
/// node tied for best closeness is flagged as a candidate.
pub fn report_for_graph(g: &OverlayGraph, static_ref: Option<NodeId>) -> Result<MetricsReport> {
    let static_ref = match static_ref {
        Some(s) => s,
        None => default_static_ref(g)?,
    };
    let o = oracle_all_pairs(g)?;
    let best: BTreeSet<NodeId> = o.best_nodes().into_iter().collect();
    build_report(g, &o, &best, Some(o.ideal_leader), static_ref)
}

/// One comparison row per settled snapshot that has a leader.
pub fn comparison_rows(sim: &Simulator, static_ref: NodeId) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for s in sim.snapshots() {
        let Some(leader) = s.leader else { continue };
        let row =
            comparison_row(&s.graph, static_ref, leader).with_context(|| format!("snapshot at t={} us", s.time))?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct CompareLine {
    n: usize,
    leader: u16,
    avg_delay_static: f64,
    max_delay_static: u64,
    avg_delay_dynamic: f64,
    max_delay_dynamic: u64,
    strictly_better: bool,
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = create(path)?;
    for t in trace {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn write_metrics_csv(path: &Path, rows: &[NodeRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn write_summary(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(CompareLine {
            n: r.n,
            leader: r.leader.0,
            avg_delay_static: r.static_delays.avg_us,
            max_delay_static: r.static_delays.max_us,
            avg_delay_dynamic: r.dynamic_delays.avg_us,
            max_delay_dynamic: r.dynamic_delays.max_us,
            strictly_better: r.strictly_better,
        })?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

/// metrics.csv and summary.json, plus trace.jsonl when a trace is given.
pub fn emit(dir: &Path, report: &MetricsReport, trace: Option<&[TraceRecord]>) -> Result<()> {
    prepare(dir)?;
    write_metrics_csv(&dir.join("metrics.csv"), &report.nodes)?;
    write_summary(&dir.join("summary.json"), report)?;
    if let Some(t) = trace {
        write_trace(&dir.join("trace.jsonl"), t)?;
    }
    Ok(())
}

pub fn emit_comparison(dir: &Path, rows: &[ComparisonRow]) -> Result<()> {
    prepare(dir)?;
    write_comparison_csv(&dir.join("compare.csv"), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> OverlayGraph {
        OverlayGraph::from_parts(
            (0..3).map(NodeId),
            [(0, 1, 2), (1, 2, 2)].map(|(a, b, d)| (NodeId(a), NodeId(b), DelayMicros(d))),
        )
        .unwrap()
    }

    #[test]
    fn csv_header_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let r = report_for_graph(&path3(), None).unwrap();
        emit(dir.path(), &r, None).unwrap();
        let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        assert_eq!(lines.count(), 3);
        assert_eq!(r.leader, Some(1));
        assert_eq!(r.waiting_time_us, Some(2));
    }

    #[test]
    fn single_node_report() {
        let mut g = OverlayGraph::new();
        g.add_node(NodeId(0)).unwrap();
        let r = report_for_graph(&g, None).unwrap();
        assert_eq!(r.waiting_time_us, None);
        assert_eq!(r.nodes.len(), 1);
        assert!(serde_json::to_string(&r).is_ok());
    }
}
