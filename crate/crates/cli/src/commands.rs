use std::path::Path;

use anyhow::{bail, Result};
use leader_core::metrics::ComparisonRow;
use leader_core::overlay::NodeId;
use leader_core::sim::{run_scenario, Simulator, TraceLevel};
use leader_core::wire::{sample_message, MessageKind, ProtocolMessage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::formats::{read_graph, read_scenario, Overrides};
use crate::report::{comparison_rows, emit, emit_comparison, report_for_graph, report_for_run, MetricsReport};

pub fn run(scenario: &Path, out: &Path, ov: Overrides) -> Result<(Simulator, MetricsReport)> {
    let sc = read_scenario(scenario, ov)?;
    let sim = run_scenario(&sc, TraceLevel::Full)?;
    let report = report_for_run(&sim, None)?;
    emit(out, &report, Some(sim.trace()))?;
    Ok((sim, report))
}

pub fn oracle(graph: &Path, out: &Path) -> Result<MetricsReport> {
    let g = read_graph(graph)?;
    let report = report_for_graph(&g, None)?;
    emit(out, &report, None)?;
    Ok(report)
}

pub fn compare(scenario: &Path, static_ref: u16, out: &Path, ov: Overrides) -> Result<Vec<ComparisonRow>> {
    let sc = read_scenario(scenario, ov)?;
    let sim = run_scenario(&sc, TraceLevel::Summary)?;
    let rows = comparison_rows(&sim, NodeId(static_ref))?;
    emit_comparison(out, &rows)?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzOutcome {
    pub kind: MessageKind,
    pub iters: u64,
    pub failures: u64,
}

/// Encodes and decodes `iters` random messages of every kind, checking
/// sizes and equality.
pub fn fuzz_codec(iters: u64, seed: u64) -> Vec<FuzzOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MessageKind::ALL
        .iter()
        .map(|&kind| {
            let mut failures = 0;
            for _ in 0..iters {
                let m = sample_message(kind, &mut rng);
                if !round_trips(&m) {
                    failures += 1;
                }
            }
            FuzzOutcome { kind, iters, failures }
        })
        .collect()
}

fn round_trips(m: &ProtocolMessage) -> bool {
    let Ok(bytes) = m.encode() else { return false };
    let sized = match m.kind().body_len() {
        Some(len) => bytes.len() == 1 + len,
        None => bytes.len() > 1,
    };
    sized && bytes[0] == m.kind() as u8 && ProtocolMessage::decode(&bytes).as_ref() == Ok(m)
}

pub fn check_fuzz(outcomes: &[FuzzOutcome]) -> Result<()> {
    let bad: u64 = outcomes.iter().map(|o| o.failures).sum();
    if bad > 0 {
        bail!("{bad} codec round trips failed");
    }
    Ok(())
}
