use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use leader_cli::commands;
use leader_cli::formats::{GraphFile, Overrides};
use leader_cli::report::comparison_rows;
use leader_core::audit::{audit_election, dcdt_spans, Audit, Violation};
use leader_core::metrics::{comparison_row, waiting_time};
use leader_core::oracle::{oracle_mst, oracle_with_leader, tree_closeness};
use leader_core::overlay::{generate_overlay, DelayMicros, NodeId, OverlayGraph};
use leader_core::ratio::Closeness;
use leader_core::sim::{run_scenario, Scenario, TraceLevel};
use leader_core::wire::{sample_message, MessageKind, ProtocolMessage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde_json::json;

const RUNS: u64 = 500;

type Check<'a> = Box<dyn Fn() -> Result<String, String> + 'a>;

struct Run {
    n: usize,
    audit: Audit,
    election_sends: u64,
    reference: u64,
}

fn graph(nodes: &[u16], edges: &[(u16, u16, u64)]) -> OverlayGraph {
    OverlayGraph::from_parts(
        nodes.iter().copied().map(NodeId),
        edges.iter().map(|&(a, b, d)| (NodeId(a), NodeId(b), DelayMicros(d))),
    )
    .unwrap()
}

fn random_runs() -> (Vec<Run>, Duration) {
    let t = Instant::now();
    let runs = (0..RUNS)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=60);
            let k = rng.random_range(1..=4);
            let g = generate_overlay(n, k, 1..=50, seed).unwrap();
            let sim = run_scenario(&Scenario::election(g, seed), TraceLevel::Summary).unwrap();
            let e = &sim.elections()[0];
            Run { n, audit: audit_election(&sim).unwrap(), election_sends: e.election_sends, reference: e.reference() }
        })
        .collect();
    (runs, t.elapsed())
}

fn count(runs: &[Run], bad: impl Fn(&Run) -> bool) -> usize {
    runs.iter().filter(|r| bad(r)).count()
}

fn has(r: &Run, pred: impl Fn(&Violation) -> bool) -> bool {
    r.audit.any(pred)
}

fn verdict(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1(runs: &[Run], took: Duration) -> Result<String, String> {
    let bad = count(runs, |r| r.audit.elected != Some(r.audit.oracle.ideal_leader));
    let sizes = (runs.iter().map(|r| r.n).min().unwrap(), runs.iter().map(|r| r.n).max().unwrap());
    verdict(
        bad == 0 && took < Duration::from_secs(120),
        format!(
            "{}/{} leaders match the oracle, n in {:?}, {:.1}s",
            runs.len() - bad,
            runs.len(),
            sizes,
            took.as_secs_f64()
        ),
    )
}

fn c2(runs: &[Run]) -> Result<String, String> {
    let bad = count(runs, |r| {
        r.audit.candidates.is_empty() || has(r, |v| matches!(v, Violation::CandidateNotSuperior { .. }))
    });
    let total: usize = runs.iter().map(|r| r.audit.candidates.len()).sum();
    verdict(bad == 0, format!("{bad} failing runs, {total} candidates in total"))
}

fn c3(runs: &[Run]) -> Result<String, String> {
    let bad = count(runs, |r| has(r, |v| matches!(v, Violation::Distance { .. } | Violation::Asymmetric { .. })));
    verdict(bad == 0, format!("{bad} runs with a wrong D or I != O"))
}

fn c4(runs: &[Run]) -> Result<String, String> {
    let weights = |v: &Violation| matches!(v, Violation::BranchWeight { .. } | Violation::DeadLinkWeights { .. });
    let ambiguous = count(runs, |r| r.audit.ambiguous_paths);
    let bad_unique = count(runs, |r| !r.audit.ambiguous_paths && has(r, weights));
    let bad_ambiguous = count(runs, |r| r.audit.ambiguous_paths && has(r, weights));
    verdict(
        bad_unique == 0 && bad_ambiguous == 0,
        format!(
            "unique paths: {} runs, {bad_unique} bad; equal-delay paths: {ambiguous} runs, {bad_ambiguous} bad",
            runs.len() - ambiguous
        ),
    )
}

fn c5(runs: &[Run]) -> Result<String, String> {
    let bad = count(runs, |r| has(r, |v| matches!(v, Violation::NotSpanningTree { .. } | Violation::TreeDelay { .. })));
    verdict(bad == 0, format!("{bad} runs where the tree is not a shortest-path tree"))
}

fn c6() -> Result<String, String> {
    let (a, b, c) = (NodeId(0), NodeId(1), NodeId(2));
    let sim = run_scenario(
        &Scenario::election(graph(&[0, 1, 2], &[(0, 1, 10), (0, 2, 1), (2, 1, 1)]), 0),
        TraceLevel::Summary,
    )
    .unwrap();
    let ab = sim.node(a).unwrap().election.ledger(b).unwrap();
    let ba = sim.node(b).unwrap().election.ledger(a).unwrap();
    let ok = ab.dead && ba.dead && ab.outbound == 0 && ba.outbound == 0;
    let ac_live = !sim.node(a).unwrap().election.is_dead(c);
    verdict(
        ok && ac_live,
        format!(
            "dead=({}, {}), O_ab={}, O_ba={}, leader {:?}",
            ab.dead,
            ba.dead,
            ab.outbound,
            ba.outbound,
            sim.leader()
        ),
    )
}

fn c7() -> Result<String, String> {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=5u64 {
        let attach = 1 + seed as usize % 3;
        let sim = run_scenario(&Scenario::sequential_joins(49, attach, 10_000, seed), TraceLevel::Summary).unwrap();
        let prev = sim.nodes()[&NodeId(0)].election.current_leader();
        let o = oracle_with_leader(sim.graph(), prev).unwrap();
        let good = sim.graph().node_count() == 50
            && sim.nodes().values().all(|r| r.n() == 50)
            && sim.leader() == Some(o.ideal_leader)
            && dcdt_spans(&sim);
        ok &= good;
        lines.push(format!("seed {seed}: leader {:?}", sim.leader().map(|l| l.0)));
    }
    verdict(ok, lines.join(", "))
}

fn c8() -> Result<String, String> {
    let (mut steps, mut strict, mut worse) = (0usize, 0usize, 0usize);
    for seed in 1..=5u64 {
        let attach = 1 + seed as usize % 3;
        let sim = run_scenario(&Scenario::sequential_joins(49, attach, 10_000, seed), TraceLevel::Summary).unwrap();
        for r in comparison_rows(&sim, NodeId(0)).unwrap().into_iter().filter(|r| r.n >= 2) {
            steps += 1;
            strict += usize::from(r.strictly_better);
            worse += usize::from(!r.no_worse);
        }
    }
    let path = graph(&(0..10).collect::<Vec<_>>(), &(1..10).map(|i| (i - 1, i, 1)).collect::<Vec<_>>());
    let sim = run_scenario(&Scenario::election(path.clone(), 0), TraceLevel::Summary).unwrap();
    let row = comparison_row(&path, NodeId(0), sim.leader().unwrap()).unwrap();
    let frac = strict as f64 / steps as f64;
    verdict(
        worse == 0 && frac >= 0.5 && row.strictly_better,
        format!(
            "{steps} growth steps, {worse} worse, {:.1}% strictly better; path avg {:.2} vs {:.2}",
            frac * 100.0,
            row.dynamic_delays.avg_us,
            row.static_delays.avg_us
        ),
    )
}

fn c9() -> Result<String, String> {
    let us = |v: &[u64]| v.iter().map(|&d| DelayMicros(d)).collect::<Vec<_>>();
    let flat = waiting_time(&us(&[10, 10, 10])).unwrap();
    let pair = waiting_time(&us(&[8, 12])).unwrap();
    let normal = Normal::<f64>::new(10_000.0, 1_000.0).unwrap();
    let mut worst = 1.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let delays: Vec<DelayMicros> =
            (0..1000).map(|_| DelayMicros(normal.sample(&mut rng).round().max(0.0) as u64)).collect();
        let w = waiting_time(&delays).unwrap();
        let frac = delays.iter().filter(|&&d| d <= w).count() as f64 / delays.len() as f64;
        worst = worst.min(frac);
    }
    verdict(
        flat == DelayMicros(10) && pair == DelayMicros(16) && worst >= 0.985,
        format!("W{{10,10,10}}={}, W{{8,12}}={}, worst covered fraction over 20 seeds {worst:.3}", flat.0, pair.0),
    )
}

fn expected_size(m: &ProtocolMessage) -> usize {
    match m {
        ProtocolMessage::Election { .. } | ProtocolMessage::Join { .. } => 11,
        ProtocolMessage::Inform { .. } => 7,
        ProtocolMessage::Control(t) => 2 + t.as_str().len(),
        _ => 3,
    }
}

fn c10() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut bad = 0u64;
    for kind in MessageKind::ALL {
        for _ in 0..10_000 {
            let m = sample_message(kind, &mut rng);
            let bytes = m.encode().unwrap();
            if bytes.len() != expected_size(&m) || ProtocolMessage::decode(&bytes).as_ref() != Ok(&m) {
                bad += 1;
            }
        }
    }
    let fixed = ProtocolMessage::Election { source: NodeId(1), link_delay: DelayMicros(5), path_delay: DelayMicros(9) }
        .encode()
        .unwrap();
    let layout = fixed[1..] == [0, 1, 0, 0, 0, 5, 0, 0, 0, 9];
    verdict(
        bad == 0 && layout,
        format!("{} messages, {bad} mismatches, ELECTION(1,5,9) layout ok={layout}", 9 * 10_000),
    )
}

fn c11(runs: &[Run]) -> Result<String, String> {
    let bad = count(runs, |r| r.election_sends > 4 * r.reference);
    let worst = runs.iter().map(|r| r.election_sends as f64 / r.reference as f64).fold(0.0, f64::max);
    verdict(bad == 0, format!("{bad} runs over 4*n*|E|, worst ratio {worst:.2}"))
}

fn write_json(path: &Path, v: &serde_json::Value) {
    fs::write(path, serde_json::to_vec(v).unwrap()).unwrap();
}

fn c12() -> Result<String, String> {
    let tmp = tempfile::tempdir().unwrap();
    let mut scenarios = Vec::new();
    for seed in 0..10u64 {
        scenarios.push(json!({
            "graph": {"generate": {"n": 20 + seed as usize * 4, "attach": 1 + seed as usize % 4, "delay_min": 1, "delay_max": 50, "seed": seed}},
            "actions": [{"at": 0, "op": "start_election"}],
            "seed": seed,
            "mode": if seed % 2 == 0 { "quiescence" } else { "timed" }
        }));
    }
    let mut churn = vec![json!({"at": 0, "op": "start_election"})];
    churn.extend((1..=30).map(|i| json!({"at": i * 1000, "op": "join", "attach": 3})));
    churn.push(json!({"at": 40_000, "op": "leave", "node": 12}));
    churn.push(json!({"at": 50_000, "op": "fail_leader"}));
    scenarios.push(json!({"graph": GraphFile { nodes: vec![0], edges: vec![] }, "actions": churn, "seed": 9}));

    let mut same = 0;
    let mut bytes = 0;
    for (i, sc) in scenarios.iter().enumerate() {
        let file = tmp.path().join(format!("s{i}.json"));
        write_json(&file, sc);
        let (a, b) = (tmp.path().join(format!("a{i}")), tmp.path().join(format!("b{i}")));
        commands::run(&file, &a, Overrides::default()).unwrap();
        commands::run(&file, &b, Overrides::default()).unwrap();
        let ta = fs::read(a.join("trace.jsonl")).unwrap();
        let tb = fs::read(b.join("trace.jsonl")).unwrap();
        bytes += ta.len();
        same += usize::from(ta == tb && !ta.is_empty());
    }
    verdict(
        same == scenarios.len(),
        format!("{same}/{} scenarios byte-identical, {bytes} trace bytes", scenarios.len()),
    )
}

fn mst_fixture() -> Result<String, String> {
    let g = graph(&[0, 1, 2, 3, 4], &[(0, 1, 1), (1, 2, 1), (1, 4, 1), (0, 3, 1), (1, 3, 1)]);
    let tree = oracle_mst(&g).unwrap();
    let best_tree = g.nodes().map(|v| tree_closeness(&tree, v).unwrap()).max().unwrap();
    let sim = run_scenario(&Scenario::election(g.clone(), 0), TraceLevel::Summary).unwrap();
    let root = sim.leader().unwrap();
    let dcdt: Vec<(NodeId, NodeId, DelayMicros)> =
        g.nodes().filter_map(|v| sim.node(v).unwrap().parent().map(|p| (v, p, g.delay(v, p).unwrap()))).collect();
    let root_c = tree_closeness(&dcdt, root).unwrap();
    let show = |c: Closeness| format!("{}/{}", c.numerator(), c.denominator());
    verdict(best_tree < root_c, format!("best MST centre {} < tree root {root} {}", show(best_tree), show(root_c)))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let (runs, took) = random_runs();
    let checks: Vec<(&str, Check)> = vec![
        ("1 oracle-optimal election", Box::new(|| c1(&runs, took))),
        ("2 candidate existence and locality", Box::new(|| c2(&runs))),
        ("3 distance exactness", Box::new(|| c3(&runs))),
        ("4 branch-weight semantics", Box::new(|| c4(&runs))),
        ("5 shortest-path tree", Box::new(|| c5(&runs))),
        ("6 dead-link detection", Box::new(c6)),
        ("7 dynamic maintenance", Box::new(c7)),
        ("8 static vs dynamic", Box::new(c8)),
        ("9 waiting time", Box::new(c9)),
        ("10 codec round trip", Box::new(c10)),
        ("11 message accounting", Box::new(|| c11(&runs))),
        ("12 determinism", Box::new(c12)),
        ("MST centre fixture", Box::new(mst_fixture)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance checks failed");
        ExitCode::FAILURE
    }
}
