use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use leader_cli::commands;
use leader_cli::formats::{ModeName, Overrides};

#[derive(Parser)]
#[command(name = "leaderctl", version, about = "Run leader election scenarios and emit metrics")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeName>,
    /// Timed-mode wait factor.
    #[arg(long, global = true)]
    k: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario; writes trace.jsonl, metrics.csv and summary.json.
    Run { scenario: PathBuf },
    /// Brute-force metrics for a graph file.
    Oracle { graph: PathBuf },
    /// Static node versus elected leader after every scripted step.
    Compare {
        #[arg(long = "static")]
        static_ref: u16,
        scenario: PathBuf,
    },
    /// Round-trip random messages of every kind.
    FuzzCodec {
        #[arg(long, default_value_t = 10_000)]
        iters: u64,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let ov = Overrides { seed: cli.seed, mode: cli.mode, k: cli.k };
    match cli.cmd {
        Cmd::Run { scenario } => {
            let (_, r) = commands::run(&scenario, &cli.out, ov)?;
            let leader = r.leader.map_or("none".to_string(), |l| l.to_string());
            println!("n={} edges={} leader={leader} -> {}", r.n, r.edges, cli.out.display());
            if let Some(m) = &r.messages {
                println!("election sends {} (n*|E| = {})", m.election_sends, m.election_reference);
            }
        }
        Cmd::Oracle { graph } => {
            let r = commands::oracle(&graph, &cli.out)?;
            println!("ideal leader {:?} -> {}", r.leader, cli.out.display());
        }
        Cmd::Compare { static_ref, scenario } => {
            let rows = commands::compare(&scenario, static_ref, &cli.out, ov)?;
            println!("n,leader,avg_static,max_static,avg_dynamic,max_dynamic");
            for r in &rows {
                println!(
                    "{},{},{:.3},{},{:.3},{}",
                    r.n,
                    r.leader,
                    r.static_delays.avg_us,
                    r.static_delays.max_us,
                    r.dynamic_delays.avg_us,
                    r.dynamic_delays.max_us
                );
            }
        }
        Cmd::FuzzCodec { iters } => {
            let outcomes = commands::fuzz_codec(iters, cli.seed.unwrap_or(0));
            for o in &outcomes {
                println!("{:<12} {} ok, {} failed", o.kind.name(), o.iters - o.failures, o.failures);
            }
            commands::check_fuzz(&outcomes)?;
        }
    }
    Ok(())
}
