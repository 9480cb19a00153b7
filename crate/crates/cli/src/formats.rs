//! JSON input files: graphs and scenario scripts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use leader_core::overlay::{generate_overlay, DelayMicros, NodeId, OverlayGraph};
use leader_core::sim::{Action, Mode, Scenario, DEFAULT_K_PERMILLE};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFile {
    pub a: u16,
    pub b: u16,
    pub delay_us: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<u16>,
    pub edges: Vec<EdgeFile>,
}

impl GraphFile {
    pub fn from_graph(g: &OverlayGraph) -> Self {
        GraphFile {
            nodes: g.nodes().map(|v| v.0).collect(),
            edges: g.edges().into_iter().map(|(a, b, d)| EdgeFile { a: a.0, b: b.0, delay_us: d.0 }).collect(),
        }
    }

    pub fn to_graph(&self) -> Result<OverlayGraph> {
        let g = OverlayGraph::from_parts(
            self.nodes.iter().copied().map(NodeId),
            self.edges.iter().map(|e| (NodeId(e.a), NodeId(e.b), DelayMicros(e.delay_us))),
        )?;
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub n: usize,
    pub attach: usize,
    pub delay_min: u64,
    pub delay_max: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Inline(GraphFile),
    Path(PathBuf),
    Generate { generate: GenerateSpec },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Join,
    Leave,
    StartElection,
    FailLeader,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionFile {
    #[serde(default)]
    pub at: u64,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attach: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Quiescence,
    Timed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub graph: GraphSpec,
    #[serde(default)]
    pub actions: Vec<ActionFile>,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// `[min, max]` delay for links created by joins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join_delay: Option<[u64; 2]>,
}

/// Command-line overrides for a scenario file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<ModeName>,
    pub k: Option<f64>,
}

pub fn k_permille(k: f64) -> Result<u32> {
    let p = (k * 1000.0).round();
    if !p.is_finite() || p < 1.0 || p > f64::from(u32::MAX) {
        bail!("k must be a positive number, got {k}");
    }
    Ok(p as u32)
}

pub fn read_graph(path: &Path) -> Result<OverlayGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: GraphFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.to_graph()
}

pub fn read_scenario(path: &Path, ov: Overrides) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ScenarioFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.build(path.parent().unwrap_or(Path::new(".")), ov)
}

impl ScenarioFile {
    /// Resolves the graph (relative paths against `base`) and the script.
    pub fn build(&self, base: &Path, ov: Overrides) -> Result<Scenario> {
        let graph = match &self.graph {
            GraphSpec::Inline(g) => g.to_graph()?,
            GraphSpec::Path(p) => read_graph(&base.join(p))?,
            GraphSpec::Generate { generate: s } => generate_overlay(s.n, s.attach, s.delay_min..=s.delay_max, s.seed)?,
        };
        let mut sc = Scenario::new(graph, ov.seed.unwrap_or(self.seed));
        sc.mode = match ov.mode.unwrap_or(self.mode) {
            ModeName::Quiescence => Mode::Quiescence,
            ModeName::Timed => Mode::Timed {
                k_permille: match ov.k.or(self.k) {
                    Some(k) => k_permille(k)?,
                    None => DEFAULT_K_PERMILLE,
                },
            },
        };
        if let Some([lo, hi]) = self.join_delay {
            if lo > hi {
                bail!("join_delay [{lo}, {hi}] is empty");
            }
            sc.join_delay = lo..=hi;
        }
        for (i, a) in self.actions.iter().enumerate() {
            let action = match a.op {
                Op::StartElection => Action::StartElection,
                Op::FailLeader => Action::FailLeader,
                Op::Join => Action::Join { contact: a.node.map(NodeId), attach: a.attach.unwrap_or(1) },
                Op::Leave => match a.node {
                    Some(v) => Action::Leave { node: NodeId(v) },
                    None => bail!("action {i}: leave needs a node"),
                },
            };
            sc.push(a.at, action);
        }
        Ok(sc)
    }
}
