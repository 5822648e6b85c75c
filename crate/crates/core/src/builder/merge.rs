use super::coarse::{MergeCandidate, Verdict, VerdictSource};
use super::trajectory::{ScreenAsset, TrajectorySet};
use crate::action::ActionSpec;
use crate::geometry::{BBox, Dims, Point};
use crate::graph::{AssetCheck, Edge, GraphBenchmark, LoadError, ManifestDoc, Node, NodeId, Screen, TextRule, Trigger};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

/// App tag of the launcher / system screens.
pub const SYSTEM_APP: &str = "system";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeConfig {
    /// Representative screenshots kept per node, first seen first.
    pub max_screens_per_node: usize,
    /// Half-width of the box drawn around a click recorded without one.
    pub point_box_radius: u32,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self { max_screens_per_node: 3, point_box_radius: 8 }
    }
}

/// A click edge added from an accepted branch proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchEdge {
    pub screen: String,
    pub bbox: BBox,
    pub target: String,
}

/// Curator-supplied edges that no trajectory records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeExtras {
    /// Copy every outgoing edge of the node holding `.0` to the node holding `.1`.
    pub copy_edges: Vec<(String, String)>,
    pub branches: Vec<BranchEdge>,
}

/// A same-node verdict that would join two screens another verdict keeps apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contradiction {
    pub candidate: String,
    pub blocked_by: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    /// Automatic same-node verdicts that were not applied; treat as pending.
    pub contradictions: Vec<Contradiction>,
    /// Automatic different-node pairs joined anyway by human verdicts.
    pub overridden: Vec<String>,
    /// Screens dropped by the representative cap.
    pub dropped_screens: Vec<String>,
    /// Trajectory steps that produced no edge, with the reason.
    pub skipped_steps: Vec<String>,
    /// Nodes whose member screens differ in size.
    pub mixed_dims: Vec<NodeId>,
    /// The same trigger leading to different nodes.
    pub ambiguous: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Draft {
    pub graph: GraphBenchmark,
    /// Node of every screen in the input, including dropped ones.
    pub node_of: BTreeMap<String, NodeId>,
    pub report: MergeReport,
}

struct Universe {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Universe {
    fn new(ts: &TrajectorySet, cands: &[MergeCandidate]) -> Self {
        let mut u = Universe { ids: Vec::new(), index: HashMap::new() };
        for s in ts.screens() {
            u.add(&s.sha256);
        }
        for c in cands {
            u.add(&c.a);
            u.add(&c.b);
        }
        u
    }

    fn add(&mut self, sha: &str) {
        if !self.index.contains_key(sha) {
            self.index.insert(sha.to_string(), self.ids.len());
            self.ids.push(sha.to_string());
        }
    }
}

/// Unions in two passes: human same-node (blocked only by human
/// different-node), then automatic same-node (blocked by any
/// different-node). Pending counts as different for drafting purposes but
/// never blocks.
fn partition(u: &Universe, cands: &[MergeCandidate], report: &mut MergeReport) -> UnionFind<usize> {
    let mut uf = UnionFind::new(u.ids.len());
    let pair = |c: &MergeCandidate| (u.index[&c.a], u.index[&c.b]);
    let different: Vec<&MergeCandidate> = cands.iter().filter(|c| c.verdict == Verdict::DifferentNode).collect();

    for pass in [VerdictSource::Human, VerdictSource::Auto] {
        for c in cands.iter().filter(|c| c.verdict == Verdict::SameNode && c.source == pass) {
            let (a, b) = pair(c);
            let (ra, rb) = (uf.find_mut(a), uf.find_mut(b));
            if ra == rb {
                continue;
            }
            let blocker = different.iter().find(|d| {
                if pass == VerdictSource::Human && d.source != VerdictSource::Human {
                    return false;
                }
                let (p, q) = pair(d);
                let (rp, rq) = (uf.find_mut(p), uf.find_mut(q));
                (rp == ra && rq == rb) || (rp == rb && rq == ra)
            });
            match blocker {
                Some(d) => report.contradictions.push(Contradiction { candidate: c.id.clone(), blocked_by: d.id.clone() }),
                None => {
                    uf.union(a, b);
                }
            }
        }
    }
    for d in &different {
        let (p, q) = pair(d);
        if d.source == VerdictSource::Auto && uf.equiv(p, q) {
            report.overridden.push(d.id.clone());
        }
    }
    uf
}

fn image_path(s: &ScreenAsset) -> String {
    let ext = s.path.extension().and_then(|e| e.to_str()).unwrap_or("png").to_ascii_lowercase();
    format!("screens/{}.{ext}", s.sha256)
}

fn trigger_of(action: &ActionSpec, bbox: Option<BBox>, dims: Dims, radius: u32) -> Result<Trigger, String> {
    let area = |p: Point| match bbox {
        Some(b) => Ok(b),
        None => BBox::around(p, radius, dims).ok_or_else(|| format!("no box fits around ({},{})", p.x, p.y)),
    };
    Ok(match action {
        ActionSpec::Click { coordinate } => Trigger::Click { bbox: area(*coordinate)? },
        ActionSpec::LongPress { coordinate } => Trigger::LongPress { bbox: area(*coordinate)? },
        ActionSpec::Swipe { direction } => Trigger::Swipe { direction: *direction },
        ActionSpec::Type { text } => Trigger::Type { rule: TextRule::default_match(text.clone()) },
        ActionSpec::Open { app } => Trigger::Open { app: app.clone() },
        ActionSpec::NavigateBack => Trigger::NavigateBack,
        ActionSpec::NavigateHome => Trigger::NavigateHome,
        ActionSpec::Wait { .. } | ActionSpec::Complete { .. } => return Err(format!("{action} has no edge form")),
    })
}

/// Builds a draft graph: union-find over same-node verdicts, recorded
/// actions as edges between the merged nodes, curator extras on top.
/// The output loads but is not guaranteed to validate.
pub fn merge_graph(
    ts: &TrajectorySet,
    cands: &[MergeCandidate],
    extras: &MergeExtras,
    cfg: &MergeConfig,
) -> Result<Draft, LoadError> {
    let mut report = MergeReport::default();
    let u = Universe::new(ts, cands);
    let mut uf = partition(&u, cands, &mut report);

    // Node ids in first-appearance order of their components.
    let mut root_node: HashMap<usize, NodeId> = HashMap::new();
    let mut members: BTreeMap<NodeId, Vec<&ScreenAsset>> = BTreeMap::new();
    for s in ts.screens() {
        let r = uf.find_mut(u.index[&s.sha256]);
        let next = root_node.len();
        let id = root_node.entry(r).or_insert_with(|| NodeId::new(format!("n{next:02}"))).clone();
        members.entry(id).or_default().push(s);
    }
    let mut node_of = BTreeMap::new();
    for (i, sha) in u.ids.iter().enumerate() {
        if let Some(id) = root_node.get(&uf.find_mut(i)) {
            node_of.insert(sha.clone(), id.clone());
        }
    }

    let mut nodes = Vec::with_capacity(members.len());
    let mut dims_of = HashMap::new();
    for (id, ms) in &members {
        let kept = &ms[..ms.len().min(cfg.max_screens_per_node.max(1))];
        report.dropped_screens.extend(ms[kept.len()..].iter().map(|s| s.sha256.clone()));
        if kept.iter().any(|s| s.dims() != kept[0].dims()) {
            report.mixed_dims.push(id.clone());
        }
        dims_of.insert(id.clone(), kept[0].dims());
        let app = ms.iter().find_map(|s| s.app.clone()).unwrap_or_else(|| "unknown".into());
        nodes.push(Node {
            id: id.clone(),
            app,
            screens: kept
                .iter()
                .map(|s| Screen { image: image_path(s), sha256: s.sha256.clone(), width: s.width, height: s.height })
                .collect(),
            labels: Vec::new(),
        });
    }

    let first_tagged = |pred: &dyn Fn(&str) -> bool| {
        ts.screens().iter().find(|s| s.app.as_deref().is_some_and(pred)).map(|s| node_of[&s.sha256].clone())
    };
    let home = first_tagged(&|a| a == SYSTEM_APP)
        .or_else(|| ts.screens().first().map(|s| node_of[&s.sha256].clone()))
        .unwrap_or_else(|| NodeId::new("n00"));
    let mut apps = BTreeMap::new();
    for s in ts.screens() {
        if let Some(a) = s.app.as_deref().filter(|a| *a != SYSTEM_APP) {
            apps.entry(a.to_string()).or_insert_with(|| node_of[&s.sha256].clone());
        }
    }

    let mut edges: Vec<Edge> = Vec::new();
    let mut seen: HashSet<(NodeId, Trigger, NodeId)> = HashSet::new();
    let mut push = |edges: &mut Vec<Edge>, report: &mut MergeReport, e: Edge| {
        if let Trigger::Open { app } = &e.trigger {
            if !apps.contains_key(app) {
                report.skipped_steps.push(format!("open({app}) from {}: unknown app", e.src));
                return;
            }
        }
        if seen.insert((e.src.clone(), e.trigger.clone(), e.dst.clone())) {
            edges.push(e);
        }
    };
    for t in &ts.trajectories {
        for (i, pair) in t.steps.windows(2).enumerate() {
            let (src, dst) = (&node_of[&pair[0].screen], &node_of[&pair[1].screen]);
            let Some(action) = &pair[0].action else {
                if src != dst {
                    report.skipped_steps.push(format!("{}[{i}]: no action", t.id));
                }
                continue;
            };
            if src == dst {
                continue;
            }
            match trigger_of(action, pair[0].bbox, dims_of[src], cfg.point_box_radius) {
                Ok(trigger) => push(&mut edges, &mut report, Edge { src: src.clone(), dst: dst.clone(), trigger, note: None }),
                Err(why) => report.skipped_steps.push(format!("{}[{i}]: {why}", t.id)),
            }
        }
    }
    for b in &extras.branches {
        match (node_of.get(&b.screen), node_of.get(&b.target)) {
            (Some(src), Some(dst)) => {
                let e = Edge { src: src.clone(), dst: dst.clone(), trigger: Trigger::Click { bbox: b.bbox }, note: None };
                push(&mut edges, &mut report, e);
            }
            _ => report.skipped_steps.push(format!("branch on {}: unknown screen", b.screen)),
        }
    }
    for (from, to) in &extras.copy_edges {
        let (Some(from), Some(to)) = (node_of.get(from), node_of.get(to)) else {
            report.skipped_steps.push(format!("copy edges {from} -> {to}: unknown screen"));
            continue;
        };
        let copies: Vec<Edge> = edges
            .iter()
            .filter(|e| &e.src == from && &e.dst != to)
            .filter(|e| !edges.iter().any(|o| &o.src == to && o.trigger == e.trigger))
            .map(|e| Edge { src: to.clone(), ..e.clone() })
            .collect();
        for e in copies {
            push(&mut edges, &mut report, e);
        }
    }

    let mut by_trigger: BTreeMap<(&NodeId, String), BTreeSet<&NodeId>> = BTreeMap::new();
    for e in &edges {
        let key = serde_json::to_string(&e.trigger).expect("trigger serializes");
        by_trigger.entry((&e.src, key)).or_default().insert(&e.dst);
    }
    report.ambiguous = by_trigger
        .into_iter()
        .filter(|(_, d)| d.len() > 1)
        .map(|((src, t), d)| format!("{src} {t} -> {}", d.into_iter().map(|n| n.as_str()).collect::<Vec<_>>().join(",")))
        .collect();

    let mut meta = serde_json::Map::new();
    meta.insert("draft".into(), true.into());
    let doc = ManifestDoc {
        version: crate::graph::MANIFEST_VERSION,
        home,
        apps,
        nodes,
        edges,
        tasks: Vec::new(),
        meta,
    };
    let graph = GraphBenchmark::from_doc(doc, AssetCheck::Skip)?;
    Ok(Draft { graph, node_of, report })
}

/// Writes `manifest.json` and copies the kept screenshots under `out`.
pub fn write_draft(draft: &Draft, ts: &TrajectorySet, out: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(out.join("screens"))?;
    for n in draft.graph.nodes.values() {
        for s in &n.screens {
            let src = &ts.screen(&s.sha256).expect("draft screens come from the set").path;
            std::fs::copy(src, out.join(&s.image))?;
        }
    }
    std::fs::write(out.join("manifest.json"), draft.graph.to_manifest_json())
}

/// Recorded steps with no matching edge in the draft: no edge from the
/// step's node to the next step's node accepts the recorded action. Steps
/// that stay on one node count as covered. Where one action leads to two
/// nodes the engine follows only one; those are listed in
/// [`MergeReport::ambiguous`].
pub fn uncovered_steps(draft: &Draft, ts: &TrajectorySet) -> Vec<(String, usize)> {
    let g = &draft.graph;
    let mut out = Vec::new();
    for t in &ts.trajectories {
        for (i, pair) in t.steps.windows(2).enumerate() {
            let (src, dst) = (&draft.node_of[&pair[0].screen], &draft.node_of[&pair[1].screen]);
            let ok = src == dst
                || pair[0].action.as_ref().is_some_and(|a| {
                    g.out_edges(src).iter().any(|&k| &g.edges[k].dst == dst && g.edges[k].trigger.accepts(a))
                });
            if !ok {
                out.push((t.id.clone(), i));
            }
        }
    }
    out
}

/// Node-name-free description of a graph: each node as its screen set,
/// edges and roots in terms of those sets. Equal forms mean isomorphic
/// graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    pub nodes: BTreeSet<BTreeSet<String>>,
    pub edges: BTreeSet<(BTreeSet<String>, String, BTreeSet<String>)>,
    pub home: BTreeSet<String>,
    pub apps: BTreeMap<String, BTreeSet<String>>,
}

pub fn canonical_form(g: &GraphBenchmark) -> CanonicalForm {
    let set = |id: &NodeId| -> BTreeSet<String> { g.nodes[id].screens.iter().map(|s| s.sha256.clone()).collect() };
    CanonicalForm {
        nodes: g.nodes.keys().map(set).collect(),
        edges: g
            .edges
            .iter()
            .map(|e| (set(&e.src), serde_json::to_string(&e.trigger).expect("trigger serializes"), set(&e.dst)))
            .collect(),
        home: set(&g.home),
        apps: g.apps.iter().map(|(a, n)| (a.clone(), set(n))).collect(),
    }
}
