use crate::action::ActionSpec;
use crate::engine::{replay, EpisodeLog, ReplayError, ReplayVerdict, Transition};
use crate::geometry::{BBox, Point};
use crate::graph::{GraphBenchmark, NodeId};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplementConfig {
    /// Clicks closer than this (pixels, Euclidean) share a cluster.
    pub radius: f64,
    /// Smallest cluster that becomes a proposal.
    pub min_points: usize,
}

impl Default for SupplementConfig {
    fn default() -> Self {
        Self { radius: 30.0, min_points: 1 }
    }
}

/// A region probe agents clicked without effect. The target node is left
/// for a curator to name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchProposal {
    pub id: String,
    pub node: NodeId,
    /// Screen shown to the curator.
    pub screen: String,
    pub bbox: BBox,
    pub points: Vec<Point>,
}

#[derive(Debug, thiserror::Error)]
pub enum SupplementError {
    #[error("probe log {index} does not replay: {verdict:?}")]
    Diverged { index: usize, verdict: ReplayVerdict },
    #[error("probe log {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: ReplayError,
    },
}

/// Single-linkage clusters of `points`, in order of each cluster's first point.
pub fn cluster_points(points: &[Point], radius: f64) -> Vec<Vec<Point>> {
    let mut uf = UnionFind::new(points.len());
    let r2 = radius * radius;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dx = f64::from(points[i].x) - f64::from(points[j].x);
            let dy = f64::from(points[i].y) - f64::from(points[j].y);
            if dx * dx + dy * dy <= r2 {
                uf.union(i, j);
            }
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<Point>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let r = uf.find_mut(i);
        if !groups.contains_key(&r) {
            order.push(r);
        }
        groups.entry(r).or_default().push(*p);
    }
    order.into_iter().map(|r| groups.remove(&r).expect("root recorded")).collect()
}

/// Turns no-op clicks and long-presses from replay-verified probe logs into
/// branch proposals. The graph is not modified.
pub fn supplement_branches(
    g: &GraphBenchmark,
    logs: &[EpisodeLog],
    cfg: &SupplementConfig,
) -> Result<Vec<BranchProposal>, SupplementError> {
    let mut per_node: BTreeMap<NodeId, Vec<Point>> = BTreeMap::new();
    for (index, log) in logs.iter().enumerate() {
        match replay(g, log) {
            Ok(ReplayVerdict::Identical) => {}
            Ok(verdict) => return Err(SupplementError::Diverged { index, verdict }),
            Err(source) => return Err(SupplementError::Replay { index, source }),
        }
        for s in &log.steps {
            let (ActionSpec::Click { coordinate } | ActionSpec::LongPress { coordinate }) = &s.outcome.applied else {
                continue;
            };
            if s.outcome.transition == Transition::NoOp {
                per_node.entry(s.outcome.new_node.clone()).or_default().push(*coordinate);
            }
        }
    }
    let mut out = Vec::new();
    for (node, points) in per_node {
        let clusters = cluster_points(&points, cfg.radius);
        for (k, c) in clusters.into_iter().filter(|c| c.len() >= cfg.min_points).enumerate() {
            out.push(BranchProposal {
                id: format!("bp-{node}-{k}"),
                screen: g.nodes[&node].screens[0].sha256.clone(),
                node: node.clone(),
                bbox: BBox::covering(&c).expect("clusters are non-empty"),
                points: c,
            });
        }
    }
    Ok(out)
}
