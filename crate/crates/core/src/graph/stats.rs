use super::model::{GraphBenchmark, TaskKind};
use super::search::optimal_solution_length;
use crate::action::ActionKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Summary statistics. Out-degree figures exclude the global actions
/// (`navigate_back`, `navigate_home`, `open`) since those are available on
/// every screen; the action histogram counts every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub screens: usize,
    pub tasks: usize,
    pub single_app_tasks: usize,
    pub cross_app_tasks: usize,
    /// Edges left after dropping global-action edges.
    pub filtered_edges: usize,
    /// out-degree -> number of nodes with it
    pub out_degree_histogram: BTreeMap<usize, usize>,
    pub mean_out_degree: f64,
    pub max_out_degree: usize,
    pub action_histogram: BTreeMap<ActionKind, usize>,
    pub nodes_per_app: BTreeMap<String, usize>,
    /// Mean over feasible tasks of the fewest steps solving them.
    pub mean_optimal_path_length: Option<f64>,
}

pub fn graph_stats(g: &GraphBenchmark) -> GraphStats {
    let mut out_degree_histogram = BTreeMap::new();
    let mut filtered_edges = 0;
    let mut max_out_degree = 0;
    for id in g.nodes.keys() {
        let d = g
            .out_edges(id)
            .iter()
            .filter(|&&i| !g.edges[i].trigger.kind().is_global())
            .count();
        filtered_edges += d;
        max_out_degree = max_out_degree.max(d);
        *out_degree_histogram.entry(d).or_insert(0) += 1;
    }
    let mut action_histogram = BTreeMap::new();
    for e in &g.edges {
        *action_histogram.entry(e.trigger.kind()).or_insert(0) += 1;
    }
    let mut nodes_per_app = BTreeMap::new();
    for n in g.nodes.values() {
        *nodes_per_app.entry(n.app.clone()).or_insert(0) += 1;
    }
    let lengths: Vec<usize> = g.tasks.iter().filter_map(|t| optimal_solution_length(g, t)).collect();
    let mean_optimal_path_length =
        (!lengths.is_empty()).then(|| lengths.iter().sum::<usize>() as f64 / lengths.len() as f64);

    GraphStats {
        nodes: g.nodes.len(),
        edges: g.edges.len(),
        screens: g.screen_count(),
        tasks: g.tasks.len(),
        single_app_tasks: g.tasks.iter().filter(|t| t.kind == TaskKind::SingleApp).count(),
        cross_app_tasks: g.tasks.iter().filter(|t| t.kind == TaskKind::CrossApp).count(),
        filtered_edges,
        out_degree_histogram,
        mean_out_degree: if g.nodes.is_empty() { 0.0 } else { filtered_edges as f64 / g.nodes.len() as f64 },
        max_out_degree,
        action_histogram,
        nodes_per_app,
        mean_optimal_path_length,
    }
}

impl std::fmt::Display for GraphStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "nodes            {}", self.nodes)?;
        writeln!(f, "edges            {} ({} excluding global actions)", self.edges, self.filtered_edges)?;
        writeln!(f, "screens          {}", self.screens)?;
        writeln!(f, "tasks            {} ({} single-app, {} cross-app)", self.tasks, self.single_app_tasks, self.cross_app_tasks)?;
        writeln!(f, "mean out-degree  {:.2} (max {})", self.mean_out_degree, self.max_out_degree)?;
        match self.mean_optimal_path_length {
            Some(l) => writeln!(f, "mean optimal len {l:.2}")?,
            None => writeln!(f, "mean optimal len -")?,
        }
        writeln!(f, "out-degree histogram:")?;
        for (d, n) in &self.out_degree_histogram {
            writeln!(f, "  {d:>3}  {n}")?;
        }
        writeln!(f, "actions:")?;
        for (k, n) in &self.action_histogram {
            writeln!(f, "  {:<14} {n}", k.as_str())?;
        }
        writeln!(f, "nodes per app:")?;
        for (app, n) in &self.nodes_per_app {
            writeln!(f, "  {app:<14} {n}")?;
        }
        Ok(())
    }
}
