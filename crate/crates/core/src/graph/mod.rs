//! The benchmark graph: screen-state nodes, action edges, apps and tasks.

mod manifest;
mod model;
mod search;
mod stats;
mod validate;

pub use manifest::{load_graph, AssetCheck, LoadError, ManifestDoc, MilestoneDoc, TaskDoc, MANIFEST_VERSION};
pub use model::{
    Capability, Edge, GraphBenchmark, Milestone, Node, NodeId, Screen, Task, TaskKind, TextMatch, TextRule, Trigger,
};
pub use search::{global_successors, optimal_solution_length};
pub use stats::{graph_stats, GraphStats};
pub use validate::{validate_graph, Finding, ValidationReport};

impl Task {
    /// Milestones completed by standing on `node` given what is already
    /// reached. Scans in declaration order so that a chain of milestones
    /// sharing one accept node resolves in a single call; `requires` only
    /// points backwards, so one pass suffices.
    pub fn newly_reached(&self, node: &NodeId, reached: &[bool]) -> Vec<usize> {
        let mut now = reached.to_vec();
        let mut out = Vec::new();
        for (i, m) in self.milestones.iter().enumerate() {
            if now[i] || !m.accept.contains(node) {
                continue;
            }
            let ready = m
                .requires
                .iter()
                .all(|r| self.milestone_index(r).is_some_and(|j| now[j]));
            if ready {
                now[i] = true;
                out.push(i);
            }
        }
        out
    }
}
